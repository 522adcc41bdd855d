#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "lcp/core.hpp"
#include "lcp/rng.hpp"

namespace lcp {

// Abalone CSV schema: columns sex (M/F/I), length, diameter, height,
// whole_weight, rings. Sex is encoded as 0/1/2 and tagged categorical;
// rings is the response.
struct AbaloneData {
  Dataset data;  // d=5: sex, length, diameter, height, whole_weight
  static constexpr std::size_t kSexCol = 0;

  static double encode_sex(const std::string& s, std::size_t row) {
    if (s == "M") return 0.0;
    if (s == "F") return 1.0;
    if (s == "I") return 2.0;
    throw std::invalid_argument("abalone row " + std::to_string(row) +
                                ": unknown sex code '" + s + "'");
  }

  static std::string sex_name(double code) {
    if (code == 0.0) return "M";
    if (code == 1.0) return "F";
    return "I";
  }
};

inline AbaloneData load_abalone(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open abalone file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("abalone file is empty");

  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
      while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
      out.push_back(cell);
    }
    return out;
  };

  std::vector<std::string> header = split(line);
  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  const char* needed[] = {"sex", "length", "diameter", "height", "whole_weight", "rings"};
  for (const char* name : needed)
    if (!col.count(name))
      throw std::invalid_argument(std::string("abalone file missing column '") + name + "'");

  std::vector<double> feat;
  std::vector<double> resp;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> cells = split(line);
    if (cells.size() != header.size())
      throw std::invalid_argument("abalone row " + std::to_string(row) + ": wrong field count");
    auto num = [&](const char* name) {
      const std::string& s = cells[col[name]];
      try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument("");
        return v;
      } catch (...) {
        throw std::invalid_argument("abalone row " + std::to_string(row) +
                                    ": non-numeric value '" + s + "' in column " + name);
      }
    };
    feat.push_back(AbaloneData::encode_sex(cells[col["sex"]], row));
    feat.push_back(num("length"));
    feat.push_back(num("diameter"));
    feat.push_back(num("height"));
    feat.push_back(num("whole_weight"));
    resp.push_back(num("rings"));
  }
  if (row == 0) throw std::invalid_argument("abalone file has no data rows");

  AbaloneData out;
  out.data.n = resp.size();
  out.data.d = 5;
  out.data.features = std::move(feat);
  out.data.response = std::move(resp);
  out.data.categorical.assign(5, false);
  out.data.categorical[AbaloneData::kSexCol] = true;
  out.data.validate();
  return out;
}

// Largest-remainder three-way integer split of n into the given fractions.
inline std::vector<std::size_t> split_sizes(std::size_t n, const std::vector<double>& fracs) {
  double total = 0.0;
  for (double f : fracs) {
    if (!(f > 0.0)) throw std::invalid_argument("split fractions must be positive");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("split fractions must sum to 1");
  std::vector<std::size_t> sizes(fracs.size());
  std::vector<std::pair<double, std::size_t>> rem(fracs.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < fracs.size(); ++i) {
    double exact = fracs[i] * static_cast<double>(n);
    sizes[i] = static_cast<std::size_t>(std::floor(exact));
    rem[i] = {exact - std::floor(exact), i};
    assigned += sizes[i];
  }
  std::sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++sizes[rem[i].second];
  return sizes;
}

// Random three-way split via a seeded Fisher-Yates shuffle of row indices.
inline std::vector<Dataset> random_split(const Dataset& ds, const std::vector<double>& fracs,
                                         std::uint64_t seed, std::size_t split_index) {
  std::vector<std::size_t> perm(ds.n);
  for (std::size_t i = 0; i < ds.n; ++i) perm[i] = i;
  RngStream rng(seed, StreamLabel(split_index, 0, Purpose::split));
  for (std::size_t i = ds.n; i-- > 1;) {
    std::size_t j = rng.uniform_index(i + 1);
    std::swap(perm[i], perm[j]);
  }
  std::vector<std::size_t> sizes = split_sizes(ds.n, fracs);
  std::vector<Dataset> parts;
  std::size_t pos = 0;
  for (std::size_t size : sizes) {
    Dataset part(size, ds.d);
    part.categorical = ds.categorical;
    for (std::size_t r = 0; r < size; ++r) {
      std::size_t src = perm[pos + r];
      for (std::size_t c = 0; c < ds.d; ++c) part.x(r, c) = ds.x(src, c);
      part.y(r) = ds.y(src);
    }
    parts.push_back(std::move(part));
    pos += size;
  }
  return parts;
}

}  // namespace lcp
