#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lcp/core.hpp"
#include "lcp/stats.hpp"

namespace lcp {

struct TestRecord {
  std::vector<double> x;
  bool covered = false;
  double width = 0.0;        // +inf for a full set
  double threshold = 0.0;
  double pvalue = -1.0;      // p-value at the true response, -1 if unset
  std::vector<double> prototype;
};

struct TrialReport {
  std::size_t trial = 0;
  std::vector<TestRecord> records;
};

struct CoverageEstimate {
  double coverage = 0.0;
  double stderr_between = 0.0;  // between-trial standard error
  std::size_t count = 0;
};

inline CoverageEstimate marginal_coverage(const std::vector<TrialReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("marginal_coverage: no trials");
  CoverageEstimate e;
  std::vector<double> per_trial;
  std::size_t total = 0, hits = 0;
  for (const auto& tr : reports) {
    std::size_t h = 0;
    for (const auto& r : tr.records) h += r.covered ? 1 : 0;
    if (!tr.records.empty())
      per_trial.push_back(static_cast<double>(h) / static_cast<double>(tr.records.size()));
    total += tr.records.size();
    hits += h;
  }
  if (total == 0) throw std::invalid_argument("marginal_coverage: no records");
  e.coverage = static_cast<double>(hits) / static_cast<double>(total);
  e.count = total;
  if (per_trial.size() > 1) {
    double m = 0.0;
    for (double v : per_trial) m += v;
    m /= static_cast<double>(per_trial.size());
    double s2 = 0.0;
    for (double v : per_trial) s2 += (v - m) * (v - m);
    s2 /= static_cast<double>(per_trial.size() - 1);
    e.stderr_between = std::sqrt(s2 / static_cast<double>(per_trial.size()));
  }
  return e;
}

using RegionFn = std::function<bool(const std::vector<double>&)>;

struct Region {
  std::string name;
  RegionFn contains;
};

struct RegionCoverage {
  std::string name;
  std::size_t count = 0;
  double coverage = 0.0;
  bool missing = false;  // empty region: no estimate rather than zero
};

inline std::vector<RegionCoverage> conditional_coverage(
    const std::vector<TrialReport>& reports, const std::vector<Region>& regions) {
  std::vector<RegionCoverage> out;
  for (const auto& reg : regions) {
    std::size_t total = 0, hits = 0;
    for (const auto& tr : reports)
      for (const auto& r : tr.records)
        if (reg.contains(r.x)) {
          ++total;
          hits += r.covered ? 1 : 0;
        }
    RegionCoverage rc;
    rc.name = reg.name;
    rc.count = total;
    if (total == 0)
      rc.missing = true;
    else
      rc.coverage = static_cast<double>(hits) / static_cast<double>(total);
    out.push_back(rc);
  }
  return out;
}

// B_in = {||x|| <= tau_d} with tau_d^2 the chi-square-d median, B_out its
// complement.
inline std::vector<Region> norm_split_regions(std::size_t d) {
  double tau = std::sqrt(chi2_median(d));
  auto norm = [](const std::vector<double>& x) {
    double q = 0.0;
    for (double v : x) q += v * v;
    return std::sqrt(q);
  };
  return {{"B_in", [tau, norm](const std::vector<double>& x) { return norm(x) <= tau; }},
          {"B_out", [tau, norm](const std::vector<double>& x) { return norm(x) > tau; }}};
}

inline Region ball_region(std::vector<double> center, double radius, std::string name) {
  return {std::move(name), [center, radius](const std::vector<double>& x) {
            double q = 0.0;
            for (std::size_t j = 0; j < center.size(); ++j) {
              double dx = x[j] - center[j];
              q += dx * dx;
            }
            return std::sqrt(q) <= radius;
          }};
}

// Axis-aligned partition of the first coordinate into equal-width bins over
// [lo, hi] (outer bins absorb the tails), forming a true partition.
inline std::vector<Region> axis_bins_partition(double lo, double hi, std::size_t bins) {
  std::vector<Region> out;
  double w = (hi - lo) / static_cast<double>(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    double a = lo + w * static_cast<double>(b);
    double bnd = lo + w * static_cast<double>(b + 1);
    bool first = b == 0, last = b + 1 == bins;
    out.push_back({"bin" + std::to_string(b),
                   [a, bnd, first, last](const std::vector<double>& x) {
                     double v = x[0];
                     bool ge = first ? true : v >= a;
                     bool lt = last ? true : v < bnd;
                     return ge && lt;
                   }});
  }
  return out;
}

// Partition of [-3,3)^k over the first k coordinates into unit-interval
// boxes (tails absorbed into the outer boxes so the regions always
// partition), used with the uniform-cube setting.
inline std::vector<Region> cube_partition_regions(std::size_t k, double lo = -3.0,
                                                  double hi = 3.0) {
  std::size_t bins = static_cast<std::size_t>(std::llround(hi - lo));
  std::vector<Region> out;
  std::vector<std::size_t> idx(k, 0);
  while (true) {
    std::string name = "box";
    std::vector<std::size_t> cur(idx);
    for (std::size_t c = 0; c < k; ++c) name += "_" + std::to_string(cur[c]);
    out.push_back({name, [cur, k, lo, bins](const std::vector<double>& x) {
                     for (std::size_t c = 0; c < k; ++c) {
                       double v = x[c] - lo;
                       long b = static_cast<long>(std::floor(v));
                       b = std::clamp(b, 0L, static_cast<long>(bins) - 1);
                       if (static_cast<std::size_t>(b) != cur[c]) return false;
                     }
                     return true;
                   }});
    std::size_t c = 0;
    while (c < k && ++idx[c] == bins) idx[c++] = 0;
    if (c == k) break;
  }
  return out;
}

struct CurvePoint {
  double center = 0.0;
  double coverage = 0.0;
  std::size_t count = 0;
  bool missing = false;
  bool one_sided = false;
};

// Coverage within balls of the given radius around each grid center
// (univariate features), pooled over trials. Fewer than min_count points in
// a ball reports the point as missing.
inline std::vector<CurvePoint> local_coverage_curve(const std::vector<TrialReport>& reports,
                                                    const std::vector<double>& centers,
                                                    double radius,
                                                    std::size_t min_count = 20) {
  std::vector<CurvePoint> out;
  for (double c : centers) {
    std::size_t total = 0, hits = 0;
    for (const auto& tr : reports)
      for (const auto& r : tr.records)
        if (std::abs(r.x[0] - c) <= radius) {
          ++total;
          hits += r.covered ? 1 : 0;
        }
    CurvePoint p;
    p.center = c;
    p.count = total;
    if (total < min_count)
      p.missing = true;
    else
      p.coverage = static_cast<double>(hits) / static_cast<double>(total);
    out.push_back(p);
  }
  return out;
}

// Sliding-window conditional coverage over one covariate: at each evaluation
// point x, the window [x - d0, x + d1) holds mass/2 of the pooled empirical
// covariate distribution on each side. At the boundary, where a side cannot
// hold the required mass, the window is one-sided and flagged.
inline std::vector<CurvePoint> sliding_window_coverage(
    const std::vector<TrialReport>& reports, std::size_t coord,
    const std::vector<double>& eval_points, double mass = 0.05) {
  if (!(mass > 0.0 && mass <= 1.0))
    throw std::invalid_argument("sliding window mass must lie in (0,1]");
  struct Obs {
    double v;
    bool covered;
  };
  std::vector<Obs> obs;
  for (const auto& tr : reports)
    for (const auto& r : tr.records) obs.push_back({r.x[coord], r.covered});
  if (obs.empty()) throw std::invalid_argument("sliding window: no records");
  std::sort(obs.begin(), obs.end(), [](const Obs& a, const Obs& b) { return a.v < b.v; });
  std::size_t n = obs.size();
  std::size_t half = static_cast<std::size_t>(
      std::llround(0.5 * mass * static_cast<double>(n)));
  half = std::max<std::size_t>(half, 1);

  std::vector<CurvePoint> out;
  for (double x : eval_points) {
    // position of x in the sorted sample
    std::size_t pos = static_cast<std::size_t>(
        std::lower_bound(obs.begin(), obs.end(), x,
                         [](const Obs& o, double v) { return o.v < v; }) -
        obs.begin());
    CurvePoint p;
    p.center = x;
    std::size_t lo, hi;  // window = sorted indices [lo, hi)
    if (pos < half) {
      lo = 0;
      hi = std::min(n, pos + half);
      p.one_sided = true;
    } else if (pos + half > n) {
      hi = n;
      lo = pos >= half ? pos - half : 0;
      p.one_sided = true;
    } else {
      lo = pos - half;
      hi = pos + half;
    }
    std::size_t hits = 0;
    for (std::size_t i = lo; i < hi; ++i) hits += obs[i].covered ? 1 : 0;
    p.count = hi - lo;
    if (p.count == 0)
      p.missing = true;
    else
      p.coverage = static_cast<double>(hits) / static_cast<double>(p.count);
    out.push_back(p);
  }
  return out;
}

struct WidthStats {
  double median = 0.0;          // +inf when most widths are infinite
  double mean_finite = 0.0;
  double fraction_infinite = 0.0;
  std::size_t count = 0;
};

inline WidthStats width_stats(const std::vector<TrialReport>& reports) {
  std::vector<double> widths;
  std::size_t infinite = 0;
  double finite_sum = 0.0;
  std::size_t finite_count = 0;
  for (const auto& tr : reports)
    for (const auto& r : tr.records) {
      widths.push_back(r.width);
      if (std::isinf(r.width)) {
        ++infinite;
      } else {
        finite_sum += r.width;
        ++finite_count;
      }
    }
  if (widths.empty()) throw std::invalid_argument("width_stats: no records");
  WidthStats ws;
  ws.count = widths.size();
  ws.median = median_of(widths);
  ws.fraction_infinite = static_cast<double>(infinite) / static_cast<double>(widths.size());
  ws.mean_finite = finite_count ? finite_sum / static_cast<double>(finite_count) : kInf;
  return ws;
}

// Accounting identity over a partition: region coverages weighted by region
// masses must recombine to the marginal coverage. Returns the absolute gap
// (exact arithmetic up to summation rounding) and throws if the regions do
// not partition the records.
inline double accounting_gap(const std::vector<TrialReport>& reports,
                             const std::vector<Region>& partition) {
  std::size_t total = 0, hits = 0;
  for (const auto& tr : reports)
    for (const auto& r : tr.records) {
      ++total;
      hits += r.covered ? 1 : 0;
      std::size_t memb = 0;
      for (const auto& reg : partition) memb += reg.contains(r.x) ? 1 : 0;
      if (memb != 1)
        throw std::invalid_argument("accounting: regions do not partition the records");
    }
  if (total == 0) throw std::invalid_argument("accounting: no records");
  double marginal = static_cast<double>(hits) / static_cast<double>(total);
  auto table = conditional_coverage(reports, partition);
  double recombined = 0.0;
  for (const auto& rc : table)
    if (!rc.missing)
      recombined += rc.coverage * static_cast<double>(rc.count) / static_cast<double>(total);
  return std::abs(recombined - marginal);
}

}  // namespace lcp
