#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "lcp/core.hpp"
#include "lcp/rng.hpp"

namespace lcp {

enum class Setting { setting1, setting2, mvsin, cube };

// Convention for the second parameter of the conditional normal law: the
// written form N(mu, v) is read as std-dev by default, with a switch to
// variance for auditability.
enum class NoiseConvention { std_dev, variance };

struct SettingSpec {
  Setting name = Setting::setting1;
  std::size_t d = 1;
  NoiseConvention convention = NoiseConvention::std_dev;

  void validate() const {
    if ((name == Setting::setting1 || name == Setting::setting2) && d != 1)
      throw std::invalid_argument("univariate settings require d=1");
    if (d < 1) throw std::invalid_argument("dimension must be >= 1");
  }

  double mu(const double* x) const {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += x[j];
    return 0.5 * s;
  }

  // conditional spread parameter as written (before convention is applied)
  double noise_param(const double* x) const {
    switch (name) {
      case Setting::setting1:
        return std::abs(std::sin(x[0]));
      case Setting::setting2: {
        double z = 2.0 * x[0] / 3.0;
        double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
        return (4.0 / 3.0) * phi;
      }
      case Setting::mvsin:
      case Setting::cube: {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += std::abs(std::sin(x[j]));
        return s;
      }
    }
    return 0.0;
  }

  double sigma(const double* x) const {
    double v = noise_param(x);
    return convention == NoiseConvention::std_dev ? v : std::sqrt(v);
  }
};

inline Dataset generate(const SettingSpec& spec, std::size_t n, RngStream& rng) {
  spec.validate();
  Dataset ds(n, spec.d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < spec.d; ++j)
      ds.x(i, j) = spec.name == Setting::cube ? rng.uniform(-3.0, 3.0) : rng.normal();
    ds.y(i) = spec.mu(ds.row(i)) + spec.sigma(ds.row(i)) * rng.normal();
  }
  return ds;
}

// Ordinary least squares with intercept via normal equations; a small
// trace-scaled ridge keeps near-collinear designs solvable.
inline ScoreFunction fit_linear(const Dataset& pre) {
  std::size_t n = pre.n, d = pre.d;
  if (n <= d) throw std::invalid_argument("fit_linear: need n > d");
  std::size_t p = d + 1;
  std::vector<double> A(p * p, 0.0), b(p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = pre.row(i);
    std::vector<double> z(p);
    z[0] = 1.0;
    for (std::size_t j = 0; j < d; ++j) z[j + 1] = xi[j];
    for (std::size_t r = 0; r < p; ++r) {
      b[r] += z[r] * pre.y(i);
      for (std::size_t c = 0; c < p; ++c) A[r * p + c] += z[r] * z[c];
    }
  }
  double trace = 0.0;
  for (std::size_t r = 0; r < p; ++r) trace += A[r * p + r];
  double ridge = 1e-10 * trace / static_cast<double>(p);
  for (std::size_t r = 0; r < p; ++r) A[r * p + r] += ridge;

  // Gaussian elimination with partial pivoting
  std::vector<double> beta(b);
  for (std::size_t col = 0; col < p; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < p; ++r)
      if (std::abs(A[r * p + col]) > std::abs(A[piv * p + col])) piv = r;
    if (std::abs(A[piv * p + col]) < 1e-14 * (trace + 1.0))
      throw FitDegenerate("fit_linear: singular normal equations");
    if (piv != col) {
      for (std::size_t c = 0; c < p; ++c) std::swap(A[piv * p + c], A[col * p + c]);
      std::swap(beta[piv], beta[col]);
    }
    for (std::size_t r = col + 1; r < p; ++r) {
      double f = A[r * p + col] / A[col * p + col];
      for (std::size_t c = col; c < p; ++c) A[r * p + c] -= f * A[col * p + c];
      beta[r] -= f * beta[col];
    }
  }
  for (std::size_t col = p; col-- > 0;) {
    for (std::size_t c = col + 1; c < p; ++c) beta[col] -= A[col * p + c] * beta[c];
    beta[col] /= A[col * p + col];
  }

  ScoreFunction sf;
  sf.d = d;
  sf.predict = [beta, d](const double* x) {
    double v = beta[0];
    for (std::size_t j = 0; j < d; ++j) v += beta[j + 1] * x[j];
    return v;
  };
  return sf;
}

// k nearest neighbors on standardized features, averaging the responses.
// Ties in distance break by index for determinism.
inline ScoreFunction fit_knn(const Dataset& pre, std::size_t k) {
  std::size_t n = pre.n, d = pre.d;
  if (k < 1 || k > n) throw std::invalid_argument("fit_knn: need 1 <= k <= n");
  std::vector<double> mean(d, 0.0), sd(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < n; ++i) mean[j] += pre.x(i, j);
    mean[j] /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      double dx = pre.x(i, j) - mean[j];
      sd[j] += dx * dx;
    }
    sd[j] = std::sqrt(sd[j] / static_cast<double>(n));
    if (sd[j] == 0.0) sd[j] = 1.0;
  }
  auto data = std::make_shared<Dataset>(pre);
  auto mu = std::make_shared<std::vector<double>>(std::move(mean));
  auto sig = std::make_shared<std::vector<double>>(std::move(sd));

  ScoreFunction sf;
  sf.d = d;
  sf.predict = [data, mu, sig, k, n, d](const double* x) {
    std::vector<std::pair<double, std::size_t>> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
      double q = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        double dx = (x[j] - data->x(i, j)) / (*sig)[j];
        q += dx * dx;
      }
      dist[i] = {q, i};
    }
    std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
    std::sort(dist.begin(), dist.begin() + k);
    double v = 0.0;
    for (std::size_t i = 0; i < k; ++i) v += data->y(dist[i].second);
    return v / static_cast<double>(k);
  };
  return sf;
}

struct OracleInterval {
  double lower = 0.0;
  double upper = 0.0;
  double width() const { return upper - lower; }
  bool contains(double y) const { return lower <= y && y <= upper; }
};

// 5th and 95th conditional percentiles: mu(x) +- 1.6449 sigma(x).
inline OracleInterval oracle_interval(const SettingSpec& spec, const double* x) {
  constexpr double z95 = 1.6449;
  double m = spec.mu(x), s = spec.sigma(x);
  return {m - z95 * s, m + z95 * s};
}

// Rejection sampling from the reweighted covariate law: accept X with
// probability g(X)/M, then draw Y from the unchanged conditional.
inline Dataset sample_tilted(const SettingSpec& spec,
                             const std::function<double(const double*)>& g, double bound,
                             std::size_t n, RngStream& rng) {
  spec.validate();
  if (!(bound > 0.0)) throw std::invalid_argument("sample_tilted: bound must be > 0");
  Dataset ds(n, spec.d);
  std::size_t accepted = 0, proposals = 0;
  std::vector<double> x(spec.d);
  while (accepted < n) {
    ++proposals;
    if (proposals >= 1000000 &&
        static_cast<double>(accepted) < 1e-4 * static_cast<double>(proposals))
      throw TiltDegenerate("acceptance rate below 1e-4");
    for (std::size_t j = 0; j < spec.d; ++j)
      x[j] = spec.name == Setting::cube ? rng.uniform(-3.0, 3.0) : rng.normal();
    double gv = g(x.data());
    if (gv < 0.0 || gv > bound * (1.0 + 1e-12))
      throw std::invalid_argument("sample_tilted: g outside [0, bound]");
    if (rng.uniform() * bound >= gv) continue;
    for (std::size_t j = 0; j < spec.d; ++j) ds.x(accepted, j) = x[j];
    ds.y(accepted) = spec.mu(x.data()) + spec.sigma(x.data()) * rng.normal();
    ++accepted;
  }
  return ds;
}

inline SettingSpec parse_setting(const std::string& s) {
  SettingSpec spec;
  if (s == "setting1") {
    spec.name = Setting::setting1;
  } else if (s == "setting2") {
    spec.name = Setting::setting2;
  } else if (s.rfind("mvsin", 0) == 0 || s.rfind("cube", 0) == 0) {
    spec.name = s.rfind("mvsin", 0) == 0 ? Setting::mvsin : Setting::cube;
    auto pos = s.find(":d=");
    if (pos == std::string::npos)
      throw std::invalid_argument("setting '" + s + "' needs :d=<dim>");
    spec.d = static_cast<std::size_t>(std::stoul(s.substr(pos + 3)));
  } else {
    throw std::invalid_argument("unknown setting '" + s + "'");
  }
  spec.validate();
  return spec;
}

}  // namespace lcp
