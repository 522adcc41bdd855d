#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace lcp {

// Regularized lower incomplete gamma P(a, x), series for x < a+1 and
// continued fraction otherwise.
inline double gamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_p: bad arguments");
  if (x == 0.0) return 0.0;
  double gln = std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a, sum = 1.0 / a, del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - gln);
  }
  // Lentz continued fraction for Q(a,x)
  double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
  for (int i = 1; i < 500; ++i) {
    double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::abs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  double q = std::exp(-x + a * std::log(x) - gln) * h;
  return 1.0 - q;
}

inline double chi2_cdf(double x, double dof) { return gamma_p(dof / 2.0, x / 2.0); }

// Median of the chi-square distribution with d degrees of freedom, by
// bisection on the CDF to 1e-10.
inline double chi2_median(std::size_t d) {
  double dof = static_cast<double>(d);
  double lo = 0.0, hi = dof + 20.0 * std::sqrt(2.0 * dof) + 20.0;
  while (chi2_cdf(hi, dof) < 0.5) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
    double mid = 0.5 * (lo + hi);
    if (chi2_cdf(mid, dof) < 0.5)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Asymptotic Kolmogorov distribution tail: P(K > x).
inline double kolmogorov_q(double x) {
  if (x <= 0.0) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    double term = 2.0 * (k % 2 == 1 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * x * x);
    sum += term;
    if (std::abs(term) < 1e-16) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

// One-sample KS test against Uniform[0,1]; returns the asymptotic p-value.
inline double ks_uniform_pvalue(std::vector<double> sample) {
  std::size_t n = sample.size();
  if (n == 0) throw std::invalid_argument("ks test: empty sample");
  std::sort(sample.begin(), sample.end());
  double dmax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double lo = static_cast<double>(i) / static_cast<double>(n);
    double hi = static_cast<double>(i + 1) / static_cast<double>(n);
    dmax = std::max({dmax, std::abs(sample[i] - lo), std::abs(sample[i] - hi)});
  }
  return kolmogorov_q(std::sqrt(static_cast<double>(n)) * dmax);
}

// Two-sample KS test; asymptotic p-value.
inline double ks_two_sample_pvalue(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks test: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double dmax = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    double fa = static_cast<double>(i) / static_cast<double>(a.size());
    double fb = static_cast<double>(j) / static_cast<double>(b.size());
    dmax = std::max(dmax, std::abs(fa - fb));
  }
  double ne = static_cast<double>(a.size()) * static_cast<double>(b.size()) /
              static_cast<double>(a.size() + b.size());
  return kolmogorov_q(std::sqrt(ne) * dmax);
}

// Chi-square goodness-of-fit p-value from observed counts and expected
// probabilities.
inline double chi2_gof_pvalue(const std::vector<double>& observed,
                              const std::vector<double>& expected_prob,
                              double total) {
  if (observed.size() != expected_prob.size() || observed.size() < 2)
    throw std::invalid_argument("chi2 gof: bad bins");
  double stat = 0.0;
  std::size_t dof = 0;
  for (std::size_t b = 0; b < observed.size(); ++b) {
    double e = expected_prob[b] * total;
    if (e < 1e-12) continue;
    double diff = observed[b] - e;
    stat += diff * diff / e;
    ++dof;
  }
  if (dof < 2) throw std::invalid_argument("chi2 gof: too few usable bins");
  return 1.0 - chi2_cdf(stat, static_cast<double>(dof - 1));
}

inline double median_of(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty vector");
  std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  std::nth_element(v.begin(), v.begin() + (mid - 1), v.begin() + mid);
  return 0.5 * (v[mid - 1] + hi);
}

}  // namespace lcp
