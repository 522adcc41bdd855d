#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "lcp/core.hpp"

namespace lcp {

// Weighted empirical score distribution with an optional point mass at +inf:
// sum_i weights[i] * delta_{scores[i]} + infinity_mass * delta_{+inf}.
struct WeightedScoreDistribution {
  std::vector<double> scores;
  std::vector<double> weights;
  double infinity_mass = 0.0;

  void validate() const {
    if (scores.size() != weights.size())
      throw std::invalid_argument("wdist: score/weight length mismatch");
    double total = infinity_mass;
    for (double w : weights) {
      if (w < 0.0) throw std::invalid_argument("wdist: negative weight");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw std::invalid_argument("wdist: weights must sum to 1");
  }

  // Smallest value v (finite scores in increasing order, then +inf) whose
  // cumulative weight reaches `level`. Tied scores merge their weight.
  double quantile(double level) const {
    if (!(level > 0.0 && level < 1.0))
      throw std::invalid_argument("quantile level must lie in (0,1)");
    std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double cum = 0.0;
    std::size_t i = 0;
    while (i < n) {
      double v = scores[order[i]];
      while (i < n && scores[order[i]] == v) cum += weights[order[i++]];
      if (cum >= level) return v;
    }
    return kInf;
  }
};

// Deterministic p-value: sum_i w_i 1{s_i >= s_test} + test_weight.
inline double pvalue_deterministic(const std::vector<double>& scores,
                                   const std::vector<double>& weights,
                                   double test_weight, double s_test) {
  double p = test_weight;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (scores[i] >= s_test) p += weights[i];
  return p;
}

// Smoothed p-value: strict mass plus u times (tied mass + test atom).
inline double pvalue_smoothed(const std::vector<double>& scores,
                              const std::vector<double>& weights,
                              double test_weight, double s_test, double u) {
  double strict = 0.0, tied = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] > s_test)
      strict += weights[i];
    else if (scores[i] == s_test)
      tied += weights[i];
  }
  return strict + u * (tied + test_weight);
}

// Inverts a nonincreasing p-value function over candidate scores into the
// set {s : p(s) > alpha}. The function is evaluated at the unique
// calibration scores and at one midpoint-style probe per gap: below the
// smallest score, between consecutive unique scores, and above the largest.
// Returns a threshold with an explicit open/closed boundary; full set is
// (+inf, closed), empty set is (-inf, closed).
struct SweepResult {
  double threshold = kInf;
  bool boundary_closed = true;
};

// Sorted unique calibration scores.
inline std::vector<double> unique_sorted(const std::vector<double>& scores) {
  std::vector<double> uniq(scores);
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  return uniq;
}

// Candidate scores in increasing order: one probe below the smallest unique
// score, then each unique score interleaved with a probe above it
// (midpoints between neighbors, +1 beyond the largest). 2m+1 values; odd
// indices are the unique scores themselves.
inline std::vector<double> sweep_candidates(const std::vector<double>& uniq) {
  std::size_t m = uniq.size();
  std::vector<double> cand(2 * m + 1);
  cand[0] = uniq.empty() ? 0.0 : uniq[0] - 1.0;
  for (std::size_t j = 0; j < m; ++j) {
    cand[2 * j + 1] = uniq[j];
    cand[2 * j + 2] =
        (j + 1 < m) ? 0.5 * (uniq[j] + uniq[j + 1]) : uniq[m - 1] + 1.0;
  }
  if (m == 0) cand.assign(1, 0.0);
  return cand;
}

// Inverts p-values evaluated at sweep_candidates(uniq) (ascending order,
// p nonincreasing) into the set {s : p(s) > alpha}.
inline SweepResult invert_pvalue_candidates(const std::vector<double>& uniq,
                                            const std::vector<double>& pvals,
                                            double alpha) {
  std::size_t m = uniq.size();
  if (pvals.size() != 2 * m + 1)
    throw std::invalid_argument("invert: need 2m+1 p-values");
  std::size_t last = 2 * m + 1;  // none above alpha
  for (std::size_t i = 2 * m + 1; i-- > 0;) {
    if (pvals[i] > alpha) {
      last = i;
      break;
    }
  }
  if (last == 2 * m + 1) return {-kInf, true};  // empty set
  if (last == 2 * m) return {kInf, true};       // full set
  if (last % 2 == 1) return {uniq[last / 2], true};  // {s <= s_(j)}
  return {uniq[last / 2], false};                    // {s < s_(j)}
}

inline SweepResult threshold_from_pvalue_sweep(
    const std::vector<double>& cal_scores, double alpha,
    const std::function<double(double)>& pvalue_at) {
  std::vector<double> uniq = unique_sorted(cal_scores);
  std::vector<double> cand = sweep_candidates(uniq);
  std::vector<double> pvals(cand.size());
  for (std::size_t i = 0; i < cand.size(); ++i) pvals[i] = pvalue_at(cand[i]);
  return invert_pvalue_candidates(uniq, pvals, alpha);
}

}  // namespace lcp
