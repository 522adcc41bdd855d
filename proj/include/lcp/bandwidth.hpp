#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "lcp/core.hpp"
#include "lcp/kernel.hpp"
#include "lcp/rng.hpp"

namespace lcp {

enum class NeffVariant { plain, prototype };

struct EffSampleEstimate {
  double h = 0.0;
  double n_eff = 0.0;
  NeffVariant variant = NeffVariant::plain;
  std::size_t mc_pairs = 0;
};

// A one-parameter kernel family indexed by the bandwidth h, plus a
// standardized prototype offset: for a scale family, a draw from H(x,.) is
// x + h * offset where the offset is an h=1 draw centered at zero.
struct KernelFamily {
  std::size_t d = 1;
  std::function<Kernel(double)> make;
  std::function<std::vector<double>(RngStream&)> std_offset;

  static KernelFamily gaussian_f(std::size_t d) {
    KernelFamily f;
    f.d = d;
    f.make = [d](double h) { return Kernel::gaussian_k(d, h); };
    f.std_offset = [d](RngStream& rng) {
      std::vector<double> z(d);
      for (auto& v : z) v = rng.normal();
      return z;
    };
    return f;
  }

  static KernelFamily box_f(std::size_t d) {
    KernelFamily f;
    f.d = d;
    f.make = [d](double h) { return Kernel::box_k(d, h); };
    f.std_offset = [d](RngStream& rng) {
      std::vector<double> z(d);
      double norm2 = 0.0;
      for (auto& v : z) {
        v = rng.normal();
        norm2 += v * v;
      }
      double norm = std::sqrt(norm2);
      if (norm == 0.0) norm = 1.0;
      double r = std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
      for (auto& v : z) v = v / norm * r;
      return z;
    };
    return f;
  }

  // h scales a fixed vector of per-numeric-coordinate base bandwidths;
  // categorical coordinates keep an offset of zero (value copied verbatim).
  static KernelFamily product_box_f(std::vector<double> base_hs, std::vector<bool> cat) {
    KernelFamily f;
    f.d = cat.size();
    f.make = [base_hs, cat](double h) {
      std::vector<double> hs(base_hs);
      for (auto& v : hs) v *= h;
      return Kernel::product_box_k(hs, cat);
    };
    f.std_offset = [base_hs, cat](RngStream& rng) {
      std::vector<double> z(cat.size(), 0.0);
      std::size_t b = 0;
      for (std::size_t j = 0; j < cat.size(); ++j)
        if (!cat[j]) z[j] = base_hs[b++] * rng.uniform(-1.0, 1.0);
      return z;
    };
    return f;
  }
};

// Plug-in effective sample size estimator over a pretraining feature set,
// with common random numbers: the prototype offsets are drawn once per
// (repetition, point) in standardized form and only rescaled by h, so the
// estimate is a deterministic, h-monotone function during bisection.
class EffSampleEstimator {
 public:
  EffSampleEstimator(const Dataset& pretrain, const KernelFamily& family,
                     NeffVariant variant, std::uint64_t seed,
                     std::size_t prototype_reps = 5,
                     std::size_t max_full_pairs_n = 2000,
                     std::size_t subsample_pairs = 2000000)
      : pre_(pretrain), family_(family), variant_(variant), reps_(variant == NeffVariant::prototype ? prototype_reps : 1) {
    if (pre_.n < 2) throw std::invalid_argument("n_eff estimation needs >= 2 points");
    n_ = pre_.n;
    if (n_ <= max_full_pairs_n) {
      all_pairs_ = true;
    } else {
      all_pairs_ = false;
      RngStream rng(seed, StreamLabel(0, 0, Purpose::bandwidth));
      pair_i_.resize(subsample_pairs);
      pair_j_.resize(subsample_pairs);
      for (std::size_t t = 0; t < subsample_pairs; ++t) {
        std::size_t i = rng.uniform_index(n_);
        std::size_t j = rng.uniform_index(n_ - 1);
        if (j >= i) ++j;
        pair_i_[t] = i;
        pair_j_[t] = j;
      }
    }
    if (variant_ == NeffVariant::prototype) {
      offsets_.resize(reps_ * n_);
      for (std::size_t r = 0; r < reps_; ++r)
        for (std::size_t j = 0; j < n_; ++j) {
          RngStream rng(seed, StreamLabel(r + 1, j, Purpose::prototype));
          offsets_[r * n_ + j] = family_.std_offset(rng);
        }
    }
  }

  EffSampleEstimate estimate(double h) const {
    Kernel k = family_.make(h);
    std::size_t d = family_.d;
    double num = 0.0, den = 0.0;
    std::size_t pairs = 0;
    std::vector<double> xj(d);

    auto anchor_of = [&](std::size_t j, std::size_t r) -> const double* {
      if (variant_ == NeffVariant::plain) return pre_.row(j);
      const std::vector<double>& off = offsets_[r * n_ + j];
      for (std::size_t c = 0; c < d; ++c) xj[c] = pre_.row(j)[c] + h * off[c];
      return xj.data();
    };

    // the ratio n * E[(E H)^2] / E[H^2] is invariant to a common scaling of
    // the kernel values, so everything is computed from log values shifted by
    // the global maximum; this keeps small bandwidths in high dimension from
    // underflowing to a 0/0
    double lmax = -kInf;
    auto for_each_pair = [&](auto&& fn) {
      for (std::size_t r = 0; r < reps_; ++r) {
        if (all_pairs_) {
          for (std::size_t j = 0; j < n_; ++j) {
            const double* a = anchor_of(j, r);
            for (std::size_t i = 0; i < n_; ++i)
              if (i != j) fn(r, i, k.log_eval(pre_.row(i), a));
          }
        } else {
          for (std::size_t t = 0; t < pair_i_.size(); ++t)
            fn(r, pair_i_[t], k.log_eval(pre_.row(pair_i_[t]), anchor_of(pair_j_[t], r)));
        }
      }
    };
    for_each_pair([&](std::size_t, std::size_t, double L) { lmax = std::max(lmax, L); });
    if (lmax == -kInf)
      throw BandwidthDegenerate("effective sample size denominator is zero at h=" +
                                std::to_string(h));

    std::vector<double> sum_i(n_, 0.0);
    std::vector<std::size_t> cnt_i(n_, 0);
    std::size_t rep_mark = 0;
    auto flush_rep = [&]() {
      std::size_t used = 0;
      double rep_num = 0.0;
      for (std::size_t i = 0; i < n_; ++i) {
        if (cnt_i[i] == 0) continue;
        double m = sum_i[i] / static_cast<double>(cnt_i[i]);
        rep_num += m * m;
        ++used;
        sum_i[i] = 0.0;
        cnt_i[i] = 0;
      }
      num += rep_num * static_cast<double>(n_) / static_cast<double>(used);
    };
    for_each_pair([&](std::size_t r, std::size_t i, double L) {
      if (r != rep_mark) {
        flush_rep();
        rep_mark = r;
      }
      double v = std::exp(L - lmax);
      sum_i[i] += v;
      ++cnt_i[i];
      den += v * v;
      ++pairs;
    });
    flush_rep();

    double num_mean = num / static_cast<double>(reps_ * n_);
    double den_mean = den / static_cast<double>(pairs);
    if (den_mean <= 0.0)
      throw BandwidthDegenerate("effective sample size denominator is zero at h=" +
                                std::to_string(h));
    EffSampleEstimate e;
    e.h = h;
    e.variant = variant_;
    e.mc_pairs = pairs;
    e.n_eff = static_cast<double>(n_) * num_mean / den_mean;
    return e;
  }

  std::size_t n() const { return n_; }

 private:
  const Dataset& pre_;
  KernelFamily family_;
  NeffVariant variant_;
  std::size_t reps_;
  std::size_t n_ = 0;
  bool all_pairs_ = true;
  std::vector<std::size_t> pair_i_, pair_j_;
  std::vector<std::vector<double>> offsets_;
};

inline EffSampleEstimate estimate_n_eff(const Dataset& pretrain, const KernelFamily& family,
                                        double h, NeffVariant variant, std::uint64_t seed,
                                        std::size_t prototype_reps = 5) {
  EffSampleEstimator est(pretrain, family, variant, seed, prototype_reps);
  return est.estimate(h);
}

inline double data_diameter(const Dataset& ds) {
  double diam = 0.0;
  for (std::size_t j = 0; j < ds.d; ++j) {
    double lo = kInf, hi = -kInf;
    for (std::size_t i = 0; i < ds.n; ++i) {
      lo = std::min(lo, ds.x(i, j));
      hi = std::max(hi, ds.x(i, j));
    }
    diam += (hi - lo) * (hi - lo);
  }
  return std::sqrt(diam);
}

// Bisection on h targeting n_eff(h) = target under common random numbers.
// Monotonicity is checked on the bracket endpoints before solving.
inline double solve_bandwidth(const Dataset& pretrain, const KernelFamily& family,
                              double target, NeffVariant variant, std::uint64_t seed,
                              double h_lo = 0.0, double h_hi = 0.0,
                              std::size_t prototype_reps = 5) {
  if (!(target > 1.0) || target >= static_cast<double>(pretrain.n) + 0.5)
    throw std::invalid_argument("solve_bandwidth: target must lie in (1, n)");
  double diam = data_diameter(pretrain);
  if (h_lo <= 0.0) h_lo = 1e-3 * diam;
  if (h_hi <= 0.0) h_hi = diam;

  EffSampleEstimator est(pretrain, family, variant, seed, prototype_reps);
  double f_lo = est.estimate(h_lo).n_eff;
  double f_hi = est.estimate(h_hi).n_eff;
  if (f_lo > f_hi)
    throw BandwidthDegenerate("n_eff is not nondecreasing on the bracket");
  if (target < f_lo - 1.0 || target > f_hi + 1.0)
    throw BandwidthDegenerate("target n_eff unreachable within bracket [" +
                              std::to_string(h_lo) + ", " + std::to_string(h_hi) + "]");
  target = std::clamp(target, f_lo, f_hi);

  double width_tol = 1e-4 * h_hi;
  double lo = h_lo, hi = h_hi;
  for (int it = 0; it < 200 && hi - lo > width_tol; ++it) {
    double mid = 0.5 * (lo + hi);
    double f = est.estimate(mid).n_eff;
    if (std::abs(f - target) <= 1.0) return mid;
    if (f < target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace lcp
