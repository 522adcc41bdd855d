#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "lcp/core.hpp"
#include "lcp/rng.hpp"

namespace lcp {

enum class KernelKind { gaussian, box, product_box, flat };

// Localization kernel H(x, x') that is a probability density in x'.
// Categorical coordinates (product_box only) contribute an indicator factor
// under counting measure; numeric normalization runs over the numeric
// coordinates only.
struct Kernel {
  KernelKind kind = KernelKind::gaussian;
  std::size_t d = 1;
  double h = 1.0;                      // gaussian/box bandwidth
  std::vector<double> hs;              // product_box per-numeric-coordinate bandwidths
  std::vector<bool> categorical;       // product_box schema, length d
  double flat_lo = 0.0, flat_hi = 1.0; // flat support per coordinate

  static Kernel gaussian_k(std::size_t d, double h) {
    check_h(h);
    Kernel k;
    k.kind = KernelKind::gaussian;
    k.d = d;
    k.h = h;
    return k;
  }

  static Kernel box_k(std::size_t d, double h) {
    check_h(h);
    Kernel k;
    k.kind = KernelKind::box;
    k.d = d;
    k.h = h;
    return k;
  }

  static Kernel product_box_k(std::vector<double> hs_numeric, std::vector<bool> cat) {
    Kernel k;
    k.kind = KernelKind::product_box;
    k.d = cat.size();
    k.categorical = std::move(cat);
    std::size_t numeric = 0;
    for (bool c : k.categorical)
      if (!c) ++numeric;
    if (hs_numeric.size() != numeric)
      throw std::invalid_argument("product_box: bandwidth count must match numeric coordinate count");
    for (double h : hs_numeric) check_h(h);
    k.hs = std::move(hs_numeric);
    return k;
  }

  static Kernel flat_k(std::size_t d, double lo, double hi) {
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
      throw std::invalid_argument("flat kernel requires bounded support lo < hi");
    Kernel k;
    k.kind = KernelKind::flat;
    k.d = d;
    k.flat_lo = lo;
    k.flat_hi = hi;
    return k;
  }

  // log H(x, x'); -inf outside support.
  double log_eval(const double* x, const double* xp) const {
    switch (kind) {
      case KernelKind::gaussian: {
        double q = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          double dx = x[j] - xp[j];
          q += dx * dx;
        }
        return -0.5 * q / (h * h) -
               0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi * h * h);
      }
      case KernelKind::box: {
        double q = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          double dx = x[j] - xp[j];
          q += dx * dx;
        }
        if (q > h * h) return -kInf;
        return -std::log(unit_ball_volume(d)) - static_cast<double>(d) * std::log(h);
      }
      case KernelKind::product_box: {
        double logc = 0.0;
        std::size_t b = 0;
        for (std::size_t j = 0; j < d; ++j) {
          if (categorical[j]) {
            if (x[j] != xp[j]) return -kInf;
          } else {
            double hj = hs[b++];
            if (std::abs(x[j] - xp[j]) > hj) return -kInf;
            logc -= std::log(2.0 * hj);
          }
        }
        return logc;
      }
      case KernelKind::flat: {
        for (std::size_t j = 0; j < d; ++j)
          if (xp[j] < flat_lo || xp[j] > flat_hi) return -kInf;
        return -static_cast<double>(d) * std::log(flat_hi - flat_lo);
      }
    }
    return -kInf;
  }

  double eval(const double* x, const double* xp) const {
    double le = log_eval(x, xp);
    return le == -kInf ? 0.0 : std::exp(le);
  }

  double eval(const std::vector<double>& x, const std::vector<double>& xp) const {
    if (x.size() != d || xp.size() != d)
      throw std::invalid_argument("kernel eval: dimension mismatch");
    return eval(x.data(), xp.data());
  }

  // Exact draw from the density H(x, .).
  std::vector<double> sample(const double* x, RngStream& rng) const {
    std::vector<double> out(d);
    switch (kind) {
      case KernelKind::gaussian:
        for (std::size_t j = 0; j < d; ++j) out[j] = x[j] + h * rng.normal();
        break;
      case KernelKind::box: {
        // direction uniform on the sphere, radius h * U^{1/d}
        double norm2 = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          out[j] = rng.normal();
          norm2 += out[j] * out[j];
        }
        double norm = std::sqrt(norm2);
        if (norm == 0.0) norm = 1.0;
        double r = h * std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
        for (std::size_t j = 0; j < d; ++j) out[j] = x[j] + r * out[j] / norm;
        break;
      }
      case KernelKind::product_box: {
        std::size_t b = 0;
        for (std::size_t j = 0; j < d; ++j) {
          if (categorical[j]) {
            out[j] = x[j];
          } else {
            double hj = hs[b++];
            out[j] = rng.uniform(x[j] - hj, x[j] + hj);
          }
        }
        break;
      }
      case KernelKind::flat:
        for (std::size_t j = 0; j < d; ++j) out[j] = rng.uniform(flat_lo, flat_hi);
        break;
    }
    return out;
  }

  std::vector<double> sample(const std::vector<double>& x, RngStream& rng) const {
    if (x.size() != d) throw std::invalid_argument("kernel sample: dimension mismatch");
    return sample(x.data(), rng);
  }

  static double unit_ball_volume(std::size_t d) {
    double df = static_cast<double>(d);
    return std::pow(std::numbers::pi, df / 2.0) / std::tgamma(df / 2.0 + 1.0);
  }

 private:
  static void check_h(double h) {
    if (!(h > 0.0) || !std::isfinite(h))
      throw std::invalid_argument("kernel bandwidth must be positive and finite");
  }
};

// Normalized weights H(X_i, anchor) / sum_j H(X_j, anchor) over the given
// centers, computed in log space. Throws AnchorIsolated when every kernel
// value is zero.
inline std::vector<double> weights_at(const Kernel& k,
                                      const std::vector<const double*>& centers,
                                      const double* anchor) {
  std::size_t n = centers.size();
  std::vector<double> logw(n);
  double mx = -kInf;
  for (std::size_t i = 0; i < n; ++i) {
    logw[i] = k.log_eval(centers[i], anchor);
    mx = std::max(mx, logw[i]);
  }
  if (mx == -kInf) throw AnchorIsolated();
  double total = 0.0;
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = logw[i] == -kInf ? 0.0 : std::exp(logw[i] - mx);
    total += w[i];
  }
  for (std::size_t i = 0; i < n; ++i) w[i] /= total;
  return w;
}

// Convenience overload: centers are the rows of ds plus x_test as the final
// center, anchored at `anchor`. Returns n+1 weights.
inline std::vector<double> weights_at(const Kernel& k, const Dataset& ds,
                                      const double* x_test, const double* anchor) {
  std::vector<const double*> centers(ds.n + 1);
  for (std::size_t i = 0; i < ds.n; ++i) centers[i] = ds.row(i);
  centers[ds.n] = x_test;
  return weights_at(k, centers, anchor);
}

}  // namespace lcp
