#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "lcp/core.hpp"
#include "lcp/kernel.hpp"
#include "lcp/rng.hpp"
#include "lcp/wdist.hpp"

namespace lcp {

enum class Method { split, wcp, baselcp, callcp, rlcp, mrlcp };

struct MethodConfig {
  Method method = Method::split;
  double alpha = 0.1;
  bool smoothed = false;
  std::size_t m = 1;  // mrlcp replicate count

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0))
      throw std::invalid_argument("alpha must lie in (0,1)");
    if (m < 1) throw std::invalid_argument("mrlcp needs m >= 1");
  }
};

struct MethodResult {
  PredictionSet set;
  std::vector<double> prototype;  // rlcp / mrlcp (first replicate)
  double u = 1.0;                 // smoothing draw, 1 when deterministic
  double pvalue_truth = -1.0;     // filled by the harness when y is known
};

inline std::vector<double> calibration_scores(const Dataset& cal, const ScoreFunction& sf) {
  std::vector<double> s(cal.n);
  for (std::size_t i = 0; i < cal.n; ++i) s[i] = sf.score(cal.row(i), cal.y(i));
  return s;
}

// Calibration scores grouped by unique value, shared across test points of a
// trial. sorted_idx holds calibration indices in nondecreasing score order;
// group g covers sorted_idx[group_off[g] .. group_off[g+1]).
struct ScoreOrder {
  std::vector<double> uniq;
  std::vector<std::size_t> sorted_idx;
  std::vector<std::size_t> group_off;

  explicit ScoreOrder(const std::vector<double>& scores) {
    std::size_t n = scores.size();
    sorted_idx.resize(n);
    for (std::size_t i = 0; i < n; ++i) sorted_idx[i] = i;
    std::sort(sorted_idx.begin(), sorted_idx.end(), [&](std::size_t a, std::size_t b) {
      return scores[a] < scores[b];
    });
    group_off.push_back(0);
    for (std::size_t i = 0; i < n;) {
      double v = scores[sorted_idx[i]];
      uniq.push_back(v);
      while (i < n && scores[sorted_idx[i]] == v) ++i;
      group_off.push_back(i);
    }
  }
};

// p-values of a weighted method (uniform, WCP, baseLCP or RLCP weights) at
// every sweep candidate, using the grouped score order. weights[i] pairs
// with calibration point i; u = 1 gives the deterministic form.
inline std::vector<double> weighted_pvalues_at_candidates(
    const ScoreOrder& order, const std::vector<double>& weights,
    double test_weight, double u) {
  std::size_t m = order.uniq.size();
  std::vector<double> group_w(m, 0.0);
  for (std::size_t g = 0; g < m; ++g)
    for (std::size_t i = order.group_off[g]; i < order.group_off[g + 1]; ++i)
      group_w[g] += weights[order.sorted_idx[i]];

  // suffix[g] = total weight of groups >= g
  std::vector<double> suffix(m + 1, 0.0);
  for (std::size_t g = m; g-- > 0;) suffix[g] = suffix[g + 1] + group_w[g];

  std::vector<double> p(2 * m + 1);
  p[0] = suffix[0] + u * test_weight;  // below every score: all mass strict
  for (std::size_t g = 0; g < m; ++g) {
    p[2 * g + 1] = suffix[g + 1] + u * (group_w[g] + test_weight);  // at s_(g)
    p[2 * g + 2] = suffix[g + 1] + u * test_weight;                 // above s_(g)
  }
  if (m == 0) p.assign(1, u * test_weight);
  return p;
}

inline PredictionSet make_set(SweepResult r, double center, double alpha) {
  PredictionSet ps;
  ps.threshold = r.threshold;
  ps.boundary_closed = r.boundary_closed;
  ps.center = center;
  ps.alpha = alpha;
  return ps;
}

// Shared core of the weighted methods: invert the p-value function built
// from the given normalized weights (n calibration weights + test atom).
inline PredictionSet weighted_threshold(const ScoreOrder& order,
                                        const std::vector<double>& weights,
                                        double test_weight, double alpha,
                                        double u, double center) {
  std::vector<double> p =
      weighted_pvalues_at_candidates(order, weights, test_weight, u);
  return make_set(invert_pvalue_candidates(order.uniq, p, alpha), center, alpha);
}

// ---- split CP ----

inline PredictionSet split_cp(const std::vector<double>& cal_scores, double alpha,
                              bool smoothed, RngStream& rng, double center = 0.0) {
  std::size_t n = cal_scores.size();
  if (n < 1) throw std::invalid_argument("split_cp: empty calibration set");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("alpha must lie in (0,1)");
  if (!smoothed) {
    // ceil((1-alpha)(n+1))-th smallest score, +inf when the index exceeds n
    double target = (1.0 - alpha) * static_cast<double>(n + 1);
    std::size_t k = static_cast<std::size_t>(std::ceil(target - 1e-12));
    PredictionSet ps;
    ps.center = center;
    ps.alpha = alpha;
    if (k > n) {
      ps.threshold = kInf;
      return ps;
    }
    std::vector<double> s(cal_scores);
    std::nth_element(s.begin(), s.begin() + (k - 1), s.end());
    ps.threshold = s[k - 1];
    return ps;
  }
  double u = rng.uniform();
  ScoreOrder order(cal_scores);
  std::size_t n1 = n + 1;
  std::vector<double> w(n, 1.0 / static_cast<double>(n1));
  return weighted_threshold(order, w, 1.0 / static_cast<double>(n1), alpha, u,
                            center);
}

// ---- weighted CP (covariate-shift weights from a likelihood ratio) ----

inline PredictionSet weighted_cp(const Dataset& cal, const std::vector<double>& cal_scores,
                                 const double* x_test,
                                 const std::function<double(const double*)>& ratio,
                                 double alpha, bool smoothed, RngStream& rng,
                                 double center = 0.0) {
  std::size_t n = cal.n;
  std::vector<double> raw(n + 1);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    raw[i] = ratio(cal.row(i));
    if (raw[i] < 0.0) throw std::invalid_argument("weighted_cp: negative ratio");
    total += raw[i];
  }
  raw[n] = ratio(x_test);
  if (raw[n] < 0.0) throw std::invalid_argument("weighted_cp: negative ratio");
  total += raw[n];
  if (total <= 0.0) throw AnchorIsolated();
  for (double& v : raw) v /= total;

  double u = smoothed ? rng.uniform() : 1.0;
  ScoreOrder order(cal_scores);
  std::vector<double> w(raw.begin(), raw.begin() + n);
  return weighted_threshold(order, w, raw[n], alpha, u, center);
}

// ---- baseLCP ----

inline PredictionSet base_lcp(const Dataset& cal, const std::vector<double>& cal_scores,
                              const double* x_test, const Kernel& k, double alpha,
                              bool smoothed, RngStream& rng, double center = 0.0) {
  std::vector<double> w = weights_at(k, cal, x_test, x_test);
  double u = smoothed ? rng.uniform() : 1.0;
  ScoreOrder order(cal_scores);
  std::vector<double> wcal(w.begin(), w.begin() + cal.n);
  return weighted_threshold(order, wcal, w[cal.n], alpha, u, center);
}

// ---- RLCP ----

inline MethodResult rlcp(const Dataset& cal, const std::vector<double>& cal_scores,
                         const double* x_test, const Kernel& k, double alpha,
                         bool smoothed, RngStream& rng, double center = 0.0) {
  MethodResult out;
  out.prototype = k.sample(x_test, rng);
  out.u = smoothed ? rng.uniform() : 1.0;
  ScoreOrder order(cal_scores);
  try {
    std::vector<double> w = weights_at(k, cal, x_test, out.prototype.data());
    std::vector<double> wcal(w.begin(), w.begin() + cal.n);
    out.set = weighted_threshold(order, wcal, w[cal.n], alpha, out.u, center);
  } catch (const AnchorIsolated&) {
    // no calibration mass near the prototype: the +inf atom carries all weight
    out.set.threshold = kInf;
    out.set.center = center;
    out.set.alpha = alpha;
  }
  return out;
}

// ---- m-RLCP: average of m per-prototype p-value functions ----

inline MethodResult m_rlcp(const Dataset& cal, const std::vector<double>& cal_scores,
                           const double* x_test, const Kernel& k, double alpha,
                           std::size_t m, bool smoothed, RngStream& rng,
                           double center = 0.0) {
  if (m < 1) throw std::invalid_argument("m_rlcp: m >= 1 required");
  ScoreOrder order(cal_scores);
  std::size_t nc = 2 * order.uniq.size() + 1;
  std::vector<double> pbar(nc, 0.0);
  MethodResult out;
  for (std::size_t r = 0; r < m; ++r) {
    std::vector<double> proto = k.sample(x_test, rng);
    double u = smoothed ? rng.uniform() : 1.0;
    if (r == 0) {
      out.prototype = proto;
      out.u = u;
    }
    std::vector<double> p(nc, 1.0);  // isolated prototype: p identically 1
    try {
      std::vector<double> w = weights_at(k, cal, x_test, proto.data());
      std::vector<double> wcal(w.begin(), w.begin() + cal.n);
      p = weighted_pvalues_at_candidates(order, wcal, w[cal.n], u);
    } catch (const AnchorIsolated&) {
    }
    for (std::size_t i = 0; i < nc; ++i) pbar[i] += p[i];
  }
  for (double& v : pbar) v /= static_cast<double>(m);
  out.set = make_set(invert_pvalue_candidates(order.uniq, pbar, alpha), center, alpha);
  return out;
}

// ---- calLCP ----

namespace detail {

// Fenwick tree over compressed value indices, counting multiset membership.
class Fenwick {
 public:
  explicit Fenwick(std::size_t n) : tree_(n + 1, 0) {}
  void add(std::size_t i, int delta) {
    for (++i; i < tree_.size(); i += i & (~i + 1)) tree_[i] += delta;
  }
  // count of entries with index <= i
  int prefix(std::size_t i) const {
    int s = 0;
    for (++i; i > 0; i -= i & (~i + 1)) s += tree_[i];
    return s;
  }

 private:
  std::vector<int> tree_;
};

}  // namespace detail

// Per-trial precomputation for calLCP. The anchor-i row sums over the n
// calibration points do not involve the test point, so they are shared by
// every test point of the trial. C[i] = sum_j H(X_j, X_i) and
// B[i] = sum_j H(X_j, X_i) 1{s_j < s_i}.
struct CalLcpContext {
  const Dataset* cal = nullptr;
  std::vector<double> scores;
  std::vector<double> C;
  std::vector<double> B;
  ScoreOrder order;

  CalLcpContext(const Dataset& cal_, const std::vector<double>& cal_scores,
                const Kernel& k)
      : cal(&cal_), scores(cal_scores), order(cal_scores) {
    std::size_t n = cal_.n;
    C.assign(n, 0.0);
    B.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* xi = cal_.row(i);
      double c = 0.0, b = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        double v = k.eval(cal_.row(j), xi);
        c += v;
        if (scores[j] < scores[i]) b += v;
      }
      C[i] = c;
      B[i] = b;
    }
  }
};

inline PredictionSet cal_lcp(const CalLcpContext& ctx, const double* x_test,
                             const Kernel& k, double alpha, bool smoothed,
                             RngStream& rng, double center = 0.0) {
  const Dataset& cal = *ctx.cal;
  std::size_t n = cal.n;
  double u = smoothed ? rng.uniform() : 1.0;

  // kernel values anchored at the test point (for T_{n+1}) and at each
  // calibration point (the test point's column in the weight matrix)
  std::vector<double> g(n), hv(n);
  double g_self = k.eval(x_test, x_test);
  double r_test = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    g[j] = k.eval(cal.row(j), x_test);
    r_test += g[j];
  }
  r_test += g_self;
  for (std::size_t i = 0; i < n; ++i) hv[i] = k.eval(x_test, cal.row(i));

  // T_i as a function of the candidate score s takes just two values:
  // T1 while s < s_i, T0 once s >= s_i.
  std::vector<double> T0(n), T1(n);
  for (std::size_t i = 0; i < n; ++i) {
    double r = ctx.C[i] + hv[i];
    T0[i] = ctx.B[i] / r;
    T1[i] = (ctx.B[i] + hv[i]) / r;
  }

  // T_{n+1}(s): prefix of g over scores strictly below s, in group order so
  // that equal-kernel sums reproduce the same rounding as the anchor sums
  std::size_t m = ctx.order.uniq.size();
  std::vector<double> tn(m + 1, 0.0);  // tn[g] = T_{n+1} with first g groups below s
  {
    double acc = 0.0;
    for (std::size_t gi = 0; gi < m; ++gi) {
      tn[gi] = acc / r_test;
      for (std::size_t i = ctx.order.group_off[gi]; i < ctx.order.group_off[gi + 1]; ++i)
        acc += g[ctx.order.sorted_idx[i]];
    }
    tn[m] = acc / r_test;
  }

  // value compression over every T the sweep can compare
  std::vector<double> vals;
  vals.reserve(2 * n + m + 1);
  vals.insert(vals.end(), T0.begin(), T0.end());
  vals.insert(vals.end(), T1.begin(), T1.end());
  vals.insert(vals.end(), tn.begin(), tn.end());
  std::sort(vals.begin(), vals.end());
  vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
  auto idx_of = [&](double v) {
    return static_cast<std::size_t>(
        std::lower_bound(vals.begin(), vals.end(), v) - vals.begin());
  };

  detail::Fenwick fen(vals.size());
  for (std::size_t i = 0; i < n; ++i) fen.add(idx_of(T1[i]), 1);

  double inv = 1.0 / static_cast<double>(n + 1);
  auto pvalue = [&](double t) {
    std::size_t ti = idx_of(t);
    int le = fen.prefix(ti);
    int lt = ti == 0 ? 0 : fen.prefix(ti - 1);
    int gt = static_cast<int>(n) - le;
    int eq = le - lt;
    return inv * (static_cast<double>(gt) + u * (static_cast<double>(eq) + 1.0));
  };

  // ascending candidate sweep: probe below group 0, then each unique score
  // followed by a probe above it; crossing a score migrates its group T1->T0
  std::vector<double> p(2 * m + 1);
  p[0] = pvalue(tn[0]);
  for (std::size_t gi = 0; gi < m; ++gi) {
    for (std::size_t i = ctx.order.group_off[gi]; i < ctx.order.group_off[gi + 1]; ++i) {
      std::size_t j = ctx.order.sorted_idx[i];
      fen.add(idx_of(T1[j]), -1);
      fen.add(idx_of(T0[j]), 1);
    }
    p[2 * gi + 1] = pvalue(tn[gi]);      // s = s_(gi): strict prefix excludes the group
    p[2 * gi + 2] = pvalue(tn[gi + 1]);  // s just above s_(gi)
  }
  if (m == 0) p.assign(1, inv * u);

  return make_set(invert_pvalue_candidates(ctx.order.uniq, p, alpha), center, alpha);
}

// calLCP p-value at one score (used to record p at the true response);
// mirrors the sweep arithmetic exactly, including summation order.
inline double cal_lcp_pvalue(const CalLcpContext& ctx, const double* x_test,
                             const Kernel& k, double s, double u) {
  const Dataset& cal = *ctx.cal;
  std::size_t n = cal.n;
  double g_self = k.eval(x_test, x_test);
  double r_test = 0.0;
  std::vector<double> g(n);
  for (std::size_t j = 0; j < n; ++j) {
    g[j] = k.eval(cal.row(j), x_test);
    r_test += g[j];
  }
  r_test += g_self;
  double acc = 0.0;
  for (std::size_t gi = 0; gi < ctx.order.uniq.size() && ctx.order.uniq[gi] < s; ++gi)
    for (std::size_t i = ctx.order.group_off[gi]; i < ctx.order.group_off[gi + 1]; ++i)
      acc += g[ctx.order.sorted_idx[i]];
  double t_test = acc / r_test;

  std::size_t gt = 0, eq = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double hv = k.eval(x_test, cal.row(i));
    double r = ctx.C[i] + hv;
    double ti = (s < ctx.scores[i]) ? (ctx.B[i] + hv) / r : ctx.B[i] / r;
    if (ti > t_test)
      ++gt;
    else if (ti == t_test)
      ++eq;
  }
  double inv = 1.0 / static_cast<double>(n + 1);
  return inv * (static_cast<double>(gt) + u * (static_cast<double>(eq) + 1.0));
}

inline PredictionSet cal_lcp(const Dataset& cal, const std::vector<double>& cal_scores,
                             const double* x_test, const Kernel& k, double alpha,
                             bool smoothed, RngStream& rng, double center = 0.0) {
  CalLcpContext ctx(cal, cal_scores, k);
  return cal_lcp(ctx, x_test, k, alpha, smoothed, rng, center);
}

}  // namespace lcp
