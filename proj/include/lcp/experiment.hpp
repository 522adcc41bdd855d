#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "lcp/bandwidth.hpp"
#include "lcp/core.hpp"
#include "lcp/eval.hpp"
#include "lcp/kernel.hpp"
#include "lcp/methods.hpp"
#include "lcp/rng.hpp"
#include "lcp/simgen.hpp"
#include "lcp/stats.hpp"
#include "lcp/wdist.hpp"

namespace lcp {

enum class PredictorKind { linear, knn };

struct ExperimentConfig {
  SettingSpec setting;
  MethodConfig method;
  std::optional<Kernel> kernel;  // required except for split
  std::size_t n_pre = 2000;
  std::size_t n_cal = 2000;
  std::size_t n_test = 2000;
  std::size_t trials = 20;
  std::uint64_t seed = 1;
  PredictorKind predictor = PredictorKind::linear;
  std::size_t knn_k = 25;
  bool record_pvalue = true;

  // optional covariate tilt applied to the test draw only
  std::function<double(const double*)> tilt;
  double tilt_bound = 1.0;

  // likelihood ratio for method wcp (constant 1 when unset)
  std::function<double(const double*)> wcp_ratio;
};

inline ScoreFunction fit_predictor(const ExperimentConfig& cfg, const Dataset& pre) {
  return cfg.predictor == PredictorKind::linear ? fit_linear(pre)
                                                : fit_knn(pre, cfg.knn_k);
}

inline double pvalue_at_truth(const ExperimentConfig& cfg, const Dataset& cal,
                              const std::vector<double>& scores, const double* x,
                              double s_true, std::size_t trial, std::size_t point,
                              const std::optional<CalLcpContext>& cal_ctx);

// Runs one trial: generate pretrain/calibration/test data, fit the base
// predictor, apply the configured method to each test point, and record
// coverage, width and the p-value at the true response.
inline TrialReport run_trial(const ExperimentConfig& cfg, std::size_t trial) {
  const Kernel* k = cfg.kernel ? &*cfg.kernel : nullptr;
  if (!k && cfg.method.method != Method::split && cfg.method.method != Method::wcp)
    throw std::invalid_argument("experiment: method needs a kernel");

  RngStream pre_rng(cfg.seed, StreamLabel(trial, 0, Purpose::pretrain));
  Dataset pre = generate(cfg.setting, cfg.n_pre, pre_rng);
  RngStream cal_rng(cfg.seed, StreamLabel(trial, 1, Purpose::data));
  Dataset cal = generate(cfg.setting, cfg.n_cal, cal_rng);
  RngStream test_rng(cfg.seed, StreamLabel(trial, 2, Purpose::data));
  Dataset test = cfg.tilt
                     ? sample_tilted(cfg.setting, cfg.tilt, cfg.tilt_bound, cfg.n_test, test_rng)
                     : generate(cfg.setting, cfg.n_test, test_rng);

  ScoreFunction sf = fit_predictor(cfg, pre);
  std::vector<double> scores = calibration_scores(cal, sf);
  std::optional<CalLcpContext> cal_ctx;
  if (cfg.method.method == Method::callcp) cal_ctx.emplace(cal, scores, *k);

  auto ratio = cfg.wcp_ratio ? cfg.wcp_ratio
                             : std::function<double(const double*)>([](const double*) { return 1.0; });

  TrialReport report;
  report.trial = trial;
  report.records.reserve(cfg.n_test);

  for (std::size_t i = 0; i < cfg.n_test; ++i) {
    RngStream rng(cfg.seed, StreamLabel(trial, i, Purpose::test_point));
    const double* x = test.row(i);
    double center = sf.predict_at(x);
    double s_true = sf.score(x, test.y(i));

    TestRecord rec;
    rec.x.assign(x, x + cfg.setting.d);

    PredictionSet set;

    switch (cfg.method.method) {
      case Method::split: {
        set = split_cp(scores, cfg.method.alpha, cfg.method.smoothed, rng, center);
        break;
      }
      case Method::wcp: {
        set = weighted_cp(cal, scores, x, ratio, cfg.method.alpha, cfg.method.smoothed,
                          rng, center);
        break;
      }
      case Method::baselcp: {
        set = base_lcp(cal, scores, x, *k, cfg.method.alpha, cfg.method.smoothed, rng,
                       center);
        break;
      }
      case Method::callcp: {
        set = cal_lcp(*cal_ctx, x, *k, cfg.method.alpha, cfg.method.smoothed, rng, center);
        break;
      }
      case Method::rlcp: {
        MethodResult mr = rlcp(cal, scores, x, *k, cfg.method.alpha, cfg.method.smoothed,
                               rng, center);
        set = mr.set;
        rec.prototype = mr.prototype;
        break;
      }
      case Method::mrlcp: {
        MethodResult mr = m_rlcp(cal, scores, x, *k, cfg.method.alpha, cfg.method.m,
                                 cfg.method.smoothed, rng, center);
        set = mr.set;
        rec.prototype = mr.prototype;
        break;
      }
    }

    rec.covered = set.contains_score(s_true);
    rec.width = set.width();
    rec.threshold = set.threshold;

    if (cfg.record_pvalue)
      rec.pvalue = pvalue_at_truth(cfg, cal, scores, x, s_true, trial, i, cal_ctx);

    report.records.push_back(std::move(rec));
  }
  return report;
}

// Recomputes the method's p-value at the true test score with the exact
// same random draws (streams are addressed, so replaying the (trial, point)
// stream reproduces the prototype and smoothing draws).
inline double pvalue_at_truth(const ExperimentConfig& cfg, const Dataset& cal,
                              const std::vector<double>& scores, const double* x,
                              double s_true, std::size_t trial, std::size_t point,
                              const std::optional<CalLcpContext>& cal_ctx) {
  const Kernel* k = cfg.kernel ? &*cfg.kernel : nullptr;
  RngStream rng(cfg.seed, StreamLabel(trial, point, Purpose::test_point));
  std::size_t n = cal.n;
  auto smoothed_p = [&](const std::vector<double>& w, double tw, double u) {
    return pvalue_smoothed(scores, w, tw, s_true, u);
  };
  switch (cfg.method.method) {
    case Method::split: {
      double u = cfg.method.smoothed ? rng.uniform() : 1.0;
      std::vector<double> w(n, 1.0 / static_cast<double>(n + 1));
      return smoothed_p(w, 1.0 / static_cast<double>(n + 1), u);
    }
    case Method::wcp: {
      auto ratio = cfg.wcp_ratio
                       ? cfg.wcp_ratio
                       : std::function<double(const double*)>([](const double*) { return 1.0; });
      std::vector<double> raw(n + 1);
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        raw[i] = ratio(cal.row(i));
        total += raw[i];
      }
      raw[n] = ratio(x);
      total += raw[n];
      for (double& v : raw) v /= total;
      double u = cfg.method.smoothed ? rng.uniform() : 1.0;
      std::vector<double> w(raw.begin(), raw.begin() + n);
      return smoothed_p(w, raw[n], u);
    }
    case Method::baselcp: {
      std::vector<double> w = weights_at(*k, cal, x, x);
      double u = cfg.method.smoothed ? rng.uniform() : 1.0;
      std::vector<double> wc(w.begin(), w.begin() + n);
      return smoothed_p(wc, w[n], u);
    }
    case Method::callcp: {
      double u = cfg.method.smoothed ? rng.uniform() : 1.0;
      return cal_lcp_pvalue(*cal_ctx, x, *k, s_true, u);
    }
    case Method::rlcp: {
      std::vector<double> proto = k->sample(x, rng);
      double u = cfg.method.smoothed ? rng.uniform() : 1.0;
      try {
        std::vector<double> w = weights_at(*k, cal, x, proto.data());
        std::vector<double> wc(w.begin(), w.begin() + n);
        return smoothed_p(wc, w[n], u);
      } catch (const AnchorIsolated&) {
        return 1.0;
      }
    }
    case Method::mrlcp: {
      double pbar = 0.0;
      for (std::size_t r = 0; r < cfg.method.m; ++r) {
        std::vector<double> proto = k->sample(x, rng);
        double u = cfg.method.smoothed ? rng.uniform() : 1.0;
        double p = 1.0;
        try {
          std::vector<double> w = weights_at(*k, cal, x, proto.data());
          std::vector<double> wc(w.begin(), w.begin() + n);
          p = smoothed_p(wc, w[n], u);
        } catch (const AnchorIsolated&) {
        }
        pbar += p;
      }
      return pbar / static_cast<double>(cfg.method.m);
    }
  }
  return -1.0;
}

inline std::vector<TrialReport> run_experiment(const ExperimentConfig& cfg) {
  cfg.method.validate();
  cfg.setting.validate();
  std::vector<TrialReport> reports;
  reports.reserve(cfg.trials);
  for (std::size_t t = 0; t < cfg.trials; ++t) reports.push_back(run_trial(cfg, t));
  return reports;
}

struct DeviationResult {
  double D = 0.0;
  std::size_t excluded = 0;  // points with zero or infinite median width
  std::size_t used = 0;
};

// D(h): for fixed data and test point, variability of the deterministic
// RLCP interval width over redraws of the prototype, measured as
// MAD/median and averaged over test points and data draws.
inline DeviationResult deviation_D(const ExperimentConfig& cfg, std::size_t n_redraws = 100) {
  if (n_redraws < 30) throw std::invalid_argument("deviation_D: n_redraws >= 30");
  if (!cfg.kernel) throw std::invalid_argument("deviation_D: kernel required");
  const Kernel& k = *cfg.kernel;
  DeviationResult res;
  double total = 0.0;
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    RngStream pre_rng(cfg.seed, StreamLabel(t, 0, Purpose::pretrain));
    Dataset pre = generate(cfg.setting, cfg.n_pre, pre_rng);
    RngStream cal_rng(cfg.seed, StreamLabel(t, 1, Purpose::data));
    Dataset cal = generate(cfg.setting, cfg.n_cal, cal_rng);
    RngStream test_rng(cfg.seed, StreamLabel(t, 2, Purpose::data));
    Dataset test = generate(cfg.setting, cfg.n_test, test_rng);
    ScoreFunction sf = fit_predictor(cfg, pre);
    std::vector<double> scores = calibration_scores(cal, sf);

    for (std::size_t i = 0; i < cfg.n_test; ++i) {
      RngStream rng(cfg.seed, StreamLabel(t, i, Purpose::prototype));
      std::vector<double> widths(n_redraws);
      for (std::size_t r = 0; r < n_redraws; ++r)
        widths[r] =
            rlcp(cal, scores, test.row(i), k, cfg.method.alpha, false, rng).set.width();
      double med = median_of(widths);
      if (med <= 0.0 || std::isinf(med)) {
        ++res.excluded;
        continue;
      }
      std::vector<double> dev(n_redraws);
      for (std::size_t r = 0; r < n_redraws; ++r) dev[r] = std::abs(widths[r] - med);
      total += median_of(dev) / med;
      ++res.used;
    }
  }
  if (res.used == 0) throw std::invalid_argument("deviation_D: every point excluded");
  res.D = total / static_cast<double>(res.used);
  return res;
}

// Per-training-set miscoverage over fresh test points (one value per trial).
inline std::vector<double> training_conditional_estimate(const ExperimentConfig& cfg) {
  if (cfg.n_test < 1000)
    throw std::invalid_argument("training_conditional: need >= 1000 test points per trial");
  std::vector<double> alpha_tr;
  for (const TrialReport& tr : run_experiment(cfg)) {
    std::size_t miss = 0;
    for (const auto& r : tr.records) miss += r.covered ? 0 : 1;
    alpha_tr.push_back(static_cast<double>(miss) / static_cast<double>(tr.records.size()));
  }
  return alpha_tr;
}

inline CoverageEstimate covariate_shift_coverage(const ExperimentConfig& cfg) {
  if (!cfg.tilt) throw std::invalid_argument("covariate_shift_coverage: tilt required");
  return marginal_coverage(run_experiment(cfg));
}

}  // namespace lcp
