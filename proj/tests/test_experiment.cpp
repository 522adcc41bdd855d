#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "lcp/experiment.hpp"

using namespace lcp;

namespace {

ExperimentConfig small_config(Method m, bool smoothed, double h = 0.4) {
  ExperimentConfig cfg;
  cfg.setting.name = Setting::setting1;
  cfg.method.method = m;
  cfg.method.alpha = 0.1;
  cfg.method.smoothed = smoothed;
  if (m == Method::mrlcp) cfg.method.m = 5;
  if (m != Method::split && m != Method::wcp) cfg.kernel = Kernel::gaussian_k(1, h);
  cfg.n_pre = 200;
  cfg.n_cal = 150;
  cfg.n_test = 80;
  cfg.trials = 2;
  cfg.seed = 11;
  return cfg;
}

}  // namespace

TEST_CASE("experiments are byte-identical across reruns") {
  ExperimentConfig cfg = small_config(Method::rlcp, true);
  auto a = run_experiment(cfg);
  auto b = run_experiment(cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t t = 0; t < a.size(); ++t) {
    REQUIRE(a[t].records.size() == b[t].records.size());
    for (std::size_t i = 0; i < a[t].records.size(); ++i) {
      CHECK(a[t].records[i].threshold == b[t].records[i].threshold);
      CHECK(a[t].records[i].covered == b[t].records[i].covered);
      CHECK(a[t].records[i].pvalue == b[t].records[i].pvalue);
      CHECK(a[t].records[i].prototype == b[t].records[i].prototype);
    }
  }
}

TEST_CASE("recorded p-value at the truth agrees with set membership") {
  // the set is exactly {s : p(s) > alpha}, so coverage of the true score and
  // the recorded p-value must agree decision-for-decision
  for (Method m : {Method::split, Method::wcp, Method::baselcp, Method::callcp,
                   Method::rlcp, Method::mrlcp}) {
    for (bool sm : {false, true}) {
      ExperimentConfig cfg = small_config(m, sm);
      auto reports = run_experiment(cfg);
      for (const auto& tr : reports)
        for (const auto& r : tr.records) {
          REQUIRE(r.pvalue >= 0.0);
          CHECK(r.covered == (r.pvalue > cfg.method.alpha));
        }
    }
  }
}

TEST_CASE("distinct seeds give distinct realizations") {
  ExperimentConfig cfg = small_config(Method::split, true);
  auto a = run_experiment(cfg);
  cfg.seed = 12;
  auto b = run_experiment(cfg);
  bool any_diff = false;
  for (std::size_t i = 0; i < a[0].records.size(); ++i)
    if (a[0].records[i].x != b[0].records[i].x) any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("kernel methods require a kernel") {
  ExperimentConfig cfg = small_config(Method::rlcp, false);
  cfg.kernel.reset();
  CHECK_THROWS_AS(run_experiment(cfg), std::invalid_argument);
}

TEST_CASE("rlcp records a prototype per test point") {
  ExperimentConfig cfg = small_config(Method::rlcp, false);
  auto reports = run_experiment(cfg);
  for (const auto& r : reports[0].records) {
    REQUIRE(r.prototype.size() == 1);
    CHECK(std::isfinite(r.prototype[0]));
  }
}

TEST_CASE("split coverage is near nominal on a modest run") {
  ExperimentConfig cfg = small_config(Method::split, true);
  cfg.trials = 10;
  cfg.n_test = 200;
  CoverageEstimate e = marginal_coverage(run_experiment(cfg));
  CHECK(std::abs(e.coverage - 0.9) < 0.03);
}

TEST_CASE("deviation statistic: sane range and guard rails") {
  ExperimentConfig cfg = small_config(Method::rlcp, false);
  cfg.trials = 1;
  cfg.n_test = 10;
  DeviationResult r = deviation_D(cfg, 40);
  CHECK(r.used + r.excluded == 10);
  CHECK(r.D >= 0.0);
  CHECK(r.D < 2.0);
  CHECK_THROWS_AS(deviation_D(cfg, 10), std::invalid_argument);
  cfg.kernel.reset();
  CHECK_THROWS_AS(deviation_D(cfg, 40), std::invalid_argument);
}

TEST_CASE("deviation shrinks as the bandwidth grows") {
  ExperimentConfig narrow = small_config(Method::rlcp, false, 0.1);
  narrow.trials = 1;
  narrow.n_test = 25;
  ExperimentConfig wide = small_config(Method::rlcp, false, 3.0);
  wide.trials = 1;
  wide.n_test = 25;
  CHECK(deviation_D(wide, 60).D < deviation_D(narrow, 60).D);
}

TEST_CASE("training-conditional estimate averages to the nominal level") {
  ExperimentConfig cfg = small_config(Method::split, true);
  cfg.n_test = 1000;
  cfg.trials = 4;
  auto alphas = training_conditional_estimate(cfg);
  REQUIRE(alphas.size() == 4);
  double m = 0.0;
  for (double a : alphas) m += a;
  m /= 4.0;
  CHECK(std::abs(m - 0.1) < 0.05);
  cfg.n_test = 100;
  CHECK_THROWS_AS(training_conditional_estimate(cfg), std::invalid_argument);
}

TEST_CASE("covariate shift harness: constant tilt keeps nominal coverage") {
  ExperimentConfig cfg = small_config(Method::split, true);
  cfg.trials = 5;
  cfg.n_test = 200;
  CHECK_THROWS_AS(covariate_shift_coverage(cfg), std::invalid_argument);
  cfg.tilt = [](const double*) { return 0.7; };
  cfg.tilt_bound = 0.7;
  CoverageEstimate e = covariate_shift_coverage(cfg);
  CHECK(std::abs(e.coverage - 0.9) < 0.04);
}
