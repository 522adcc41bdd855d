#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "lcp/core.hpp"

using namespace lcp;

static ScoreFunction constant_predictor(std::size_t d, double value) {
  ScoreFunction sf;
  sf.d = d;
  sf.predict = [value](const double*) { return value; };
  return sf;
}

TEST_CASE("score with identity-zero predictor returns |y|") {
  ScoreFunction sf = constant_predictor(1, 0.0);
  std::vector<double> x{1.0};
  CHECK(sf.score_checked(x, 3.0) == 3.0);
}

TEST_CASE("score is zero when y equals the prediction") {
  ScoreFunction sf = constant_predictor(1, 2.5);
  std::vector<double> x{0.0};
  CHECK(sf.score_checked(x, 2.5) == 0.0);
}

TEST_CASE("score with linear predictor: hand computation") {
  ScoreFunction sf;
  sf.d = 1;
  sf.predict = [](const double* x) { return 0.5 * x[0]; };
  std::vector<double> x{2.0};
  CHECK(sf.score_checked(x, 1.7) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("score rejects dimension mismatch") {
  ScoreFunction sf = constant_predictor(2, 0.0);
  std::vector<double> x{1.0};
  CHECK_THROWS_AS(sf.score_checked(x, 0.0), std::invalid_argument);
}

TEST_CASE("prediction set with infinite threshold contains everything") {
  ScoreFunction sf = constant_predictor(1, 0.0);
  PredictionSet ps;
  ps.threshold = kInf;
  std::vector<double> x{0.0};
  CHECK(ps.contains(sf, x.data(), 1e100));
  CHECK(ps.full());
  CHECK(ps.width() == kInf);
}

TEST_CASE("prediction set with zero threshold excludes off-center points") {
  ScoreFunction sf = constant_predictor(1, 1.0);
  PredictionSet ps;
  ps.threshold = 0.0;
  ps.center = 1.0;
  std::vector<double> x{0.0};
  CHECK(ps.contains(sf, x.data(), 1.0));
  CHECK_FALSE(ps.contains(sf, x.data(), 1.0001));
}

TEST_CASE("closed boundary: score equal to threshold is contained") {
  ScoreFunction sf = constant_predictor(1, 1.0);
  PredictionSet ps;
  ps.threshold = 2.0;
  ps.center = 1.0;
  std::vector<double> x{0.0};
  CHECK(ps.contains(sf, x.data(), 3.0));
  SUBCASE("open boundary excludes the exact boundary point") {
    ps.boundary_closed = false;
    CHECK_FALSE(ps.contains(sf, x.data(), 3.0));
    CHECK(ps.contains(sf, x.data(), 2.9999));
  }
}

TEST_CASE("width geometry for the residual score") {
  PredictionSet ps;
  ps.threshold = 1.5;
  ps.center = 4.0;
  CHECK(ps.width() == 3.0);
  CHECK(ps.lower() == 2.5);
  CHECK(ps.upper() == 5.5);
  SUBCASE("empty set has zero width") {
    ps.threshold = -kInf;
    CHECK(ps.empty());
    CHECK(ps.width() == 0.0);
  }
}

TEST_CASE("dataset validation catches malformed inputs") {
  Dataset ds(3, 2);
  ds.validate();
  SUBCASE("non-finite feature") {
    ds.x(1, 0) = std::nan("");
    CHECK_THROWS_AS(ds.validate(), std::invalid_argument);
  }
  SUBCASE("response length mismatch") {
    ds.response.pop_back();
    CHECK_THROWS_AS(ds.validate(), std::invalid_argument);
  }
}
