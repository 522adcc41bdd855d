#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace lcp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct AnchorIsolated : std::runtime_error {
  AnchorIsolated() : std::runtime_error("all kernel weights vanish at the anchor") {}
};

struct BandwidthDegenerate : std::runtime_error {
  explicit BandwidthDegenerate(const std::string& what) : std::runtime_error(what) {}
};

struct FitDegenerate : std::runtime_error {
  explicit FitDegenerate(const std::string& what) : std::runtime_error(what) {}
};

struct TiltDegenerate : std::runtime_error {
  explicit TiltDegenerate(const std::string& what) : std::runtime_error(what) {}
};

// Row-major feature matrix with an optional set of categorical columns.
// Categorical values are stored as doubles holding small integer codes.
struct Dataset {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> features;      // n*d, row major
  std::vector<double> response;      // length n
  std::vector<bool> categorical;     // length d, default all false

  Dataset() = default;
  Dataset(std::size_t n_, std::size_t d_)
      : n(n_), d(d_), features(n_ * d_, 0.0), response(n_, 0.0), categorical(d_, false) {}

  double* row(std::size_t i) { return features.data() + i * d; }
  const double* row(std::size_t i) const { return features.data() + i * d; }
  double& x(std::size_t i, std::size_t j) { return features[i * d + j]; }
  double x(std::size_t i, std::size_t j) const { return features[i * d + j]; }
  double& y(std::size_t i) { return response[i]; }
  double y(std::size_t i) const { return response[i]; }

  void validate() const {
    if (response.size() != n)
      throw std::invalid_argument("dataset: response length mismatch");
    if (features.size() != n * d)
      throw std::invalid_argument("dataset: feature size mismatch");
    if (!categorical.empty() && categorical.size() != d)
      throw std::invalid_argument("dataset: categorical tag length mismatch");
    for (double v : features)
      if (!std::isfinite(v)) throw std::invalid_argument("dataset: non-finite feature");
    for (double v : response)
      if (!std::isfinite(v)) throw std::invalid_argument("dataset: non-finite response");
  }
};

// Absolute-residual conformity score s(x,y) = |y - f(x)| around a fitted
// point predictor f.
struct ScoreFunction {
  std::size_t d = 0;
  std::function<double(const double*)> predict;

  double predict_at(const double* x) const { return predict(x); }

  double score(const double* x, double y) const { return std::abs(y - predict(x)); }

  double score_checked(const std::vector<double>& x, double y) const {
    if (x.size() != d) throw std::invalid_argument("score: feature dimension mismatch");
    return score(x.data(), y);
  }
};

// Prediction set in score-threshold form {y : s(x,y) <= q} (or strict when
// boundary_closed is false). threshold = +inf means the full set; an empty
// set is represented as threshold = -inf.
struct PredictionSet {
  double threshold = kInf;
  bool boundary_closed = true;
  double center = 0.0;   // fitted value at the test point (residual score)
  double alpha = 0.1;

  bool full() const { return threshold == kInf; }
  bool empty() const { return threshold == -kInf; }

  bool contains_score(double s) const {
    return boundary_closed ? s <= threshold : s < threshold;
  }

  bool contains(const ScoreFunction& sf, const double* x, double y) const {
    return contains_score(sf.score(x, y));
  }

  // Interval width for the absolute-residual score; open/closed boundary
  // does not change Lebesgue width.
  double width() const {
    if (full()) return kInf;
    if (empty()) return 0.0;
    return 2.0 * threshold;
  }

  double lower() const { return center - threshold; }
  double upper() const { return center + threshold; }
};

}  // namespace lcp
