#pragma once

#include <cmath>
#include <cstdint>

namespace lcp {

// Counter-based stream RNG. A stream is addressed by (seed, label); the same
// address reproduces the same draws regardless of what other streams were
// consumed in between, so trials and test points can be evaluated in any
// order (or in parallel) without changing results.

enum class Purpose : std::uint64_t {
  data = 1,
  pretrain = 2,
  prototype = 3,
  smoothing = 4,
  tilt = 5,
  bandwidth = 6,
  test_point = 7,
  split = 8,
  misc = 9,
};

struct StreamLabel {
  std::uint64_t trial = 0;
  std::uint64_t point = 0;
  std::uint64_t purpose = 0;

  StreamLabel() = default;
  StreamLabel(std::uint64_t t, std::uint64_t p, Purpose which)
      : trial(t), point(p), purpose(static_cast<std::uint64_t>(which)) {}
};

namespace detail {

inline constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

class RngStream {
 public:
  RngStream(std::uint64_t seed, StreamLabel label) {
    std::uint64_t h = detail::mix64(seed + detail::kGamma);
    h = detail::mix64(h ^ (label.trial + 1) * detail::kGamma);
    h = detail::mix64(h ^ (label.point + 1) * detail::kGamma);
    h = detail::mix64(h ^ (label.purpose + 1) * detail::kGamma);
    state_ = seed ^ h;
  }

  std::uint64_t next_u64() {
    state_ += detail::kGamma;
    return detail::mix64(state_);
  }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller. Stateless across calls (no cached spare),
  // so a stream's draw sequence is a pure function of the call count.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-64;
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  // Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

 private:
  std::uint64_t state_;
};

}  // namespace lcp
