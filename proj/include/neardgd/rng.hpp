#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

#include "neardgd/errors.hpp"

namespace neardgd {

// Deterministic random source for problem generation.
//
// std::mt19937_64 emits an identical integer stream on every conforming
// implementation, but the standard <random> distributions are allowed to
// differ between standard libraries. Every real-valued draw here is derived
// from the raw 64-bit stream with explicit IEEE-754 arithmetic only, so
// generated data is bit-identical across compilers and platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    if (!(lo <= hi)) throw InvalidParameterError("uniform: lo must be <= hi");
    return lo + (hi - lo) * uniform01();
  }

  // Unbiased integer on [lo, hi] via rejection sampling.
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi) {
    if (lo > hi) throw InvalidParameterError("uniform_int: lo must be <= hi");
    const std::uint64_t range = hi - lo + 1;
    if (range == 0) return next_u64();  // full 64-bit range
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() -
        std::numeric_limits<std::uint64_t>::max() % range;
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return lo + v % range;
  }

  // Log-uniform on [lo, hi]: lo * (hi/lo)^u with u a dyadic uniform on [0,1).
  //
  // The power is evaluated as a product of repeated square roots of hi/lo,
  // one factor per set bit of the 53-bit exponent numerator. sqrt and * are
  // correctly rounded everywhere, unlike libm exp/log, so the result is
  // bit-portable. Consumes exactly one engine draw.
  double log_uniform(double lo, double hi) {
    if (!(lo > 0.0) || !(hi >= lo))
      throw InvalidParameterError("log_uniform: need 0 < lo <= hi");
    const std::uint64_t m = next_u64() >> 11;
    if (hi == lo) return lo;
    const double ratio = hi / lo;
    double acc = 1.0;
    double ladder = std::sqrt(ratio);  // ratio^(2^-1)
    for (int j = 1; j <= 53; ++j) {
      if ((m >> (53 - j)) & 1u) acc *= ladder;
      ladder = std::sqrt(ladder);
    }
    return lo * acc;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace neardgd
