#pragma once

#include <cstdint>
#include <random>

namespace cubenmt {

// Deterministic RNG wrapper. Draws go through fixed integer-to-real mappings
// instead of std distributions, so the same seed yields the same stream on
// every platform.
class Rng {
 public:
  explicit Rng(uint32_t seed) : gen_(seed) {}

  // Uniform in [lo, hi) on a 24-bit grid.
  float uniform(float lo, float hi) {
    uint32_t r = gen_() >> 8;
    return lo + (hi - lo) * (static_cast<float>(r) * (1.0f / 16777216.0f));
  }

  // Uniform integer in [0, n).
  int below(int n) { return static_cast<int>(gen_() % static_cast<uint32_t>(n)); }

  uint32_t raw() { return gen_(); }

 private:
  std::mt19937 gen_;
};

}  // namespace cubenmt
