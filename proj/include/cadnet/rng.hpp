#pragma once

#include <cstdint>

namespace cadnet {

/// Deterministic counter-based generator (splitmix64). The value stream is a
/// pure function of (seed, counter): output i is mix64(seed + i * GAMMA), so
/// identical seeds give identical streams on every platform. Copying the
/// state forks the stream at the current counter.
class RngState {
 public:
  explicit RngState(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64() {
    counter_ += 1;
    std::uint64_t z = seed_ + counter_ * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform integer in [0, n), n >= 1. Multiply-shift reduction.
  std::uint64_t bounded(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  /// Uniform in [0, 1) with 24 bits of resolution (exact in float).
  float next_unit_float() {
    return static_cast<float>(next_u64() >> 40) * 0x1p-24f;
  }

  /// Uniform in [0, 1) with 53 bits of resolution (exact in double).
  double next_unit_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1p-53;
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace cadnet
