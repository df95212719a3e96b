#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

// Seeded random streams with bit-exact output across standard libraries.
// The std::*_distribution adaptors are implementation-defined, so the
// uniform, normal and index draws below are written out by hand on top of
// std::mt19937_64, whose raw output sequence is fixed by the standard.

namespace reliagap::rng {

/// One SplitMix64 step.
[[nodiscard]] std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// Child seed for a path of coordinates below `base`, e.g.
/// derive_seed(base, {fold, p_index, sigma2_bits, group, column}).
/// Distinct paths give statistically independent streams.
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t base,
                                        std::initializer_list<std::uint64_t> path) noexcept;

class Stream {
 public:
  explicit Stream(std::uint64_t seed) : engine_(seed) {}

  [[nodiscard]] std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  [[nodiscard]] double uniform01();

  /// Uniform integer in [0, bound), bound > 0, by rejection (no modulo bias).
  [[nodiscard]] std::uint64_t uniform_index(std::uint64_t bound);

  /// Standard normal via Box-Muller (cosine branch only).
  [[nodiscard]] double normal();

  [[nodiscard]] bool bernoulli(double p) { return uniform01() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace reliagap::rng
