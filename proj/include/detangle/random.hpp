#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace detangle {

/// Seeded generator with platform-independent derived draws. Only the raw
/// 64-bit engine output is used; uniform and normal variates are computed
/// here so streams do not depend on the standard library's distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Uniform integer in [0, n). n must be positive.
  std::size_t index(std::size_t n);
  /// Standard normal via Box-Muller; the second variate of each pair is kept.
  double normal();

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);
/// Per-stage seed: the tag is hashed (FNV-1a) and mixed into the global seed.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

}  // namespace detangle
