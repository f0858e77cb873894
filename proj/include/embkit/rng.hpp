#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "embkit/errors.hpp"

namespace embkit {

// mix64 is the SplitMix64 output function (Steele, Lea & Flood, "Fast
// Splittable Pseudorandom Number Generators"): add the 64-bit golden gamma,
// then finalize. It doubles as the seed-derivation hash below. The exact
// constants are documented in README.md so that plans and datasets can be
// reproduced outside this codebase.
inline constexpr std::uint64_t mix64(std::uint64_t x) {
  std::uint64_t z = x + 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// SplitMix64 sequence generator. The single source of randomness in embkit:
// sampling, fold shuffles, synthetic data, parameter init and dropout masks
// all draw from seeded instances of this class, never from global entropy.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform integer in [0, bound), bitmask rejection (no modulo bias).
  std::uint64_t bounded(std::uint64_t bound) {
    if (bound == 0) throw ArgumentError("SplitMix64::bounded: bound must be >= 1");
    if (bound == 1) return 0;
    const std::uint64_t mask = ~0ULL >> std::countl_zero(bound - 1);
    for (;;) {
      const std::uint64_t r = next_u64() & mask;
      if (r < bound) return r;
    }
  }

  // Uniform double in [0, 1): top 53 bits scaled by 2^-53.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal, Box-Muller. u1 lands in (0, 1] so log(u1) is finite.
  double normal() {
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Fisher-Yates, descending index, using bounded() draws.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(bounded(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

// Child-seed derivation: fold each tag into the running hash. Each consumer
// (class sampler, fold shuffle, epoch shuffle, dropout mask, ...) gets its
// own stream keyed by a fixed tag plus indices, so streams never collide.
inline constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return mix64(seed ^ mix64(tag));
}
inline constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag,
                                           std::uint64_t a) {
  return mix64(derive_seed(seed, tag) ^ mix64(a));
}
inline constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag,
                                           std::uint64_t a, std::uint64_t b) {
  return mix64(derive_seed(seed, tag, a) ^ mix64(b));
}

// Stream tags (ASCII). Values are part of the reproducibility contract.
namespace seed_tag {
inline constexpr std::uint64_t kClassSample = 0x73616D70ULL;   // "samp"
inline constexpr std::uint64_t kFoldShuffle = 0x666F6C64ULL;   // "fold"
inline constexpr std::uint64_t kSynthClass = 0x73796E63ULL;    // "sync"
inline constexpr std::uint64_t kEncoderInit = 0x65696E69ULL;   // "eini"
inline constexpr std::uint64_t kHeadInit = 0x68696E69ULL;      // "hini"
inline constexpr std::uint64_t kEpochShuffle = 0x65706F63ULL;  // "epoc"
inline constexpr std::uint64_t kDropout = 0x64726F70ULL;       // "drop"
inline constexpr std::uint64_t kFlipView = 0x666C6970ULL;      // "flip"
inline constexpr std::uint64_t kBench = 0x62656E63ULL;         // "benc"
}  // namespace seed_tag

}  // namespace embkit
