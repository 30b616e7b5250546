#pragma once

#include <cmath>
#include <cstdint>

namespace dsgda {

// Counter-based keyed random stream. Every word is a pure function of
// (seed, stream, step, slot), so coupled trajectories can replay the exact
// draw sequence and independent components never share a stream.
namespace rng {

// Domain-separation tags for the `stream` argument (high bits).
enum Stream : std::uint64_t {
  kSampling = std::uint64_t{1} << 56,   // per-iteration sample index draws
  kShuffle = std::uint64_t{2} << 56,    // dataset shuffles / partitioning
  kSynthesis = std::uint64_t{3} << 56,  // synthetic data generation
  kProbe = std::uint64_t{4} << 56,      // audit / probe point generation
  kReplacement = std::uint64_t{5} << 56 // neighbor-perturbation draws
};

inline constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

inline constexpr std::uint64_t scramble(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

inline constexpr std::uint64_t word(std::uint64_t seed, std::uint64_t stream,
                                    std::uint64_t step, std::uint64_t slot = 0) {
  std::uint64_t h = scramble(seed + kGamma);
  h = scramble(h ^ (stream + 2 * kGamma));
  h = scramble(h ^ (step + 3 * kGamma));
  h = scramble(h ^ (slot + 5 * kGamma));
  return h;
}

// Uniform over [0, n) via 128-bit multiply-shift; bias is O(n / 2^64).
inline std::uint64_t index(std::uint64_t seed, std::uint64_t stream,
                           std::uint64_t step, std::uint64_t n, std::uint64_t slot = 0) {
  const std::uint64_t w = word(seed, stream, step, slot);
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(w) * n) >> 64);
}

// Uniform double in [0, 1) with 53 random mantissa bits.
inline double u01(std::uint64_t seed, std::uint64_t stream, std::uint64_t step,
                  std::uint64_t slot = 0) {
  return static_cast<double>(word(seed, stream, step, slot) >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller on two dedicated slots.
inline double normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t step,
                     std::uint64_t slot = 0) {
  const double u1 = u01(seed, stream, step, 2 * slot);
  const double u2 = u01(seed, stream, step, 2 * slot + 1);
  const double r = std::sqrt(-2.0 * std::log1p(-u1));
  return r * std::cos(6.283185307179586476925286766559 * u2);
}

// Symmetric rejection keeps the mean exact while bounding the support,
// so per-sample Lipschitz constants stay finite.
inline double normal_truncated(std::uint64_t seed, std::uint64_t stream,
                               std::uint64_t step, std::uint64_t slot, double max_abs) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    const double z = normal(seed, stream, step, slot + (attempt << 32));
    if (std::fabs(z) <= max_abs) return z;
  }
}

}  // namespace rng
}  // namespace dsgda
