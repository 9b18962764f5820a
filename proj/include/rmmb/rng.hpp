// SPDX-License-Identifier: Apache-2.0
//
// Counter-based random number generation (Philox4x32-10).
//
// Every stochastic routine in this library draws from an explicitly keyed
// Philox stream. Streams are addressed by (seed, stream, substream a,
// substream b), so independent trials, users, and draws can be assigned
// disjoint streams without sharing mutable state. Draw k of a stream does
// not depend on how many draws follow it, which gives nested-seed
// reproducibility (the first N draws of a longer run equal a shorter run).

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>

namespace rmmb {

/// Philox4x32-10 block cipher based counter RNG (Salmon et al. reference
/// constants). Produces a deterministic stream of uniform 32-bit words.
class Philox {
 public:
  /// Key is the 64-bit seed; stream/substream words select an independent
  /// sequence. All four values together address one stream of 2^64 blocks.
  explicit Philox(std::uint64_t seed, std::uint32_t stream = 0,
                  std::uint32_t substream_a = 0, std::uint32_t substream_b = 0)
      : key0_(static_cast<std::uint32_t>(seed)),
        key1_(static_cast<std::uint32_t>(seed >> 32)),
        ctr1_(substream_a),
        ctr2_(substream_b),
        ctr3_(stream) {}

  /// Next uniform 32-bit word.
  std::uint32_t next_u32() {
    if (have_ == 0) {
      block(ctr0_, ctr1_, ctr2_, ctr3_, key0_, key1_, out_);
      ++ctr0_;  // 2^32 blocks per substream suffice at this scale
      have_ = 4;
    }
    return out_[4 - have_--];
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() {
    const std::uint64_t hi = next_u32();
    const std::uint64_t lo = next_u32();
    const std::uint64_t bits = ((hi << 32) | lo) >> 11;
    return static_cast<double>(bits) * 0x1.0p-53;
  }

  /// Uniform double in (0, 1]; safe as a log argument.
  double next_double_open_zero() {
    const std::uint64_t hi = next_u32();
    const std::uint64_t lo = next_u32();
    const std::uint64_t bits = ((hi << 32) | lo) >> 11;
    return static_cast<double>(bits + 1) * 0x1.0p-53;
  }

  /// Standard normal pair via Box-Muller.
  void next_gaussian_pair(double& g0, double& g1) {
    const double u1 = next_double_open_zero();
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * std::numbers::pi * u2;
    g0 = r * std::cos(th);
    g1 = r * std::sin(th);
  }

  double next_gaussian() {
    double g0 = 0.0, g1 = 0.0;
    next_gaussian_pair(g0, g1);
    return g0;
  }

  /// Circularly symmetric complex normal with unit variance,
  /// i.e. real and imaginary parts are N(0, 1/2).
  std::complex<double> next_complex_gaussian() {
    double g0 = 0.0, g1 = 0.0;
    next_gaussian_pair(g0, g1);
    return {g0 * std::numbers::sqrt2 / 2.0, g1 * std::numbers::sqrt2 / 2.0};
  }

  /// One Philox4x32-10 block; exposed for known-answer tests.
  static void block(std::uint32_t c0, std::uint32_t c1, std::uint32_t c2,
                    std::uint32_t c3, std::uint32_t k0, std::uint32_t k1,
                    std::uint32_t out[4]) {
    constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
    constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
    for (int r = 0; r < 10; ++r) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * c0;
      const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * c2;
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      c0 = hi1 ^ c1 ^ k0;
      c1 = lo1;
      c2 = hi0 ^ c3 ^ k1;
      c3 = lo0;
      k0 += kW0;
      k1 += kW1;
    }
    out[0] = c0;
    out[1] = c1;
    out[2] = c2;
    out[3] = c3;
  }

 private:
  std::uint32_t key0_, key1_;
  std::uint32_t ctr0_ = 0, ctr1_, ctr2_, ctr3_;
  std::uint32_t out_[4] = {0, 0, 0, 0};
  int have_ = 0;
};

/// Stream identifiers; keep these stable, they define the reproducible
/// layout of every random draw in the library.
enum : std::uint32_t {
  kStreamChannel = 1,
  kStreamError = 2,
  kStreamInit = 3,
  kStreamPerturb = 4,
  kStreamTrial = 5,
};

/// splitmix64-style mixer for deriving child seeds (trial seeds, paired
/// evaluation seeds) from a base seed and tags.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ull + b * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace rmmb
