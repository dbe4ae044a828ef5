#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace bridge {

/// SplitMix64 pseudorandom generator.
///
/// Fixed-increment variant of Java 8's SplittableRandom
/// (Steele, Lea, Flood, "Fast splittable pseudorandom number generators",
/// OOPSLA 2014; finalizer due to Vigna). 64 bits of state, period 2^64.
/// The integer stream is a pure function of the seed and is identical on
/// every platform, which is what makes batches and chains reproducible.
///
/// Floating-point helpers derive doubles from the integer stream with
/// explicit arithmetic (no std::*_distribution, whose output is
/// implementation-defined).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0,1), 53 random mantissa bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in (0,1]; safe as a log() argument.
  double next_double_open() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  /// Uniform in [lo, hi).
  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  /// Standard normal draw via Box-Muller. Generates pairs; the second
  /// value is cached, so one call consumes either two uniforms or none.
  double next_normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = next_double_open();
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
  }

  /// Uniform index in [0, n).
  std::uint64_t next_index(std::uint64_t n) {
    // Multiply-shift bounded draw (Lemire). Slight modulo bias is
    // irrelevant at 64-bit range vs. desk-scale n.
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

 private:
  std::uint64_t state_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

/// Deterministic child seed for stream `index` of a master seed.
/// Runs the SplitMix64 finalizer over seed and index so sibling streams
/// (per-chain, per-epoch, ...) are decorrelated but fully reproducible.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  auto mix = [](std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  return mix(seed + 0x9E3779B97F4A7C15ULL * (index + 1));
}

}  // namespace bridge
