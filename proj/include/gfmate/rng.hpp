#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <utility>

namespace gfmate {

/// SplitMix64 (Steele, Lea & Flood 2014): 64-bit state, golden-ratio
/// increment, variant-13 output mix. `split()` derives an independent child
/// stream, so every worker can own a generator derived from one master seed.
///
/// All distributions below are implemented here rather than taken from
/// <random>, whose distribution algorithms differ between standard libraries
/// and would break cross-platform replay.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept { return next(); }

  std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  Rng split() noexcept { return Rng(next() ^ 0x6A09E667F3BCC909ULL); }

  /// Stream for (master seed, index) pairs; used to hand out per-seed streams.
  static Rng derive(std::uint64_t master, std::uint64_t index) noexcept {
    Rng r(master);
    r.state_ ^= index * 0xD1B54A32D192ED03ULL;
    r.next();
    return r;
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept {
    return lo + (hi - lo) * uniform();
  }

  /// Unbiased integer in [0, bound) via rejection. bound must be > 0.
  std::uint64_t below(std::uint64_t bound) noexcept {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % bound;
    }
  }

  /// Standard normal via Box-Muller (cosine branch only).
  double normal() noexcept;

  double normal(double mean, double stddev) noexcept {
    return mean + stddev * normal();
  }

  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace gfmate
