#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace tailmask {

/// SplitMix64 step; advances `state` and returns the mixed output.
std::uint64_t splitmix64(std::uint64_t& state);

/**
 * Derive an independent seed for a named substream.
 *
 * The derivation is fixed so results are reproducible across runs and
 * platforms: the stream name is hashed with 64-bit FNV-1a, combined with the
 * base seed and the index, and passed through two SplitMix64 rounds.
 *
 *   derive_seed(42, "masks", 3)  // epoch-3 mask stream of global seed 42
 */
std::uint64_t derive_seed(std::uint64_t base, std::string_view stream, std::uint64_t index = 0);

/**
 * Seedable generator with platform-independent derived distributions.
 *
 * The engine is std::mt19937_64, whose output sequence is fixed by the
 * standard. The standard library distributions are not, so uniform, integer,
 * normal and categorical draws are implemented here.
 */
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();

  /// Unbiased integer in [0, n). Requires n > 0.
  std::uint64_t uniform_index(std::uint64_t n);

  /// Standard normal via the Box-Muller transform (second variate cached).
  double normal();

  /// Poisson variate (Knuth's multiplication method); intended for mean <= ~100.
  std::uint64_t poisson(double mean);

  /// Index drawn from `cumulative`, a non-decreasing prefix sum with positive last entry.
  std::size_t categorical(std::span<const double> cumulative);

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

/// Prefix sums of `weights`, for use with Rng::categorical.
std::vector<double> cumulative_weights(std::span<const double> weights);

}  // namespace tailmask
