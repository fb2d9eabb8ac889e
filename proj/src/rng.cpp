#include "tailmask/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace tailmask {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view stream, std::uint64_t index) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char ch : stream) {
    hash ^= ch;
    hash *= 0x100000001b3ULL;
  }
  std::uint64_t state = base ^ hash;
  splitmix64(state);
  state ^= index * 0xd1b54a32d192ed03ULL;
  return splitmix64(state);
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  // Rejection sampling on the top of the range keeps the result unbiased.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

double Rng::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  cached_normal_ = radius * std::sin(angle);
  has_cached_normal_ = true;
  return radius * std::cos(angle);
}

std::uint64_t Rng::poisson(double mean) {
  if (mean <= 0.0) return 0;
  const double limit = std::exp(-mean);
  std::uint64_t k = 0;
  double product = uniform();
  while (product > limit) {
    ++k;
    product *= uniform();
  }
  return k;
}

std::size_t Rng::categorical(std::span<const double> cumulative) {
  const double u = uniform() * cumulative.back();
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  auto index = static_cast<std::size_t>(it - cumulative.begin());
  if (index == cumulative.size()) {
    // u rounded up to the total: take the last entry with positive weight.
    index = cumulative.size() - 1;
    while (index > 0 && cumulative[index] == cumulative[index - 1]) --index;
  }
  return index;
}

std::vector<double> cumulative_weights(std::span<const double> weights) {
  std::vector<double> out(weights.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    out[i] = acc;
  }
  return out;
}

}  // namespace tailmask
