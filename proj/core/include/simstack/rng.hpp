// SPDX-License-Identifier: Apache-2.0
//
// Deterministic, splittable random streams. Every stochastic quantity in the
// library draws from an Rng whose seed is derived from a master seed plus an
// integer path (scheme index, sweep index, realization index, ...), so results
// never depend on scheduling or worker count.

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <initializer_list>

namespace simstack {

/// splitmix64 step; also used to expand seeds into generator state.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Folds an integer path into a master seed. Order-sensitive, well mixed:
/// derive_seed(s, {1, 2}) != derive_seed(s, {2, 1}).
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = master;
  for (std::uint64_t x : path) {
    std::uint64_t t = x + 0x632BE59BD9B4E019ULL;
    h ^= splitmix64_next(t);
    (void)splitmix64_next(h);  // advances h
  }
  return h;
}

/// xoshiro256++ with Box-Muller Gaussian draws. Bit-reproducible across
/// platforms; never uses <random> distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64_next(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform in [0, 1), 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in (0, 1); safe as a log argument.
  double next_open_double() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; pairs are cached.
  double next_gaussian();

  /// Circularly-symmetric complex Gaussian with E|z|^2 = variance.
  std::complex<double> next_cgaussian(double variance);

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4] = {};
  double cached_gaussian_ = 0.0;
  bool has_cached_ = false;
};

inline double Rng::next_gaussian() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_gaussian_;
  }
  const double u1 = next_open_double();
  const double u2 = next_double();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 6.283185307179586476925286766559 * u2;
  cached_gaussian_ = r * std::sin(angle);
  has_cached_ = true;
  return r * std::cos(angle);
}

inline std::complex<double> Rng::next_cgaussian(double variance) {
  const double scale = std::sqrt(variance * 0.5);
  const double re = next_gaussian();
  const double im = next_gaussian();
  return {scale * re, scale * im};
}

}  // namespace simstack
