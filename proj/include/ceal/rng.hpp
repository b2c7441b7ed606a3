#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <utility>
#include <vector>

namespace ceal {

/// SplitMix64 finalizer. Used to derive independent stream seeds from
/// (seed, iteration, sample index, purpose) tuples.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (std::uint64_t k : keys) h = mix64(h ^ mix64(k));
  return h;
}

/// Seeded random stream. The conversions from raw engine output are
/// written out here instead of using <random> distributions, whose
/// algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform in (0, 1); never returns 0 so logarithms stay finite.
  double uniform_open() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) {
    // Rejection sampling on the top of the range removes modulo bias.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r;
    do {
      r = engine_();
    } while (r >= limit);
    return r % n;
  }

  /// Standard normal via Box-Muller (one value per call, the pair partner is
  /// discarded to keep consumption one-draw-pair-per-call).
  double normal() {
    const double u1 = uniform_open();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  /// Standard Gumbel(0, 1).
  double gumbel() { return -std::log(-std::log(uniform_open())); }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

/// Fisher-Yates shuffle driven by Rng::uniform_index.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform_index(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace ceal
