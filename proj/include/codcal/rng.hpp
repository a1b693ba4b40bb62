#pragma once

// Seeded random source used by every stochastic step (jitter, sampling,
// synthetic data). The engine is std::mt19937_64; conversions to uniform
// reals, bounded integers and normals are done here rather than through
// <random> distributions, whose output is implementation-defined and would
// break bit-exact reproducibility across standard libraries.

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace codcal {

/// SplitMix64 finaliser. Used to derive independent sub-stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for sub-stream `key` of `seed`. Distinct keys give unrelated streams.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key) noexcept {
  return mix64(mix64(seed) ^ mix64(key + 0x632be59bd9b4e019ULL));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer on [0, bound). Unbiased (rejection on the low tail).
  std::uint64_t below(std::uint64_t bound);

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal();

  /// m distinct indices from [0, n), in draw order (partial Fisher-Yates).
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t m);

  /// Fisher-Yates shuffle of an index vector.
  void shuffle(std::vector<std::size_t>& v);

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace codcal
