#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace chopthin {

/// Seeded random source used by every stochastic operation in the library.
///
/// Wraps a 64-bit Mersenne twister. Two sources constructed from the same
/// seed produce identical streams, which is what makes resampling results
/// and experiment reports reproducible. A source is not thread safe; give
/// each worker its own.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform index in [0, n); n must be positive.
  std::size_t below(std::size_t n) {
    auto k = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return k < n ? k : n - 1;
  }

  double normal() { return normal_(engine_); }

  /// Exponential(1) via inversion.
  double exponential();

  /// Binomial(trials, p) with p clamped to [0, 1].
  std::uint64_t binomial(std::uint64_t trials, double p);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed for (iteration, stream) under a
/// master seed:
///   mix(m, i, s) = splitmix64(splitmix64(splitmix64(m) ^ i) ^ s)
constexpr std::uint64_t mix_seed(std::uint64_t master, std::uint64_t iteration,
                                 std::uint64_t stream) {
  return splitmix64(splitmix64(splitmix64(master) ^ iteration) ^ stream);
}

inline constexpr const char* kSeedMixerName =
    "splitmix64(splitmix64(splitmix64(master)^iteration)^stream)";

}  // namespace chopthin
