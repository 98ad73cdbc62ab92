#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

namespace chanimp {

/// SplitMix64 finalizer. Used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of the stream owned by trial `trial` at grid point `point`.
///
/// stream = splitmix64(splitmix64(splitmix64(master) + point) + trial)
///
/// The rule depends only on the three integers, so serial and threaded
/// sweeps draw identical numbers for every trial.
constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t point,
                                    std::uint64_t trial) noexcept {
  return splitmix64(splitmix64(splitmix64(master) + point) + trial);
}

/// Random source with circularly-symmetric complex Gaussian draws.
///
/// CN(0, v) has variance v/2 on each real component.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::complex<double> complex_normal(double variance) {
    const double s = std::sqrt(variance / 2.0);
    const double re = normal_(engine_);
    const double im = normal_(engine_);
    return {s * re, s * im};
  }

  double normal() { return normal_(engine_); }

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace chanimp
