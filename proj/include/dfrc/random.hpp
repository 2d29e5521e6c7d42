/**
 * @file dfrc/random.hpp
 * @brief Counter-based seed derivation and the few random draws the
 *        simulation needs.
 *
 * Every stochastic step owns its generator, seeded from a root seed mixed
 * with a stream tag and an index. Results therefore do not depend on the
 * order in which workers execute.
 */
#pragma once

#include <complex>
#include <cstdint>
#include <random>

namespace dfrc {

using Rng = std::mt19937_64;

enum class Stream : std::uint64_t {
  kRun = 1,
  kPlacement,
  kChannels,
  kReceiveInit,
  kParticleInit,
  kObservation,
  kResampling,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t root, Stream stream,
                                    std::uint64_t index = 0) noexcept {
  std::uint64_t h = splitmix64(root);
  h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
  return splitmix64(h ^ (index * 0xd1342543de82ef95ULL));
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

/// Circularly-symmetric complex Gaussian with E|z|^2 = variance.
inline std::complex<double> complex_gaussian(Rng& rng, double variance) {
  std::normal_distribution<double> n(0.0, 1.0);
  const double s = std::sqrt(variance / 2.0);
  const double re = n(rng);
  const double im = n(rng);
  return {s * re, s * im};
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace dfrc
