#pragma once

#include <cstdint>
#include <random>

namespace acdkit {

using Rng = std::mt19937_64;

// SplitMix64 finalizer. Turns (master seed, task index) into statistically
// independent sub-seeds so that replicate i sees the same stream no matter
// which thread runs it.
constexpr std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index) noexcept {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t master, std::uint64_t index = 0) {
  return Rng(mix_seed(master, index));
}

// Uniform draw on the open interval (0, 1).
inline double open_uniform(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double x = u(rng);
  while (x <= 0.0) x = u(rng);
  return x;
}

}  // namespace acdkit
