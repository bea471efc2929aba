#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace amsa {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30U)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27U)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31U);
}

/// Counter-based stream derivation: the same (master, path) always yields the
/// same seed, independent of the order in which streams are requested.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t h = splitmix64(master);
  for (const std::uint64_t component : path) {
    h = splitmix64(h ^ splitmix64(component + 0x632be59bd9b4e019ULL));
  }
  return h;
}

inline Rng make_stream(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  return Rng{derive_seed(master, path)};
}

/// Uniform draw in [lo, hi). Implemented by hand so that results do not depend
/// on the standard library's distribution implementation.
inline double uniform(Rng& rng, double lo, double hi) {
  const double unit = static_cast<double>(rng() >> 11U) * 0x1.0p-53;
  return lo + (hi - lo) * unit;
}

// stream tags
inline constexpr std::uint64_t kStreamMaximize = 1;
inline constexpr std::uint64_t kStreamTestSet = 2;
inline constexpr std::uint64_t kStreamData = 3;

}  // namespace amsa
