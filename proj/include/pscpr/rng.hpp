// Seed derivation for reproducible, order-independent random streams.

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace pscpr {

/// SplitMix64 finalizer.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives a child seed from a parent seed and a list of stream keys. The
/// result depends only on the values, never on call order, so sweep points
/// can be evaluated in any order or in parallel.
inline constexpr std::uint64_t split_seed(std::uint64_t parent,
                                          std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = mix64(parent);
  for (auto k : keys) h = mix64(h ^ mix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

/// Stream identifiers for the independent parts of one channel realization.
enum class Stream : std::uint64_t { Symbols = 1, Phase = 2, Noise = 3 };

inline std::mt19937_64 make_engine(std::uint64_t seed, Stream stream) {
  return std::mt19937_64(split_seed(seed, {static_cast<std::uint64_t>(stream)}));
}

}  // namespace pscpr
