#pragma once

#include <cstdint>
#include <random>

namespace red {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream keyed by (seed, a, b), e.g. (seed, episode, rollout).
inline Rng derive_stream(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0) {
  return Rng(mix64(mix64(mix64(seed) ^ a) ^ (b * 0xd1b54a32d192ed03ULL)));
}

}  // namespace red
