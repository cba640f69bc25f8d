#pragma once

#include <cstdint>

namespace gnnserve {

// splitmix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Stateless 64-bit hash of (value, seed). Used for partition ownership and
/// for deriving per-node sampling streams; changing it changes every
/// partitioning and sampled graph, so it is fixed.
constexpr std::uint64_t mix64(std::uint64_t value, std::uint64_t seed) {
  return splitmix64(value + splitmix64(seed));
}

/// Combine several words into one seed.
constexpr std::uint64_t mix64(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return mix64(mix64(a, b), c);
}

}  // namespace gnnserve
