#pragma once

#include <cstdint>
#include <random>

namespace semitrans {

//! Deterministic seed derivation for independent RNG substreams.
//! Replicate b of a run seeded with `base` uses derive_seed(base, b, ...),
//! so results do not depend on scheduling or thread count.

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

} // namespace detail

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t k1, std::uint64_t k2 = 0) {
  std::uint64_t s = detail::splitmix64(base ^ (0xD1B54A32D192ED03ULL * (k1 + 1)));
  return detail::splitmix64(s ^ (0x8CB92BA72F3D8DD7ULL * (k2 + 1)));
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

} // namespace semitrans
