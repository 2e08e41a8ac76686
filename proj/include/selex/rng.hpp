#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace selex {

// One SplitMix64 step (Steele/Lea/Flood). Advances `state` and returns the
// next output. Used only to derive substream seeds, never as the working
// generator itself.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic substream seed from a root seed and a path of integers.
// Distinct paths yield independent streams, so per-chunk or per-item
// generators can run on any number of workers and still reproduce the
// single-threaded result exactly.
inline std::uint64_t derive_seed(std::uint64_t seed,
                                 std::initializer_list<std::uint64_t> path = {}) {
  std::uint64_t state = seed;
  std::uint64_t h = splitmix64(state);
  for (std::uint64_t p : path) {
    state ^= p + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h = splitmix64(state);
  }
  return h;
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path = {}) {
  return Rng(derive_seed(seed, path));
}

// Leading path tags so different subsystems sharing a root seed never walk
// the same substream.
namespace seed_tag {
inline constexpr std::uint64_t pool = 0x706f6f6cULL;        // uniform pool synthesis
inline constexpr std::uint64_t universe = 0x756e6976ULL;    // denominator sample
inline constexpr std::uint64_t restart = 0x72737472ULL;     // fit restarts
inline constexpr std::uint64_t select = 0x73656c63ULL;      // per-round selection
inline constexpr std::uint64_t pcr = 0x70637220ULL;         // amplification
inline constexpr std::uint64_t sample = 0x73616d70ULL;      // sequencing sample
inline constexpr std::uint64_t background = 0x626b6764ULL;  // genomic background tiles
}  // namespace seed_tag

}
