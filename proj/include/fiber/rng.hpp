#pragma once

#include <cstdint>
#include <random>

// Deterministic seed derivation.  Every stochastic ingredient of a run (data
// bits per channel, ASE per amplifier, PMD draw, laser walk, training shuffle)
// pulls its own engine from the master seed plus a fixed stream id, so results
// are reproducible regardless of evaluation order.

namespace fiber {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stream ids are small enums/counters; mixing twice keeps neighbouring ids
// statistically unrelated.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(splitmix64(master) ^ splitmix64(stream));
}

inline std::mt19937_64 make_engine(std::uint64_t master, std::uint64_t stream) {
  return std::mt19937_64(derive_seed(master, stream));
}

}  // namespace fiber
