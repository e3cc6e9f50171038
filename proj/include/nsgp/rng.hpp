#pragma once

// Seeded named substreams. Every component derives its generator from the
// single run seed plus a label ("init", "folds", "synth1d/f", ...) so any
// piece of a run can be reproduced in isolation.

#include <cstdint>
#include <random>
#include <string_view>

namespace nsgp::rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t substream_seed(std::uint64_t seed, std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(seed ^ splitmix64(h));
}

inline std::mt19937_64 substream(std::uint64_t seed, std::string_view name) {
  return std::mt19937_64(substream_seed(seed, name));
}

}  // namespace nsgp::rng
