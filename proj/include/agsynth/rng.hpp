#pragma once
// Deterministic, platform-independent RNG (splitmix64). The standard
// distributions are implementation-defined, so all sampling goes through
// this to keep reports byte-identical for a given seed.

#include <cstdint>
#include <vector>

namespace agsynth {

struct Rng {
  std::uint64_t state;

  explicit Rng(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // inclusive range
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(next() % span);
  }

  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform_real(double lo, double hi) { return lo + uniform01() * (hi - lo); }

  bool chance(double p) { return uniform01() < p; }

  std::size_t pick_index(std::size_t n) {
    return static_cast<std::size_t>(next() % n);
  }
};

}  // namespace agsynth
