#pragma once

#include <cstdint>

namespace armor {

/// Stateless counter-based generator: every draw is a pure function of a key
/// tuple, so results are identical regardless of thread count or scheduling.
class CounterRng {
 public:
  // SplitMix64 finalizer, applied per mixed-in word.
  static std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  static std::uint64_t hash(std::uint64_t seed, std::uint64_t iteration,
                            std::uint64_t block_i, std::uint64_t block_j,
                            std::uint64_t draw = 0) {
    std::uint64_t h = mix(seed);
    h = mix(h ^ iteration);
    h = mix(h ^ block_i);
    h = mix(h ^ block_j);
    h = mix(h ^ draw);
    return h;
  }

  /// Uniform double in [0, 1) from the keyed counter.
  static double uniform(std::uint64_t seed, std::uint64_t iteration,
                        std::uint64_t block_i, std::uint64_t block_j,
                        std::uint64_t draw = 0) {
    // top 53 bits -> [0,1)
    return static_cast<double>(hash(seed, iteration, block_i, block_j, draw) >> 11) *
           0x1.0p-53;
  }
};

}  // namespace armor
