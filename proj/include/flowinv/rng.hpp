#pragma once

#include <cmath>
#include <cstdint>

#include "flowinv/vec3.hpp"

namespace flowinv {

// Counter-based random streams: every draw is a pure function of
// (seed, stream, counter), so Monte Carlo estimates are reproducible
// regardless of how samples are distributed over threads.
namespace rng_detail {

inline uint64_t splitmix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t mix3(uint64_t a, uint64_t b, uint64_t c) {
  uint64_t h = splitmix64(a);
  h = splitmix64(h ^ (b + 0x632be59bd9b4e019ULL));
  h = splitmix64(h ^ (c + 0x9e6c63d0876a9a47ULL));
  return h;
}

}  // namespace rng_detail

/// One logical random stream; draws are indexed, never sequential state.
class CounterRng {
 public:
  CounterRng(uint64_t seed, uint64_t stream) : seed_(seed), stream_(stream) {}

  /// Uniform in [0,1), draw index i.
  double uniform(uint64_t i) const {
    uint64_t h = rng_detail::mix3(seed_, stream_, i);
    return static_cast<double>(h >> 11) * 0x1.0p-53;
  }

  /// Uniform in [a,b).
  double uniform(uint64_t i, double a, double b) const { return a + (b - a) * uniform(i); }

  /// Standard normal via Box-Muller; consumes draw indices 2i and 2i+1.
  double normal(uint64_t i) const {
    double u1 = uniform(2 * i), u2 = uniform(2 * i + 1);
    if (u1 <= 0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  /// Isotropic normal 3-vector; consumes indices 6i .. 6i+5.
  Vec3 normal3(uint64_t i) const {
    return {normal(3 * i), normal(3 * i + 1), normal(3 * i + 2)};
  }

  Vec3 uniform_in_box(uint64_t i, const Vec3& lo, const Vec3& hi) const {
    return {uniform(3 * i, lo.x, hi.x), uniform(3 * i + 1, lo.y, hi.y),
            uniform(3 * i + 2, lo.z, hi.z)};
  }

  /// Uniform integer in [0, n).
  uint64_t index(uint64_t i, uint64_t n) const {
    return rng_detail::mix3(seed_, stream_ ^ 0xabcdef0123456789ULL, i) % n;
  }

 private:
  uint64_t seed_;
  uint64_t stream_;
};

}  // namespace flowinv
