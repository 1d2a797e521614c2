#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace otasim {

// Seeded, stream-addressable RNG. Every independent consumer (trial, sensor,
// sample) derives its own stream from (seed, ids...), so results do not
// depend on evaluation order or thread count.
class RngStream {
 public:
  RngStream(uint64_t seed, std::initializer_list<uint64_t> ids) {
    uint64_t s = seed;
    for (uint64_t id : ids) s = splitmix64(s ^ splitmix64(id + 0x9e3779b97f4a7c15ull));
    eng_.seed(splitmix64(s));
  }

  explicit RngStream(uint64_t seed) : RngStream(seed, {}) {}

  uint64_t next_u64() { return eng_(); }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; one draw consumes two uniforms.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  static uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace otasim
