#pragma once

#include "tangled/types.hpp"

#include <cmath>
#include <cstdint>

namespace tangled {

// splitmix64 generator. Every draw is derived from raw 64-bit outputs with
// fixed arithmetic, so sequences are bit-identical across platforms. The
// standard <random> distributions are deliberately not used: their output is
// implementation-defined.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1), 53-bit resolution
  double uniform01() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // uniform integer in [0, n)
  uint64_t below(uint64_t n) {
    if (n == 0) throw ValidationError("rng: below(0) is empty");
    return uint64_t((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // standard normal via Box-Muller (cosine branch)
  double normal() {
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    double u1 = double((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // independent generator derived from this generator's seed and an id;
  // never advances this generator's state
  Rng substream(uint64_t id) const {
    uint64_t z = seed_ + (id + 1) * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return Rng(z ^ (z >> 31));
  }

  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_;
  uint64_t state_;
};

}  // namespace tangled
