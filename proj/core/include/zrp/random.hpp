#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace zrp {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic random source. One instance per execution thread; replica
// streams are derived from the master seed by counter so replica k is
// reproducible in isolation.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed)
      : seed_(seed), engine_(splitmix64(seed)) {}

  std::uint64_t bits() { return engine_(); }

  // Uniform in the open interval (0,1).
  double u01() {
    return (static_cast<double>(bits() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Exponential with the given rate (mean 1/rate).
  double exponential(double rate) { return -std::log(u01()) / rate; }

  // Uniform integer in [0, n).
  int uniform_int(int n) {
    return static_cast<int>(bits() % static_cast<std::uint64_t>(n));
  }

  std::uint64_t seed() const { return seed_; }

  // Counter-derived substream; independent of this stream's position.
  RandomSource child(std::uint64_t k) const {
    return RandomSource(splitmix64(seed_ ^ (0x9e3779b97f4a7c15ULL * (k + 1))));
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace zrp
