#pragma once

#include <cstdint>
#include <random>

namespace geocloak {

// std::mt19937_64 has a bit-exact output sequence mandated by the standard;
// the distribution adapters in <random> do not, so the conversions below
// are spelled out to keep seeded results identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform index in [0, n); rejection sampling removes modulo bias.
  std::uint64_t index(std::uint64_t n);

  // Standard normal via Box-Muller; both variates are used.
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace geocloak
