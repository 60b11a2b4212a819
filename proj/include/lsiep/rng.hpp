#pragma once

#include <cstdint>

namespace lsiep {

// Deterministic generator used everywhere randomness is needed, so that a
// seed pins results bit-for-bit independently of the standard library's
// distribution implementations.  xoshiro-style splitmix64 core.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform in [-1, 1)
  double symmetric() { return 2.0 * uniform() - 1.0; }

  // uniform integer in [0, n)
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

 private:
  std::uint64_t state_;
};

}  // namespace lsiep
