#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace hardpatch {

// Deterministic generator with pinned sampling routines. The distribution
// code is written out here (instead of <random> distributions, whose
// algorithms are implementation-defined) so a seed reproduces the same
// sequence on every platform; transform traces and checkpoints rely on it.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed), seed_(seed) {}

  uint64_t seed() const { return seed_; }

  uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  int uniform_int(int n) {
    return n <= 1 ? 0 : static_cast<int>(uniform() * n) % n;
  }

  bool coin() { return uniform() < 0.5; }

  // Standard normal via Box-Muller; the spare value is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Stateless child-seed derivation (splitmix64 over seed and index).
  // Workers own Rng(derive(master, index)); order of use cannot matter.
  static uint64_t derive(uint64_t seed, uint64_t index) {
    uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 gen_;
  uint64_t seed_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace hardpatch
