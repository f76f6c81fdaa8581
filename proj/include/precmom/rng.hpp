#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace precmom {

// Counter-based splitmix64 stream. State is just {seed, counter}, so copies
// fork deterministically and the k-th draw is a pure function of the seed.
// Integer-only paths (next_u64, sign) are bit-identical across platforms.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t counter = 0)
      : seed_(seed), counter_(counter) {}

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Child stream for run `index` under a master seed; children with distinct
  // indices are decorrelated and insensitive to each other's consumption.
  static RngStream derive(std::uint64_t master_seed, std::uint64_t index) {
    return RngStream(mix(master_seed ^ mix(index + 0x6A09E667F3BCC909ull)));
  }

  std::uint64_t next_u64() {
    ++counter_;
    return mix(seed_ + counter_ * 0x9E3779B97F4A7C15ull);
  }

  // Uniform in [0, 1) with 53 random bits.
  double next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double next_gaussian() {
    // Box-Muller on two fresh uniforms; u1 shifted away from zero so the log
    // is finite. No spare caching, state stays {seed, counter}.
    double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    double u2 = next_uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Rademacher sign from the top bit: integer-only, bit-portable.
  int sign() { return (next_u64() >> 63) ? 1 : -1; }

  std::vector<double> rademacher(std::size_t dim) {
    std::vector<double> v(dim);
    for (std::size_t i = 0; i < dim; ++i) v[i] = static_cast<double>(sign());
    return v;
  }

  std::vector<double> gaussian(std::size_t dim, double sigma = 1.0) {
    std::vector<double> v(dim);
    for (std::size_t i = 0; i < dim; ++i) v[i] = sigma * next_gaussian();
    return v;
  }

  // Uniform integer in [0, bound) by rejection; no modulo bias.
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t limit = bound * ((~std::uint64_t{0}) / bound);
    for (;;) {
      std::uint64_t r = next_u64();
      if (r < limit) return r % bound;
    }
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

}  // namespace precmom
