#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace avdiff {

/// Deterministic random source. Built on std::mt19937_64 (whose raw output is
/// specified by the standard) with hand-rolled conversions, so streams are
/// reproducible across standard libraries and platforms.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  /// Independent stream derived from (seed, stream index), e.g. one stream
  /// per training sample for scheduling-independent dropout draws.
  static Rng keyed(uint64_t seed, uint64_t stream) {
    return Rng(splitmix64(seed ^ splitmix64(stream + 0x9e3779b97f4a7c15ULL)));
  }

  uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi] inclusive, unbiased.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    uint64_t range = static_cast<uint64_t>(hi - lo) + 1;
    uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return lo + static_cast<int64_t>(x % range);
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller; caches the second deviate.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  static uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace avdiff
