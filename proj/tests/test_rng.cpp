#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "avdiff/rng.hpp"

using avdiff::Rng;

TEST_CASE("same seed reproduces the same stream") {
  Rng a(12345), b(12345);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("mt19937_64 engine matches the standard-mandated value") {
  // The C++ standard pins the 10000th output of a default-seeded (5489)
  // mt19937_64; this locks the raw stream across platforms and libraries.
  Rng r(5489u);
  uint64_t x = 0;
  for (int i = 0; i < 10000; ++i) x = r.next_u64();
  CHECK(x == 9981545732273789042ULL);
}

TEST_CASE("splitmix64 known-answer vector") {
  // First output of the reference splitmix64 stream starting from state 0.
  CHECK(Rng::splitmix64(0) == 0xe220a8397b1dcdafULL);
}

TEST_CASE("uniform stays in [0,1) and covers the range") {
  Rng r(7);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 20000; ++i) {
    double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo < 0.01);
  CHECK(hi > 0.99);
}

TEST_CASE("uniform(lo,hi) respects its bounds") {
  Rng r(9);
  for (int i = 0; i < 1000; ++i) {
    double u = r.uniform(-3.0, 2.0);
    CHECK(u >= -3.0);
    CHECK(u < 2.0);
  }
}

TEST_CASE("uniform_int is inclusive on both ends and hits every value") {
  Rng r(11);
  std::set<int64_t> seen;
  for (int i = 0; i < 10000; ++i) {
    int64_t v = r.uniform_int(-2, 3);
    CHECK(v >= -2);
    CHECK(v <= 3);
    seen.insert(v);
  }
  CHECK(seen.size() == 6);  // all of -2..3
  CHECK(r.uniform_int(5, 5) == 5);
}

TEST_CASE("bernoulli empirical rate near p") {
  Rng r(13);
  int n = 100000, hits = 0;
  for (int i = 0; i < n; ++i) hits += r.bernoulli(0.3) ? 1 : 0;
  double rate = double(hits) / n;
  // 3 sigma for p=0.3, n=1e5 is ~0.0043
  CHECK(std::abs(rate - 0.3) < 0.005);
}

TEST_CASE("normal has mean 0 and variance 1") {
  Rng r(17);
  int n = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = r.normal();
    sum += x;
    sumsq += x * x;
  }
  double mean = sum / n;
  double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);       // 3 sigma ~ 0.0095
  CHECK(std::abs(var - 1.0) < 0.02);  // 3 sigma ~ 0.013
}

TEST_CASE("keyed streams are deterministic and distinct") {
  Rng a = Rng::keyed(42, 0), a2 = Rng::keyed(42, 0);
  Rng b = Rng::keyed(42, 1);
  Rng c = Rng::keyed(43, 0);
  uint64_t xa = a.next_u64();
  CHECK(xa == a2.next_u64());
  CHECK(xa != b.next_u64());
  CHECK(xa != c.next_u64());
}
