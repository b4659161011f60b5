#include "eosq/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using eosq::Rng;

TEST(Rng, DeterministicPerSeed) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  Rng c(43);
  bool differs = false;
  Rng a2(42);
  for (int i = 0; i < 10; ++i)
    if (a2.next_u64() != c.next_u64()) differs = true;
  EXPECT_TRUE(differs);
}

TEST(Rng, UniformInHalfOpenUnit) {
  Rng rng(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    EXPECT_GT(u, 0.0);
    EXPECT_LE(u, 1.0);
  }
}

TEST(Rng, GaussianMoments) {
  Rng rng(123);
  const int n = 1000000;
  double sum = 0.0, sum_sq = 0.0, sum_cu = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = rng.gaussian();
    sum += g;
    sum_sq += g * g;
    sum_cu += g * g * g;
  }
  EXPECT_NEAR(sum / n, 0.0, 5e-3);
  EXPECT_NEAR(sum_sq / n, 1.0, 1e-2);
  EXPECT_NEAR(sum_cu / n, 0.0, 2e-2);
}

TEST(Rng, RademacherBalanced) {
  Rng rng(5);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double r = rng.rademacher();
    EXPECT_TRUE(r == 1.0 || r == -1.0);
    sum += r;
  }
  EXPECT_NEAR(sum / 100000.0, 0.0, 0.02);
}

TEST(Rng, DerivedStreamsDistinct) {
  std::set<std::uint64_t> seeds;
  for (std::uint64_t tag = 0; tag < 64; ++tag)
    seeds.insert(eosq::derive_stream(99, tag));
  EXPECT_EQ(seeds.size(), 64u);
  EXPECT_NE(eosq::derive_stream(1, 0, eosq::StreamRole::kNoise),
            eosq::derive_stream(1, 0, eosq::StreamRole::kLeftVectors));
  EXPECT_NE(eosq::derive_stream(1, 0, eosq::StreamRole::kNoise),
            eosq::derive_stream(1, 1, eosq::StreamRole::kNoise));
}
