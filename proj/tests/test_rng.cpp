// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "stochgrid/rng.hpp"

using namespace stochgrid;

// Known-answer vectors of the Random123 distribution (kat_vectors, philox4x32_10).
TEST(Philox, KnownAnswerVectors) {
  using A4 = std::array<std::uint32_t, 4>;
  using A2 = std::array<std::uint32_t, 2>;
  EXPECT_EQ(Philox4x32::block(A4{0, 0, 0, 0}, A2{0, 0}), (A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(Philox4x32::block(A4{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, A2{0xffffffff, 0xffffffff}),
            (A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(Philox4x32::block(A4{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, A2{0xa4093822, 0x299f31d0}),
            (A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(Philox, SameSeedSameStream) {
  Philox4x32 a({7, 3}), b({7, 3});
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a(), b());
}

TEST(Philox, SubstreamsAndMastersDiffer) {
  std::set<std::uint64_t> first;
  for (std::uint64_t m = 0; m < 4; ++m)
    for (std::uint64_t s = 0; s < 16; ++s) first.insert(Philox4x32({m, s})());
  EXPECT_EQ(first.size(), 64u);
}

TEST(SeedBlocks, RolesAreDisjoint) {
  EXPECT_EQ(stream_role(path_seed(1, 5).substream), StreamRole::path);
  EXPECT_EQ(stream_role(pilot_seed(1, 5).substream), StreamRole::pilot);
  EXPECT_EQ(stream_role(limit_seed(path_seed(1, 5)).substream), StreamRole::limit);
  EXPECT_EQ(stream_role(limit_seed(pilot_seed(1, 5)).substream), StreamRole::limit);
  EXPECT_NE(limit_seed(path_seed(1, 5)), path_seed(1, 5));
  EXPECT_THROW(limit_seed(limit_seed(path_seed(1, 5))), ConfigError);
  EXPECT_THROW(path_seed(1, kPilotStreamBase), ConfigError);
}

TEST(Gaussian, FirstMomentsOfOneMillionDraws) {
  GaussianStream g({42, 0});
  const int n = 1'000'000;
  double s1 = 0.0, s2 = 0.0, s4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = g();
    s1 += x;
    s2 += x * x;
    s4 += x * x * x * x;
  }
  EXPECT_LT(std::abs(s1 / n), 5.0 / std::sqrt(n));
  EXPECT_LT(std::abs(s2 / n - 1.0), 5.0 * std::sqrt(2.0 / n));
  EXPECT_LT(std::abs(s4 / n - 3.0), 5.0 * std::sqrt(96.0 / n));
}

TEST(Gaussian, UniformIsInUnitInterval) {
  GaussianStream g({1, 1});
  for (int i = 0; i < 100000; ++i) {
    const double u = g.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}
