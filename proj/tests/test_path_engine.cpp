// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "stochgrid/path_engine.hpp"
#include "stochgrid/stats.hpp"

using namespace stochgrid;

TEST(TimeMesh, RejectsDegenerateMeshes) {
  EXPECT_THROW(TimeMesh::make(1.0, 0), ConfigError);
  EXPECT_THROW(TimeMesh::make(0.0, 10), ConfigError);
  EXPECT_THROW(TimeMesh::make(-1.0, 10), ConfigError);
  EXPECT_THROW(simulate_brownian(TimeMesh{1.0, 0}, 1, {1, 0}), ConfigError);
}

TEST(TimeMesh, PointsAreIncreasingAndEndAtHorizon) {
  const TimeMesh m = TimeMesh::make(0.7, 13);
  EXPECT_EQ(m.time(0), 0.0);
  EXPECT_EQ(m.time(13), 0.7);
  for (std::size_t i = 0; i < 13; ++i) EXPECT_LT(m.time(i), m.time(i + 1));
}

TEST(TimeMesh, KappaRuleResolvesEveryGridInterval) {
  const TimeMesh m = mesh_for_grid(1.0, 256, 2.0, 16);
  EXPECT_EQ(m.steps, 16u * 256u * 2u);
  EXPECT_LE(m.dt(), 1.0 / (16.0 * 256.0 * 2.0) * (1 + 1e-12));
}

TEST(Brownian, SameSeedIsBitIdentical) {
  const TimeMesh m = TimeMesh::make(1.0, 500);
  const auto a = simulate_brownian(m, 2, {9, 4});
  const auto b = simulate_brownian(m, 2, {9, 4});
  EXPECT_EQ(a.path.values, b.path.values);
  const auto c = simulate_brownian(m, 2, {9, 5});
  EXPECT_NE(a.path.values, c.path.values);
}

TEST(Brownian, StartsAtZero) {
  const auto b = simulate_brownian(TimeMesh::make(1.0, 10), 3, {1, 2});
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(b.path(0, c), 0.0);
}

TEST(Brownian, OneStepTerminalVariance) {
  const TimeMesh m = TimeMesh::make(1.0, 1);
  std::vector<double> x;
  for (std::uint64_t k = 0; k < 50000; ++k) x.push_back(simulate_brownian(m, 1, path_seed(3, k)).path(1, 0));
  const double v = moments(x).variance;
  EXPECT_GE(v, 0.97);
  EXPECT_LE(v, 1.03);
}

TEST(Brownian, CoordinatesAreUncorrelated) {
  const TimeMesh m = TimeMesh::make(1.0, 4);
  std::vector<double> a, b;
  for (std::uint64_t k = 0; k < 50000; ++k) {
    const auto p = simulate_brownian(m, 2, path_seed(5, k));
    a.push_back(p.path(4, 0));
    b.push_back(p.path(4, 1));
  }
  EXPECT_LT(std::abs(pearson(a, b)), 0.03);
}

TEST(Sde, IdentityDiffusionReproducesBrownian) {
  const TimeMesh m = TimeMesh::make(2.0, 300);
  const auto b = simulate_brownian(m, 2, {1, 1});
  const auto y = simulate_sde(brownian_model(2, {0.5, -1.0}), b);
  for (std::size_t i = 0; i < m.points(); ++i) {
    // the scheme sums increments, so agreement is up to rounding
    EXPECT_NEAR(y.path(i, 0), 0.5 + b.path(i, 0), 1e-12);
    EXPECT_NEAR(y.path(i, 1), -1.0 + b.path(i, 1), 1e-12);
  }
}

TEST(Sde, ConstantCoefficientsAreExactAtMeshPoints) {
  const TimeMesh m = TimeMesh::make(1.0, 1000);
  const auto b = simulate_brownian(m, 2, {2, 2});
  const std::vector<double> alpha{0.3, -0.2}, beta{1.0, 0.5, -0.25, 2.0}, y0{1.0, 2.0};
  const auto y = simulate_sde(constant_model(alpha, beta, y0), b);
  for (std::size_t i = 0; i < m.points(); ++i)
    for (std::size_t r = 0; r < 2; ++r) {
      const double exact =
          y0[r] + alpha[r] * m.time(i) + beta[r * 2] * b.path(i, 0) + beta[r * 2 + 1] * b.path(i, 1);
      EXPECT_NEAR(y.path(i, r), exact, 1e-12);
    }
}

TEST(Sde, GbmMeanMatchesClosedForm) {
  const SdeSpec gbm = gbm_model(0.05, 0.2, {1.0});
  const TimeMesh m = TimeMesh::make(1.0, 32);
  double sum = 0.0;
  const int paths = 100000;
  for (int k = 0; k < paths; ++k) sum += simulate_bundle(gbm, m, path_seed(11, k)).state.path(32, 0);
  EXPECT_NEAR(sum / paths, std::exp(0.05), 0.01 * std::exp(0.05));
}

TEST(Sde, NonFiniteStateReportsTimeIndex) {
  SdeSpec s = gbm_model(0.0, 0.0, {1.0});
  s.drift = [](std::span<const double> x, std::span<double> out) { out[0] = x[0] * 1e300; };
  const auto b = simulate_brownian(TimeMesh::make(1.0, 10), 1, {1, 0});
  try {
    simulate_sde(s, b);
    FAIL() << "expected a numeric error";
  } catch (const NumericError& e) {
    EXPECT_GE(e.time_index(), 1u);
    EXPECT_LE(e.time_index(), 10u);
  }
}

TEST(Sde, DimensionMismatchIsRejected) {
  const auto b = simulate_brownian(TimeMesh::make(1.0, 10), 2, {1, 0});
  EXPECT_THROW(simulate_sde(gbm_model(0.0, 0.1, {1.0}), b), ConfigError);
}

TEST(Sde, StateAndNoiseShareTheMesh) {
  const auto bundle = simulate_bundle(gbm_model(0.1, 0.3, {1.0}), TimeMesh::make(1.0, 64), {4, 4});
  EXPECT_EQ(bundle.state.mesh(), bundle.brownian.mesh());
  EXPECT_EQ(bundle.state.path(0, 0), 1.0);
}

TEST(Brownian, CoarseningSubsamples) {
  const auto fine = simulate_brownian(TimeMesh::make(1.0, 64), 2, {1, 7});
  const auto coarse = coarsen(fine, 8);
  ASSERT_EQ(coarse.mesh().steps, 8u);
  for (std::size_t i = 0; i <= 8; ++i)
    for (std::size_t c = 0; c < 2; ++c) EXPECT_EQ(coarse.path(i, c), fine.path(8 * i, c));
  EXPECT_THROW(coarsen(fine, 5), ConfigError);
}
