// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "stochgrid/hedging_bs.hpp"
#include "stochgrid/limit_law.hpp"
#include "stochgrid/stats.hpp"

using namespace stochgrid;

TEST(DeltaField, BrownianIdentityIsOneOverRootTwo) {
  const auto b = simulate_bundle(brownian_model(1), TimeMesh::make(1.0, 50), path_seed(1, 0));
  const DeltaField unit = delta_field(identity_integrand(), brownian_model(1), constant_theta(1.0), b.state);
  for (double v : unit.values) EXPECT_NEAR(v, 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(delta_energy(unit), 0.5, 1e-12);
  const DeltaField doubled = delta_field(identity_integrand(), brownian_model(1), constant_theta(2.0), b.state);
  for (double v : doubled.values) EXPECT_NEAR(v, 0.5, 1e-15);
}

TEST(DeltaField, MatchesTheHedgingErrorIntegrand) {
  const BsSpec bs{100, 100, 0.02, 0.05, 0.2, 1.0, 0.95};
  const TimeMesh mesh = TimeMesh::make(bs.V, 200);
  const auto b = simulate_bundle(bs_model(bs), mesh, path_seed(2, 0));
  const ThetaSpec theta = bs_no_bad_days_theta(bs, 1.0, {0.05, 50.0});
  const DeltaField d = delta_field(bs_integrand(bs), bs_model(bs), theta, b.state);
  for (std::size_t i = 0; i < mesh.points(); ++i) {
    const AdaptedView v(b.state.path, i);
    EXPECT_NEAR(d.at(i)[0], bs_error_integrand(bs, theta, v), 1e-12);
    EXPECT_EQ(d.at(i)[1], 0.0);
    EXPECT_EQ(d.at(i)[3], 0.0);
  }
}

TEST(LimitSampler, UnitDeltaHasVarianceOneHalf) {
  const auto b = simulate_bundle(brownian_model(1), TimeMesh::make(1.0, 64), path_seed(3, 0));
  DeltaField d = delta_field(identity_integrand(), brownian_model(1), constant_theta(1.0), b.state);
  std::vector<double> terminal, brownian;
  for (std::uint64_t k = 0; k < 50000; ++k) {
    d.path_seed = path_seed(3, k);
    const auto bk = simulate_brownian(d.mesh, 1, d.path_seed);
    terminal.push_back(sample_limit(d, limit_seed(d.path_seed)).u_star.back());
    brownian.push_back(bk.path(64, 0));
  }
  const Moments m = moments(terminal);
  EXPECT_NEAR(m.variance, 0.5, 0.03 * 0.5);
  EXPECT_LT(std::abs(pearson(terminal, brownian)), 0.02);
}

TEST(LimitSampler, ZeroDeltaGivesZero) {
  DeltaField d{TimeMesh::make(1.0, 10), 1, std::vector<double>(11, 0.0), path_seed(1, 1)};
  for (double u : sample_limit(d, limit_seed(d.path_seed)).u_star) EXPECT_EQ(u, 0.0);
}

TEST(LimitSampler, ArrayAndCollapsedFormsAgreeInLaw) {
  // Full 2 x 2 Delta from a constant-coefficient model with correlated noise.
  const SdeSpec model = constant_model({0.0, 0.0}, {1.0, 0.5, -0.3, 0.8}, {0.2, -0.1});
  const ThetaSpec theta = path_theta([](const AdaptedView& v) { return 1.0 + v[0] * v[0]; }, {0.5, 4.0});
  const TimeMesh mesh = TimeMesh::make(1.0, 32);
  std::vector<double> array_form, collapsed;
  for (std::uint64_t k = 0; k < 20000; ++k) {
    const auto b = simulate_bundle(model, mesh, path_seed(4, k));
    const DeltaField d = delta_field(square_integrand(2), model, theta, b.state);
    array_form.push_back(sample_limit(d, limit_seed(path_seed(4, k))).u_star.back());
    collapsed.push_back(sample_limit_collapsed(d, limit_seed(path_seed(4, k + 20000))).u_star.back());
  }
  EXPECT_TRUE(ks_two_sample({array_form, "array", {}}, {collapsed, "collapsed", {}}, 0.01).pass);
}

TEST(LimitSampler, SeedsMustComeFromTheLimitBlock) {
  DeltaField d{TimeMesh::make(1.0, 10), 1, std::vector<double>(11, 0.5), path_seed(1, 1)};
  EXPECT_THROW(sample_limit(d, d.path_seed), ConfigError);
  EXPECT_THROW(sample_limit(d, path_seed(1, 2)), ConfigError);
  EXPECT_THROW(sample_limit_collapsed(d, pilot_seed(1, 1)), ConfigError);
  EXPECT_NO_THROW(sample_limit(d, limit_seed(d.path_seed)));
}

TEST(SupStatistic, Examples) {
  EXPECT_EQ(sup_statistic(std::vector<double>(5, 0.0)), 0.0);
  std::vector<double> ramp;
  for (int i = 0; i <= 10; ++i) ramp.push_back(-i / 10.0);
  EXPECT_EQ(sup_statistic(ramp), 1.0);
}
