// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "stochgrid/path_engine.hpp"
#include "stochgrid/stats.hpp"

using namespace stochgrid;

namespace {

std::vector<double> normals(std::size_t count, std::uint64_t stream, double shift = 0.0) {
  GaussianStream g({99, stream});
  std::vector<double> x(count);
  for (double& v : x) v = g() + shift;
  return x;
}

}  // namespace

TEST(Ks, CoefficientMatchesTheAsymptoticTable) {
  EXPECT_NEAR(ks_coefficient(0.01), oracle::kKsCoefficient01, 1e-6);
}

TEST(Ks, IdenticalSetsPass) {
  const auto x = normals(1000, 1);
  const ComparisonReport r = ks_two_sample({x, "a", {}}, {x, "b", {}});
  EXPECT_EQ(r.ks_statistic, 0.0);
  EXPECT_TRUE(r.pass);
}

TEST(Ks, ShiftedSetsFail) {
  const ComparisonReport r = ks_two_sample({normals(10000, 2), "a", {}}, {normals(10000, 3, 0.1), "b", {}});
  EXPECT_FALSE(r.pass);
  EXPECT_LT(r.p_value, 0.01);
}

TEST(Ks, CalibratedUnderTheNull) {
  int passes = 0;
  for (std::uint64_t rep = 0; rep < 100; ++rep)
    passes += ks_two_sample({normals(10000, 100 + 2 * rep), "a", {}}, {normals(10000, 101 + 2 * rep), "b", {}}).pass;
  EXPECT_GE(passes, 98);
}

TEST(Ks, InvariantUnderMonotoneTransforms) {
  auto a = normals(2000, 4), b = normals(2000, 5, 0.05);
  const double d = ks_two_sample({a, "a", {}}, {b, "b", {}}).ks_statistic;
  for (double& v : a) v = std::exp(v);
  for (double& v : b) v = std::exp(v);
  EXPECT_DOUBLE_EQ(ks_two_sample({a, "a", {}}, {b, "b", {}}).ks_statistic, d);
}

TEST(Ks, NeedsEnoughData) {
  EXPECT_THROW(ks_two_sample({normals(50, 6), "a", {}}, {normals(5000, 7), "b", {}}), InsufficientDataError);
  EXPECT_THROW(ks_two_sample({{1.0, NAN}, "a", {}}, {normals(5000, 7), "b", {}}), NumericError);
}

TEST(Independence, Examples) {
  const auto y = normals(10000, 8), noise = normals(10000, 9);
  EXPECT_TRUE(independence_check({noise, "u", {}}, {y, "y", {}}).pass);
  EXPECT_FALSE(independence_check({y, "u", {}}, {y, "y", {}}).pass);
  std::vector<double> sq(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) sq[i] = y[i] * y[i];
  const IndependenceReport r = independence_check({sq, "u", {}}, {y, "y", {}});
  EXPECT_TRUE(r.pass_linear);
  EXPECT_FALSE(r.pass_square);
  EXPECT_NEAR(r.bound, 0.03, 1e-12);
  EXPECT_THROW(independence_check({normals(10, 1), "u", {}}, {normals(11, 2), "y", {}}), ConfigError);
}

TEST(BinnedProfile, BrownianIncrementsAreFlat) {
  std::vector<std::vector<double>> paths;
  for (std::uint64_t k = 0; k < 10000; ++k) paths.push_back(simulate_brownian(TimeMesh::make(1.0, 64), 1, {5, k}).path.coordinate(0));
  const BinProfile p = binned_variance_profile(paths, 8);
  ASSERT_EQ(p.variance.size(), 8u);
  for (std::size_t b = 0; b < 8; ++b) EXPECT_LT(std::abs(p.variance[b] - 0.125), 4.0 * p.stderr_variance[b]);
}

TEST(BinnedProfile, DeterministicPathsHaveNoVariance) {
  std::vector<std::vector<double>> paths(10);
  for (auto& p : paths)
    for (int i = 0; i <= 16; ++i) p.push_back(i / 16.0);
  const BinProfile prof = binned_variance_profile(paths, 4);
  for (double v : prof.variance) EXPECT_NEAR(v, 0.0, 1e-15);
  EXPECT_THROW(binned_variance_profile(paths, 17), ConfigError);
}

TEST(JointLaw, SameConstructionPasses) {
  const auto y1 = normals(6000, 10), e1 = normals(6000, 11), y2 = normals(6000, 12), e2 = normals(6000, 13);
  const PairedSample a{y1, e1, "cfg", "a"}, b{y2, e2, "cfg", "b"};
  EXPECT_TRUE(joint_law_check(a, b).pass);
}

TEST(JointLaw, InjectedDependenceFails) {
  // Same marginals, but u is correlated with y in one ensemble only.
  const auto y1 = normals(6000, 14), e1 = normals(6000, 15), y2 = normals(6000, 16), e2 = normals(6000, 17);
  std::vector<double> mixed(6000);
  for (std::size_t i = 0; i < mixed.size(); ++i) mixed[i] = 0.6 * y2[i] + 0.8 * e2[i];
  const JointLawReport r = joint_law_check({y1, e1, "cfg", "a"}, {y2, mixed, "cfg", "b"});
  EXPECT_TRUE(r.subtests[0].pass);
  EXPECT_TRUE(r.subtests[1].pass);
  EXPECT_FALSE(r.pass);
}

TEST(JointLaw, GuardsTheInputs) {
  const auto y = normals(6000, 18), u = normals(6000, 19);
  EXPECT_THROW(joint_law_check({y, u, "cfg-a", "a"}, {y, u, "cfg-b", "b"}), AuditError);
  EXPECT_THROW(joint_law_check({normals(100, 1), normals(100, 2), "c", ""}, {y, u, "c", ""}), InsufficientDataError);
}

TEST(Moments, Basics) {
  const Moments m = moments(std::vector<double>{1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_DOUBLE_EQ(m.variance, 5.0 / 3.0);
  EXPECT_DOUBLE_EQ(quantile({4.0, 1.0, 3.0, 2.0}, 0.5), 2.5);
}
