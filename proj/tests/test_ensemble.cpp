// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <stdexcept>
#include <string>

#include "stochgrid/ensemble.hpp"
#include "stochgrid/path_engine.hpp"

using namespace stochgrid;

TEST(ParallelMap, ResultsAreInIndexOrderForAnyJobCount) {
  auto square = [](std::size_t i) { return i * i; };
  const auto one = parallel_map(1000, 1, square);
  for (unsigned jobs : {2u, 3u, 8u}) EXPECT_EQ(parallel_map(1000, jobs, square), one);
  for (std::size_t i = 0; i < one.size(); ++i) EXPECT_EQ(one[i], i * i);
  EXPECT_TRUE(parallel_map(0, 4, square).empty());
}

TEST(ParallelMap, PathEnsemblesDoNotDependOnJobs) {
  const TimeMesh m = TimeMesh::make(1.0, 256);
  auto terminal = [&](std::size_t k) { return simulate_brownian(m, 1, path_seed(77, k)).path(256, 0); };
  EXPECT_EQ(parallel_map(200, 1, terminal), parallel_map(200, 4, terminal));
}

TEST(ParallelMap, RethrowsTheLowestFailingIndex) {
  auto fn = [](std::size_t i) -> int {
    if (i == 37 || i == 90) throw std::runtime_error(std::to_string(i));
    return 0;
  };
  for (unsigned jobs : {1u, 4u}) {
    try {
      parallel_map(100, jobs, fn);
      FAIL();
    } catch (const std::runtime_error& e) {
      EXPECT_STREQ(e.what(), "37");
    }
  }
}
