// Copyright 2026 The perfseer Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "perfseer/pcgrad.hpp"
#include "support/test_support.hpp"

namespace perfseer {
namespace {

using testing::throws_code;

double norm(const std::vector<double>& v) { return std::sqrt(dot(v, v)); }

TaskGradients random_grads(Rng& rng, std::size_t tasks, std::size_t dim) {
  TaskGradients g(tasks, std::vector<double>(dim));
  for (auto& v : g)
    for (double& x : v) x = rng.uniform(-1, 1);
  return g;
}

TEST(PCGrad, WorkedConflictExample) {
  const auto sum = project_conflicts({{1, 0}, {-1, 1}}, 0);
  EXPECT_DOUBLE_EQ(sum[0], 0.5);
  EXPECT_DOUBLE_EQ(sum[1], 1.5);
  const auto per_task = projected_task_gradients({{1, 0}, {-1, 1}}, 0);
  EXPECT_EQ(per_task[0], (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(per_task[1], (std::vector<double>{0.0, 1.0}));
}

TEST(PCGrad, OrthogonalAndAlignedAreUnchanged) {
  EXPECT_EQ(project_conflicts({{1, 0}, {0, 1}}, 3), (std::vector<double>{1, 1}));
  EXPECT_EQ(project_conflicts({{0.25, -2}, {0.25, -2}}, 3), (std::vector<double>{0.5, -4}));
}

TEST(PCGrad, ZeroNormGradientIsSkipped) {
  const auto sum = project_conflicts({{0, 0}, {-1, 1}, {1, 0}}, 7);
  for (double v : sum) EXPECT_TRUE(std::isfinite(v));
  std::vector<ProjectionStep> trace;
  project_conflicts({{0, 0}, {1, 2}}, 1, &trace);
  for (const auto& s : trace) EXPECT_EQ(s.dot, 0.0);
}

TEST(PCGrad, Errors) {
  EXPECT_TRUE(throws_code([] { project_conflicts({}, 0); }, ErrorCode::kLengthMismatch));
  EXPECT_TRUE(throws_code([] { project_conflicts({{1, 2}, {1}}, 0); }, ErrorCode::kLengthMismatch));
}

TEST(PCGrad, SingleTaskPassesThrough) {
  EXPECT_EQ(project_conflicts({{1, -2, 3}}, 0), (std::vector<double>{1, -2, 3}));
}

class Random : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(Random, ConflictFreeSetsReturnThePlainSum) {
  Rng rng(GetParam());
  TaskGradients g = random_grads(rng, 4, 6);
  for (auto& v : g)
    for (double& x : v) x = std::abs(x);
  const auto sum = project_conflicts(g, GetParam());
  for (std::size_t k = 0; k < 6; ++k) EXPECT_DOUBLE_EQ(sum[k], g[0][k] + g[1][k] + g[2][k] + g[3][k]);
}

TEST_P(Random, TwoTaskCrossDotsAreNonNegative) {
  Rng rng(GetParam());
  const TaskGradients g = random_grads(rng, 2, 5);
  const TaskGradients p = projected_task_gradients(g, GetParam());
  EXPECT_GE(dot(p[0], g[1]), -1e-9);
  EXPECT_GE(dot(p[1], g[0]), -1e-9);
}

TEST_P(Random, EachProjectionDoesNotGrowTheNorm) {
  Rng rng(GetParam());
  std::vector<ProjectionStep> trace;
  projected_task_gradients(random_grads(rng, 5, 8), GetParam(), &trace);
  ASSERT_EQ(trace.size(), 5u * 4u);
  for (const auto& s : trace) {
    EXPECT_LE(s.norm_after, s.norm_before + 1e-12);
    if (s.dot >= 0) EXPECT_EQ(s.norm_after, s.norm_before);
  }
}

// Replays the recorded visiting order with a straight-line projection.
TEST_P(Random, MatchesReplayOfRecordedOrder) {
  Rng rng(GetParam());
  const TaskGradients g = random_grads(rng, 4, 7);
  std::vector<ProjectionStep> trace;
  const auto sum = project_conflicts(g, GetParam(), &trace);

  TaskGradients out = g;
  std::vector<std::vector<std::size_t>> visited(4);
  for (const auto& s : trace) {
    visited[s.task].push_back(s.against);
    auto& gi = out[s.task];
    const auto& gj = g[s.against];
    double d = 0, nn = 0;
    for (std::size_t k = 0; k < gi.size(); ++k) {
      d += gi[k] * gj[k];
      nn += gj[k] * gj[k];
    }
    EXPECT_NEAR(d, s.dot, 1e-12);
    if (d < 0 && nn > 0)
      for (std::size_t k = 0; k < gi.size(); ++k) gi[k] -= d / nn * gj[k];
    EXPECT_NEAR(norm(gi), s.norm_after, 1e-12);
  }
  for (std::size_t i = 0; i < 4; ++i) {
    auto v = visited[i];
    std::sort(v.begin(), v.end());
    std::vector<std::size_t> others;
    for (std::size_t j = 0; j < 4; ++j)
      if (j != i) others.push_back(j);
    EXPECT_EQ(v, others);
  }
  for (std::size_t k = 0; k < 7; ++k) {
    EXPECT_NEAR(sum[k], out[0][k] + out[1][k] + out[2][k] + out[3][k], 1e-12);
  }
}

TEST_P(Random, SameSeedIsDeterministic) {
  Rng rng(GetParam());
  const TaskGradients g = random_grads(rng, 6, 4);
  EXPECT_EQ(project_conflicts(g, 99), project_conflicts(g, 99));
}

INSTANTIATE_TEST_SUITE_P(Seeds, Random, ::testing::Range<std::uint64_t>(0, 25));

TEST(PCGrad, LastProjectedPairIsOrthogonal) {
  std::vector<double> g{1, 0};
  const std::vector<double> other{-1, 1};
  EXPECT_EQ(project_if_conflicting(g, other), -1.0);
  EXPECT_NEAR(dot(g, other), 0.0, 1e-15);
  std::vector<double> h{1, 1};
  EXPECT_EQ(project_if_conflicting(h, other), 0.0);
  EXPECT_EQ(h, (std::vector<double>{1, 1}));
}

}  // namespace
}  // namespace perfseer
