// Copyright 2026 The Expost Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "expost/stochastic.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "absl/status/status.h"
#include "gtest/gtest.h"

namespace expost {
namespace {

constexpr int kNumPaths = 40000;

TEST(BrownianPathTest, MarginalsAndCovarianceInReverseTime) {
  const double t = 4.0;
  const double s = 1.0;
  double sum_t = 0, sum_s = 0, sq_t = 0, sq_s = 0, cross = 0;
  for (int i = 0; i < kNumPaths; ++i) {
    BrownianPath path(1, Rng(1, i));
    const double bt = (*path.Reveal(t))[0];
    const double bs = (*path.Reveal(s))[0];
    sum_t += bt;
    sum_s += bs;
    sq_t += bt * bt;
    sq_s += bs * bs;
    cross += bt * bs;
  }
  const double n = kNumPaths;
  EXPECT_NEAR(sum_t / n, 0.0, 0.06);
  EXPECT_NEAR(sum_s / n, 0.0, 0.03);
  // Var B_t = t, Var B_s = s, Cov(B_s, B_t) = min(s, t) = s.
  EXPECT_NEAR(sq_t / n, t, 0.12);
  EXPECT_NEAR(sq_s / n, s, 0.03);
  EXPECT_NEAR(cross / n, s, 0.06);
}

TEST(BrownianPathTest, IncrementsAreIndependentAcrossThreeTimes) {
  // Cov(B_1, B_4 - B_2) = 0 and Var(B_4 - B_2) = 2.
  double cross = 0, var = 0;
  for (int i = 0; i < kNumPaths; ++i) {
    BrownianPath path(1, Rng(2, i));
    const double b4 = (*path.Reveal(4.0))[0];
    const double b2 = (*path.Reveal(2.0))[0];
    const double b1 = (*path.Reveal(1.0))[0];
    cross += b1 * (b4 - b2);
    var += (b4 - b2) * (b4 - b2);
  }
  EXPECT_NEAR(cross / kNumPaths, 0.0, 0.05);
  EXPECT_NEAR(var / kNumPaths, 2.0, 0.06);
}

TEST(BrownianPathTest, CoordinatesAreIndependent) {
  double cross = 0;
  for (int i = 0; i < kNumPaths; ++i) {
    BrownianPath path(2, Rng(3, i));
    const auto v = *path.Reveal(1.0);
    cross += v[0] * v[1];
  }
  EXPECT_NEAR(cross / kNumPaths, 0.0, 0.03);
}

TEST(BrownianPathTest, RequeryReturnsStoredValue) {
  BrownianPath path(3, Rng(4, 0));
  const auto a = *path.Reveal(2.0);
  const auto b = *path.Reveal(1.0);
  EXPECT_EQ(*path.Reveal(1.0), b);
  EXPECT_EQ(*path.Reveal(2.0), a);
  EXPECT_EQ(path.revealed().size(), 2u);
}

TEST(BrownianPathTest, RejectsIncreasingAndNegativeTimes) {
  BrownianPath path(1, Rng(5, 0));
  ASSERT_TRUE(path.Reveal(1.0).ok());
  EXPECT_EQ(path.Reveal(1.5).status().code(),
            absl::StatusCode::kFailedPrecondition);
  EXPECT_EQ(path.Reveal(-1.0).status().code(),
            absl::StatusCode::kInvalidArgument);
  EXPECT_EQ(path.Reveal(std::nan("")).status().code(),
            absl::StatusCode::kInvalidArgument);
}

TEST(BrownianPathTest, RejectedCallsConsumeNoRandomness) {
  BrownianPath a(1, Rng(6, 0));
  BrownianPath b(1, Rng(6, 0));
  ASSERT_TRUE(a.Reveal(1.0).ok());
  ASSERT_TRUE(b.Reveal(1.0).ok());
  ASSERT_FALSE(a.Reveal(3.0).ok());
  EXPECT_EQ(*a.Reveal(0.5), *b.Reveal(0.5));
}

TEST(BrownianPathTest, TimeZeroIsOrigin) {
  BrownianPath path(2, Rng(7, 0));
  ASSERT_TRUE(path.Reveal(1.0).ok());
  EXPECT_EQ(*path.Reveal(0.0), std::vector<double>(2, 0.0));
}

TEST(LaplacePathTest, MarginalIsLaplaceOfScaleT) {
  const double eta = 0.1;
  const double t = 3.0;
  std::vector<double> xs;
  for (int i = 0; i < kNumPaths; ++i) {
    auto path = LaplacePath::Build(1, eta, t, Rng(8, i));
    ASSERT_TRUE(path.ok());
    xs.push_back((*path->Query(t))[0]);
  }
  std::sort(xs.begin(), xs.end());
  const double n = xs.size();
  double d = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    const double x = xs[i];
    const double f =
        x < 0 ? 0.5 * std::exp(x / t) : 1.0 - 0.5 * std::exp(-x / t);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  EXPECT_LT(d * std::sqrt(n), 1.95);
}

TEST(LaplacePathTest, JumpCountMatchesIntensity) {
  // Jumps in (eta, t] are Poisson with mean int 2/s ds = 2 log(t / eta).
  const double eta = 1.0;
  const double t = 10.0;
  double total = 0;
  for (int i = 0; i < kNumPaths; ++i) {
    auto path = LaplacePath::Build(1, eta, t, Rng(9, i));
    total += path->jump_times().size() - 1;
  }
  const double expected = 2.0 * std::log(t / eta);
  EXPECT_NEAR(total / kNumPaths, expected, 0.05);
}

TEST(LaplacePathTest, IncrementCharacteristicFunction) {
  // E cos(lambda (Z_t - Z_eta)) = (1 + lambda^2 eta^2) / (1 + lambda^2 t^2).
  const double eta = 0.5;
  const double t = 2.0;
  for (double lambda : {0.3, 1.0}) {
    double sum = 0;
    for (int i = 0; i < kNumPaths; ++i) {
      auto path = LaplacePath::Build(1, eta, t, Rng(10, i));
      const double inc = (*path->Query(t))[0] - (*path->Query(eta))[0];
      sum += std::cos(lambda * inc);
    }
    const double expected =
        (1 + lambda * lambda * eta * eta) / (1 + lambda * lambda * t * t);
    EXPECT_NEAR(sum / kNumPaths, expected, 0.015) << "lambda=" << lambda;
  }
}

TEST(LaplacePathTest, ExtendMatchesDirectBuild) {
  auto grown = LaplacePath::Build(2, 0.2, 1.0, Rng(11, 0));
  auto direct = LaplacePath::Build(2, 0.2, 50.0, Rng(11, 0));
  const auto before = *grown->Query(0.7);
  ASSERT_TRUE(grown->Extend(50.0).ok());
  EXPECT_EQ(*grown->Query(0.7), before);
  EXPECT_EQ(grown->jump_times(), direct->jump_times());
  for (double t : {0.2, 0.9, 5.0, 49.0}) {
    EXPECT_EQ(*grown->Query(t), *direct->Query(t));
  }
}

TEST(LaplacePathTest, QueryOutsideRangeFails) {
  auto path = LaplacePath::Build(1, 1.0, 2.0, Rng(12, 0));
  EXPECT_EQ(path->Query(0.5).status().code(), absl::StatusCode::kOutOfRange);
  EXPECT_EQ(path->Query(2.5).status().code(), absl::StatusCode::kOutOfRange);
}

TEST(LaplacePathTest, BuildValidatesArguments) {
  EXPECT_FALSE(LaplacePath::Build(1, 0.0, 1.0, Rng(0, 0)).ok());
  EXPECT_FALSE(LaplacePath::Build(1, 2.0, 1.0, Rng(0, 0)).ok());
  EXPECT_FALSE(LaplacePath::Build(0, 1.0, 1.0, Rng(0, 0)).ok());
}

TEST(SkellamPathTest, MomentsMatchSkellam) {
  const double rp = 2.0, rm = 0.5, t = 3.0;
  double sum = 0, sq = 0;
  for (int i = 0; i < kNumPaths; ++i) {
    auto path = SkellamPath::Build(1, rp, rm, t, Rng(13, i));
    const double x = static_cast<double>((*path->Query(t))[0]);
    sum += x;
    sq += x * x;
  }
  const double mean = sum / kNumPaths;
  const double var = sq / kNumPaths - mean * mean;
  EXPECT_NEAR(mean, t * (rp - rm), 0.05);
  EXPECT_NEAR(var, t * (rp + rm), 0.15);
}

TEST(SkellamPathTest, ExtendKeepsPrefix) {
  auto grown = SkellamPath::Build(3, 1.0, 1.0, 1.0, Rng(14, 0));
  auto direct = SkellamPath::Build(3, 1.0, 1.0, 20.0, Rng(14, 0));
  ASSERT_TRUE(grown->Extend(20.0).ok());
  for (double t : {0.0, 0.5, 1.0, 7.0, 20.0}) {
    EXPECT_EQ(*grown->Query(t), *direct->Query(t));
  }
  EXPECT_EQ(direct->Query(21.0).status().code(), absl::StatusCode::kOutOfRange);
}

}  // namespace
}  // namespace expost
