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

#include "expost/mechanisms.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "absl/status/status.h"
#include "gtest/gtest.h"

namespace expost {
namespace {

SessionOptions BrownianOptions(std::vector<double> center, double l2,
                               double delta, double tune_eps) {
  SessionOptions o;
  o.kind = MechanismKind::kBrownian;
  o.center = std::move(center);
  o.budget.l2 = l2;
  o.boundary = *TuneBoundary(BoundaryKind::kLinear, l2, delta, tune_eps);
  return o;
}

SessionOptions LaplaceOptions(std::vector<double> center, double l1,
                              double eta) {
  SessionOptions o;
  o.kind = MechanismKind::kLaplace;
  o.center = std::move(center);
  o.budget.l1 = l1;
  o.eta = eta;
  return o;
}

TEST(OpenSessionTest, BrownianWithTunedLinearBoundary) {
  auto s = MechanismSession::Open(
      BrownianOptions({0.1, 0.2, 0.3}, 0.004, 1e-6, 0.3), Rng(1, 0));
  ASSERT_TRUE(s.ok()) << s.status();
  EXPECT_EQ(s->dim(), 3u);
  EXPECT_TRUE(s->history().empty());
}

TEST(OpenSessionTest, ConfigurationErrors) {
  SessionOptions laplace = LaplaceOptions({1.0}, 1.0, 0.1);
  laplace.budget.l1.reset();
  EXPECT_EQ(MechanismSession::Open(laplace, Rng(0, 0)).status().code(),
            absl::StatusCode::kInvalidArgument);

  SessionOptions no_eta = LaplaceOptions({1.0}, 1.0, 0.0);
  EXPECT_EQ(MechanismSession::Open(no_eta, Rng(0, 0)).status().code(),
            absl::StatusCode::kInvalidArgument);

  SessionOptions brownian = BrownianOptions({1.0}, 1.0, 0.01, 0.5);
  brownian.boundary.reset();
  EXPECT_EQ(MechanismSession::Open(brownian, Rng(0, 0)).status().code(),
            absl::StatusCode::kInvalidArgument);

  SessionOptions mismatched = BrownianOptions({1.0}, 1.0, 0.01, 0.5);
  mismatched.budget.l2 = 2.0;
  EXPECT_FALSE(MechanismSession::Open(mismatched, Rng(0, 0)).ok());

  SessionOptions nan_center = LaplaceOptions({NAN}, 1.0, 0.1);
  EXPECT_FALSE(MechanismSession::Open(nan_center, Rng(0, 0)).ok());
}

TEST(OpenSessionTest, SkellamIssuesNoReceipts) {
  SessionOptions o;
  o.kind = MechanismKind::kSkellam;
  o.center = {0.0, 0.0};
  auto s = *MechanismSession::Open(o, Rng(2, 0));
  auto r = s.Step(StepRequest::Time(3.0));
  ASSERT_TRUE(r.ok());
  EXPECT_FALSE(r->receipt.has_value());
  for (double v : r->iterate) EXPECT_EQ(v, std::round(v));
  EXPECT_EQ(s.Step(StepRequest::TargetEps(0.5)).status().code(),
            absl::StatusCode::kUnimplemented);
}

TEST(StepTest, LaplaceReceiptIsSensitivityOverTime) {
  auto s = *MechanismSession::Open(LaplaceOptions({5.0}, 1.0, 0.01), Rng(3, 0));
  auto r = *s.Step(StepRequest::Time(2.0));
  ASSERT_TRUE(r.receipt.has_value());
  EXPECT_DOUBLE_EQ(r.receipt->eps, 0.5);
  EXPECT_EQ(r.receipt->delta, 0.0);
  EXPECT_EQ(r.receipt->basis, "deterministic");
  auto by_eps = *s.Step(StepRequest::TargetEps(1.0));
  EXPECT_DOUBLE_EQ(by_eps.time, 1.0);
}

TEST(StepTest, RepeatedTimeIsFree) {
  auto s = *MechanismSession::Open(
      BrownianOptions({1.0, 2.0}, 0.5, 1e-3, 0.5), Rng(4, 0));
  auto a = *s.Step(StepRequest::Time(3.0));
  auto b = *s.Step(StepRequest::Time(3.0));
  EXPECT_EQ(a.iterate, b.iterate);
  EXPECT_EQ(a.receipt->eps, b.receipt->eps);
  EXPECT_EQ(s.history().size(), 1u);
}

TEST(StepTest, BrownianTargetEpsMatchesTunedTime) {
  const double l2 = 0.004;
  auto boundary =
      *TuneBoundary(BoundaryKind::kLinear, l2, std::exp(-2.0), 0.5);
  SessionOptions o;
  o.center = {0.0};
  o.budget.l2 = l2;
  o.boundary = boundary;
  auto s = *MechanismSession::Open(o, Rng(5, 0));
  auto r = *s.Step(StepRequest::TargetEps(0.5));
  EXPECT_DOUBLE_EQ(r.time, *boundary.Invert(0.5));
  // Linear t* scales as D^2: 17.9 at D = 1.
  EXPECT_NEAR(r.time / (l2 * l2), 17.9, 0.05);
  EXPECT_NEAR(r.receipt->eps, 0.5, 1e-9);
  EXPECT_EQ(r.receipt->delta, std::exp(-2.0));
  EXPECT_EQ(r.receipt->basis, "linear");
}

TEST(StepTest, MonotonicityAndHaltErrors) {
  auto s = *MechanismSession::Open(LaplaceOptions({0.0}, 1.0, 0.5), Rng(6, 0));
  ASSERT_TRUE(s.Step(StepRequest::Time(2.0)).ok());
  EXPECT_EQ(s.Step(StepRequest::Time(3.0)).status().code(),
            absl::StatusCode::kFailedPrecondition);
  EXPECT_EQ(s.Step(StepRequest::Time(0.1)).status().code(),
            absl::StatusCode::kOutOfRange);
  ASSERT_TRUE(s.halted());
  EXPECT_EQ(s.stop()->reason, StopReason::kBudgetFloor);
  EXPECT_EQ(s.Step(StepRequest::Time(1.0)).status().code(),
            absl::StatusCode::kFailedPrecondition);
}

TEST(StepTest, UnattainableEpsHaltsWithBudgetFloor) {
  auto s = *MechanismSession::Open(BrownianOptions({0.0}, 1.0, 0.01, 0.5),
                                   Rng(7, 0));
  const double floor = s.options().boundary->Floor();
  EXPECT_EQ(s.Step(StepRequest::TargetEps(floor * 0.5)).status().code(),
            absl::StatusCode::kOutOfRange);
  EXPECT_EQ(s.stop()->reason, StopReason::kBudgetFloor);
}

TEST(StepTest, ReceiptsNondecreasingAndDeterministic) {
  std::vector<StepRequest> schedule;
  for (double eps = 0.3; eps < 3.0; eps *= 1.2) {
    schedule.push_back(StepRequest::TargetEps(eps));
  }
  auto run = [&](uint64_t seed) {
    auto s = *MechanismSession::Open(BrownianOptions({1, 2, 3}, 0.1, 1e-6, 0.3),
                                     Rng(seed, 0));
    for (const auto& r : schedule) EXPECT_TRUE(s.Step(r).ok());
    return s.Transcript();
  };
  const auto a = run(8);
  EXPECT_EQ(a, run(8));
  EXPECT_NE(a, run(9));
  double prev = 0.0;
  for (const auto& step : a["steps"]) {
    EXPECT_GE(step["eps"].get<double>(), prev);
    prev = step["eps"].get<double>();
  }
}

TEST(RunUntilTest, AlwaysTrueStopsAtOne) {
  auto s = *MechanismSession::Open(LaplaceOptions({0.0}, 1.0, 0.01), Rng(9, 0));
  std::vector<StepRequest> schedule = {StepRequest::Time(4.0),
                                       StepRequest::Time(2.0)};
  auto stop = *s.RunUntil(schedule, [](auto) { return true; });
  EXPECT_EQ(stop.stopped_index, 1u);
  EXPECT_EQ(stop.reason, StopReason::kTargetMet);
  EXPECT_EQ(s.history().size(), 1u);
}

TEST(RunUntilTest, AlwaysFalseExhaustsSchedule) {
  auto s = *MechanismSession::Open(LaplaceOptions({0.0}, 1.0, 0.01), Rng(10, 0));
  std::vector<StepRequest> schedule;
  for (double t : {5.0, 4.0, 3.0, 2.0, 1.0}) {
    schedule.push_back(StepRequest::Time(t));
  }
  auto stop = *s.RunUntil(schedule, [](auto) { return false; });
  EXPECT_FALSE(stop.stopped_index.has_value());
  EXPECT_EQ(stop.reason, StopReason::kScheduleExhausted);
  EXPECT_EQ(s.history().size(), 5u);
  const auto t = s.Transcript();
  EXPECT_TRUE(t["stop"]["N"].is_null());
  EXPECT_EQ(t["stop"]["reason"], "schedule-exhausted");
}

TEST(RunUntilTest, PredicateSeesOnlyThePrefixAndReplays) {
  // Stop when the first coordinate of the iterate falls within 0.5 of 0.
  const auto stop = [](std::span<const StepRecord> prefix) {
    return std::abs(prefix.back().iterate[0]) < 0.5;
  };
  std::vector<StepRequest> schedule;
  for (double t = 10.0; t > 0.01; t *= 0.8) {
    schedule.push_back(StepRequest::Time(t));
  }
  auto s = *MechanismSession::Open(LaplaceOptions({0.0}, 1.0, 0.01), Rng(11, 0));
  auto rec = *s.RunUntil(schedule, stop);

  // Reference replay: step manually with the same seed and apply the rule.
  auto replay =
      *MechanismSession::Open(LaplaceOptions({0.0}, 1.0, 0.01), Rng(11, 0));
  std::optional<size_t> expected;
  for (const auto& r : schedule) {
    auto step = *replay.Step(r);
    if (std::abs(step.iterate[0]) < 0.5) {
      expected = step.index;
      break;
    }
  }
  EXPECT_EQ(rec.stopped_index, expected);
}

TEST(RealizedLossTest, ZeroNeighborDifference) {
  auto s = *MechanismSession::Open(BrownianOptions({1, 2}, 1.0, 0.01, 0.5),
                                   Rng(12, 0));
  ASSERT_TRUE(s.Step(StepRequest::Time(5.0)).ok());
  ASSERT_TRUE(s.Step(StepRequest::Time(2.0)).ok());
  const std::vector<double> h = {0.0, 0.0};
  const auto losses = *s.RealizedPrivacyLoss(h);
  for (double l : losses) EXPECT_EQ(l, 0.0);
  EXPECT_EQ(*s.JointPrivacyLoss(h), 0.0);
}

TEST(RealizedLossTest, GaussianLawOfSingleStepLoss) {
  // L ~ N(|h|^2 / (2T), |h|^2 / T).
  const int n = 100000;
  const double T = 2.0;
  const std::vector<double> h = {0.6, -0.8};
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    auto s = *MechanismSession::Open(BrownianOptions({0, 0}, 1.0, 0.01, 0.5),
                                     Rng(13, i));
    (void)s.Step(StepRequest::Time(T));
    const double l = (*s.RealizedPrivacyLoss(h))[0];
    sum += l;
    sq += l * l;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  const double mu = 1.0 / (2 * T), sigma2 = 1.0 / T;
  EXPECT_NEAR(mean, mu, 3 * std::sqrt(sigma2 / n));
  EXPECT_NEAR(var, sigma2, 3 * sigma2 * std::sqrt(2.0 / n));
}

TEST(RealizedLossTest, PathwiseBoundWithPositivePart) {
  const double l2 = 0.7;
  const std::vector<double> h = {l2, 0.0, 0.0};
  for (int i = 0; i < 200; ++i) {
    auto s = *MechanismSession::Open(BrownianOptions({1, 1, 1}, l2, 0.01, 0.5),
                                     Rng(14, i));
    for (double t : {4.0, 1.0, 0.25}) (void)s.Step(StepRequest::Time(t));
    const auto losses = *s.RealizedPrivacyLoss(h);
    for (size_t k = 0; k < losses.size(); ++k) {
      const auto& step = s.history()[k];
      const double w = (step.iterate[0] - 1.0);  // <noise, h> / |h|
      EXPECT_LE(losses[k], l2 * l2 / (2 * step.time) +
                               (l2 / step.time) * std::max(0.0, w) + 1e-12);
    }
  }
}

TEST(JointLossTest, EqualsLastRealizedLoss) {
  std::mt19937_64 gen(15);
  std::uniform_int_distribution<int> dim_dist(1, 5), steps_dist(1, 6);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> shrink(0.1, 0.95);
  for (int trial = 0; trial < 1000; ++trial) {
    const int d = dim_dist(gen);
    std::vector<double> center(d), h(d);
    for (int i = 0; i < d; ++i) {
      center[i] = normal(gen);
      h[i] = 0.3 * normal(gen);
    }
    auto s = *MechanismSession::Open(BrownianOptions(center, 1.0, 0.01, 0.5),
                                     Rng(16, trial));
    double t = 10.0 * shrink(gen);
    const int steps = steps_dist(gen);
    for (int k = 0; k < steps; ++k) {
      ASSERT_TRUE(s.Step(StepRequest::Time(t)).ok());
      t *= shrink(gen);
    }
    const double joint = *s.JointPrivacyLoss(h);
    const double last = s.RealizedPrivacyLoss(h)->back();
    ASSERT_NEAR(joint, last, 1e-8) << "trial " << trial;
  }
}

TEST(JointLossTest, OneStepEqualsRealized) {
  auto s = *MechanismSession::Open(BrownianOptions({0.5}, 1.0, 0.01, 0.5),
                                   Rng(17, 0));
  (void)s.Step(StepRequest::Time(1.3));
  const std::vector<double> h = {0.9};
  EXPECT_NEAR(*s.JointPrivacyLoss(h), (*s.RealizedPrivacyLoss(h))[0], 1e-12);
}

TEST(JointLossTest, NonBrownianIsUnsupported) {
  auto s = *MechanismSession::Open(LaplaceOptions({0.0}, 1.0, 0.1), Rng(18, 0));
  const std::vector<double> h = {1.0};
  EXPECT_EQ(s.RealizedPrivacyLoss(h).status().code(),
            absl::StatusCode::kUnimplemented);
  EXPECT_EQ(s.JointPrivacyLoss(h).status().code(),
            absl::StatusCode::kUnimplemented);
}

TEST(BoundarySoundnessTest, CrossingRateWithinDelta) {
  // Worst-case |h| = D on a fixed decreasing grid of 50 times.
  const double l2 = 1.0, delta = 0.05;
  const int trials = 20000;
  auto boundary = *PrivacyBoundary::Mixture(5.0, delta, l2);
  std::vector<double> times;
  for (int k = 0; k < 50; ++k) times.push_back(100.0 * std::pow(0.88, k));
  const std::vector<double> h = {l2};
  int crossed = 0;
  for (int i = 0; i < trials; ++i) {
    SessionOptions o;
    o.center = {0.0};
    o.budget.l2 = l2;
    o.boundary = boundary;
    auto s = *MechanismSession::Open(o, Rng(19, i));
    for (double t : times) (void)s.Step(StepRequest::Time(t));
    const auto losses = *s.RealizedPrivacyLoss(h);
    for (size_t k = 0; k < losses.size(); ++k) {
      if (losses[k] > boundary(times[k])) {
        ++crossed;
        break;
      }
    }
  }
  const double p = static_cast<double>(crossed) / trials;
  const double se = std::sqrt(delta * (1 - delta) / trials);
  EXPECT_LE(p, delta + 3 * se);
}

}  // namespace
}  // namespace expost
