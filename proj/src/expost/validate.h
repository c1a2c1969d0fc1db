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

// Monte Carlo and statistical checks. Every estimator is seeded; trial i of a
// run with seed s always uses the same random stream, so any failing trial
// can be replayed from (s, i).

#ifndef EXPOST_VALIDATE_H_
#define EXPOST_VALIDATE_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "absl/status/statusor.h"
#include "expost/boundaries.h"
#include "json.hpp"

namespace expost {

struct McEstimate {
  double estimate = 0.0;
  size_t trials = 0;
  double se = 0.0;  // sqrt(p (1 - p) / trials)

  static McEstimate FromCount(size_t hits, size_t trials);
};

// Fraction of Brownian sessions in which the realized loss for a worst-case
// neighbor (|h| = sensitivity, along coordinate 0) exceeds the boundary at
// some grid time. The sessions are one-dimensional and step through
// time_grid, which must be strictly decreasing. trials >= 1000.
absl::StatusOr<McEstimate> McBoundaryCrossing(
    const PrivacyBoundary& boundary, double sensitivity,
    std::span<const double> time_grid, size_t trials, uint64_t seed);

// P(L_T > psi(T)) for a single reveal at T, with L_T ~ N(D^2 / 2T, D^2 / T).
double SingleTimeCrossingProbability(const PrivacyBoundary& boundary,
                                     double sensitivity, double t);

// Fraction of standard Brownian paths on [0, horizon] with B_t >= a t + b at
// some grid point. Paths are built from unit segments refined by Brownian
// bridge midpoints down to the dyadic step 2^-L <= grid_step, with each
// normal addressed by (trial, segment, level, index); a coarser grid is
// therefore an exact subset of a finer one for the same seed.
absl::StatusOr<McEstimate> LineCrossingCheck(double a, double b,
                                             double horizon, double grid_step,
                                             size_t trials, uint64_t seed);

struct KsResult {
  double statistic = 0.0;  // sup |F_n - F|
  double p_value = 0.0;    // asymptotic Kolmogorov distribution
};

// One-sample Kolmogorov-Smirnov test. At least 100 samples.
absl::StatusOr<KsResult> KsTest(std::span<const double> samples,
                                const std::function<double(double)>& cdf);

// Kolmogorov survival function Q(x) = 2 sum_{k>=1} (-1)^{k-1} e^{-2 k^2 x^2},
// truncated at 100 terms.
double KolmogorovSurvival(double x);

struct CfEstimate {
  double re = 0.0;
  double im = 0.0;
  double se_re = 0.0;  // bootstrap standard errors, 200 resamples
  double se_im = 0.0;
};

// Mean of exp(i lambda s) over the samples. At least 1000 samples.
absl::StatusOr<CfEstimate> EmpiricalCf(std::span<const double> samples,
                                       double lambda, uint64_t seed);

// Standard CDFs used by the checks.
double NormalCdf(double x, double variance);
double LaplaceCdf(double x, double scale);

// The default validation suite. Each entry is
//   {check, params, estimate, se, bound, pass}
// where bound describes the acceptance region. trial_scale multiplies every
// trial count (1.0 = full size).
nlohmann::json RunValidationSuite(uint64_t seed, double trial_scale = 1.0);

bool SuitePassed(const nlohmann::json& report);

}  // namespace expost

#endif  // EXPOST_VALIDATE_H_
