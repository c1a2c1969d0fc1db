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

// Time-uniform privacy boundaries for the Brownian mechanism.
//
// A boundary psi maps a noise time t to an ex-post epsilon such that, with
// probability at least 1 - delta, the realized privacy loss at every revealed
// time T_n stays below psi(T_n). Two families are provided:
//
//   mixture:  psi(t) = D^2/(2t) + (D/t) sqrt(2 (t + rho) log(sqrt((t+rho)/rho)
//                                                             / delta))
//   linear:   psi(t) = (D/t) (D/2 + b) + D a,     with 2ab = log(1/delta)
//
// where D is the l2 sensitivity. Both are strictly decreasing in t; the
// linear family flattens out at D a, the mixture family decays to 0.

#ifndef EXPOST_BOUNDARIES_H_
#define EXPOST_BOUNDARIES_H_

#include <span>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "json.hpp"

namespace expost {

enum class BoundaryKind { kMixture, kLinear };

std::string BoundaryKindName(BoundaryKind kind);
absl::StatusOr<BoundaryKind> ParseBoundaryKind(const std::string& name);

class PrivacyBoundary {
 public:
  // Requires a, b > 0 with 2ab = log(1/delta) to relative 1e-12.
  static absl::StatusOr<PrivacyBoundary> Linear(double a, double b,
                                                double delta,
                                                double sensitivity);
  static absl::StatusOr<PrivacyBoundary> Mixture(double rho, double delta,
                                                 double sensitivity);

  // psi(t); t must be > 0.
  absl::StatusOr<double> Eval(double t) const;
  // psi(t) without argument checks.
  double operator()(double t) const;

  // Least noise time t* with psi(t*) = eps (log-space bisection, relative
  // tolerance well below 1e-10). eps at or below Floor() is unattainable.
  absl::StatusOr<double> Invert(double eps) const;

  // inf_t psi(t): D a for linear, 0 for mixture.
  double Floor() const;

  BoundaryKind kind() const { return kind_; }
  double a() const { return a_; }
  double b() const { return b_; }
  double rho() const { return rho_; }
  double delta() const { return delta_; }
  double sensitivity() const { return sensitivity_; }

  nlohmann::json ToJson() const;

 private:
  PrivacyBoundary(BoundaryKind kind, double a, double b, double rho,
                  double delta, double sensitivity)
      : kind_(kind),
        a_(a),
        b_(b),
        rho_(rho),
        delta_(delta),
        sensitivity_(sensitivity) {}

  absl::Status CheckDecreasing() const;

  BoundaryKind kind_;
  double a_ = 0.0;
  double b_ = 0.0;
  double rho_ = 0.0;
  double delta_;
  double sensitivity_;
};

// Picks the member of `kind`'s family that needs the least noise time to
// claim target_eps. Linear: a in (0, target_eps / D) with b = log(1/delta)
// / (2a). Mixture: rho in (1e-6, 1e6). Both searched on a log scale by a
// coarse scan followed by golden-section refinement.
absl::StatusOr<PrivacyBoundary> TuneBoundary(BoundaryKind kind,
                                             double sensitivity, double delta,
                                             double target_eps);

// {kind, a, b, rho, delta, sensitivity, target_eps, required_time}; the
// parameters that do not apply to `boundary`'s kind are null.
absl::StatusOr<nlohmann::json> TuneReport(const PrivacyBoundary& boundary,
                                          double target_eps);

// Element-wise Invert over a nondecreasing epsilon schedule; the result is
// nonincreasing.
absl::StatusOr<std::vector<double>> EpsilonScheduleToTimes(
    const PrivacyBoundary& boundary, std::span<const double> eps_list);

}  // namespace expost

#endif  // EXPOST_BOUNDARIES_H_
