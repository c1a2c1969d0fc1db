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

// Above-threshold testing with reduced noise.
//
// Round n compares u_n + xi_n against tau + zeta_n, where
//
//   xi_n   ~ Lap(4 D / eps_n), drawn fresh every round
//   zeta_n = Z(2 D / eps_n), one shared Laplace process started at
//            eta = 2 D / eps_max
//
// and halts at the first success. Because zeta comes from a single path, a
// constant eps schedule reuses one threshold draw across rounds, which is the
// classical AboveThreshold test.

#ifndef EXPOST_THRESHOLD_H_
#define EXPOST_THRESHOLD_H_

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "absl/status/statusor.h"
#include "expost/random.h"
#include "expost/stochastic.h"
#include "json.hpp"

namespace expost {

struct RatRound {
  size_t index = 0;  // 1-based
  double eps = 0.0;
  double zeta_time = 0.0;  // 2 D / eps
  double zeta = 0.0;
  double xi = 0.0;
  bool bit = false;
};

class RatSession {
 public:
  // Errors: eps_max, delta_u not finite and > 0 (InvalidArgument).
  static absl::StatusOr<RatSession> Open(double eps_max, double tau,
                                         double delta_u, Rng rng);

  // Runs one round on a caller-supplied utility value. Returns the bit.
  // Errors: eps > eps_max (OutOfRange); eps below the previous round's eps or
  // a halted session (FailedPrecondition).
  absl::StatusOr<bool> Step(double utility, double eps);

  // alg_receipt_eps + eps_N. Errors: not halted (FailedPrecondition).
  absl::StatusOr<double> ExPostBound(double alg_receipt_eps);

  double eps_max() const { return eps_max_; }
  double tau() const { return tau_; }
  double delta_u() const { return delta_u_; }
  double eta() const { return 2.0 * delta_u_ / eps_max_; }
  bool halted() const { return halted_; }
  // Index of the halting round, if any.
  std::optional<size_t> stopped_index() const;
  const std::vector<RatRound>& rounds() const { return rounds_; }

  // {eps_max, tau, delta_u, rounds: [{n, eps, zeta_time, bit}], halted, N,
  // total_eps}. total_eps is null until ExPostBound has been called. The
  // noise values xi and zeta are added to each round only when
  // include_noise is set; that view is for validation dumps.
  nlohmann::json Transcript(bool include_noise = false) const;

 private:
  RatSession(double eps_max, double tau, double delta_u, LaplacePath path,
             Rng xi_rng)
      : eps_max_(eps_max),
        tau_(tau),
        delta_u_(delta_u),
        zeta_path_(std::move(path)),
        xi_rng_(xi_rng) {}

  double eps_max_;
  double tau_;
  double delta_u_;
  LaplacePath zeta_path_;
  Rng xi_rng_;
  std::vector<RatRound> rounds_;
  bool halted_ = false;
  std::optional<double> total_eps_;
};

struct UtilityMargins {
  // eta_n = (4 D / eps_n) (log(2 / gamma) - log p_n); +inf where p_n = 0.
  std::vector<double> margins;
  // Indices with p_n = 0, whose margins are infinite.
  std::vector<size_t> infinite;
};

// With probability at least 1 - gamma, a run halting at round N has
// u_N >= tau - eta_N. Weights must be nonnegative and sum to at most 1
// (within 1e-12); gamma in (0, 1).
absl::StatusOr<UtilityMargins> RatUtilityMargins(
    double gamma, std::span<const double> weights,
    std::span<const double> eps_list, double delta_u);

}  // namespace expost

#endif  // EXPOST_THRESHOLD_H_
