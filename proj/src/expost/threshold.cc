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

#include "expost/threshold.h"

#include <cmath>
#include <limits>

#include "absl/strings/str_cat.h"

namespace expost {
namespace {

// Initial simulated range of the threshold path, as a multiple of eta. The
// path is extended on demand for smaller eps.
constexpr double kInitialRangeFactor = 1e3;

}  // namespace

absl::StatusOr<RatSession> RatSession::Open(double eps_max, double tau,
                                            double delta_u, Rng rng) {
  if (!(eps_max > 0.0) || !std::isfinite(eps_max)) {
    return absl::InvalidArgumentError(
        absl::StrCat("eps_max must be finite and > 0, got ", eps_max));
  }
  if (!(delta_u > 0.0) || !std::isfinite(delta_u)) {
    return absl::InvalidArgumentError(absl::StrCat(
        "utility sensitivity must be finite and > 0, got ", delta_u));
  }
  if (!std::isfinite(tau)) {
    return absl::InvalidArgumentError("threshold must be finite");
  }
  const double eta = 2.0 * delta_u / eps_max;
  auto path = LaplacePath::Build(1, eta, eta * kInitialRangeFactor,
                                 rng.Split(0));
  if (!path.ok()) return path.status();
  return RatSession(eps_max, tau, delta_u, *std::move(path), rng.Split(1));
}

absl::StatusOr<bool> RatSession::Step(double utility, double eps) {
  if (halted_) {
    return absl::FailedPreconditionError("threshold session already halted");
  }
  if (!(eps > 0.0) || !std::isfinite(eps)) {
    return absl::InvalidArgumentError(
        absl::StrCat("round eps must be finite and > 0, got ", eps));
  }
  if (eps > eps_max_) {
    return absl::OutOfRangeError(absl::StrCat(
        "round eps ", eps, " exceeds the budget eps_max ", eps_max_));
  }
  if (!rounds_.empty() && eps < rounds_.back().eps) {
    return absl::FailedPreconditionError(absl::StrCat(
        "round eps must be nondecreasing: ", eps, " after ",
        rounds_.back().eps));
  }
  if (std::isnan(utility)) {
    return absl::InvalidArgumentError("utility value is NaN");
  }
  // eps <= eps_max keeps the time at or above eta; clamp rounding.
  const double t = std::max(2.0 * delta_u_ / eps, eta());
  if (auto s = zeta_path_.Extend(t); !s.ok()) return s;
  auto zeta = zeta_path_.Query(t);
  if (!zeta.ok()) return zeta.status();

  RatRound round;
  round.index = rounds_.size() + 1;
  round.eps = eps;
  round.zeta_time = t;
  round.zeta = (*zeta)[0];
  round.xi = xi_rng_.Laplace(4.0 * delta_u_ / eps);
  round.bit = utility + round.xi >= tau_ + round.zeta;
  rounds_.push_back(round);
  if (round.bit) halted_ = true;
  return round.bit;
}

std::optional<size_t> RatSession::stopped_index() const {
  if (!halted_) return std::nullopt;
  return rounds_.back().index;
}

absl::StatusOr<double> RatSession::ExPostBound(double alg_receipt_eps) {
  if (!halted_) {
    return absl::FailedPreconditionError(
        "ex-post bound needs a session that halted with success");
  }
  if (!(alg_receipt_eps >= 0.0)) {
    return absl::InvalidArgumentError(absl::StrCat(
        "mechanism receipt eps must be >= 0, got ", alg_receipt_eps));
  }
  total_eps_ = alg_receipt_eps + rounds_.back().eps;
  return *total_eps_;
}

nlohmann::json RatSession::Transcript(bool include_noise) const {
  nlohmann::json j;
  j["eps_max"] = eps_max_;
  j["tau"] = tau_;
  j["delta_u"] = delta_u_;
  nlohmann::json rounds = nlohmann::json::array();
  for (const RatRound& r : rounds_) {
    nlohmann::json o;
    o["n"] = r.index;
    o["eps"] = r.eps;
    o["zeta_time"] = r.zeta_time;
    o["bit"] = r.bit ? 1 : 0;
    if (include_noise) {
      o["xi"] = r.xi;
      o["zeta"] = r.zeta;
    }
    rounds.push_back(std::move(o));
  }
  j["rounds"] = std::move(rounds);
  j["halted"] = halted_;
  j["N"] = halted_ ? nlohmann::json(rounds_.back().index)
                   : nlohmann::json(nullptr);
  j["total_eps"] =
      total_eps_.has_value() ? nlohmann::json(*total_eps_) : nullptr;
  return j;
}

absl::StatusOr<UtilityMargins> RatUtilityMargins(
    double gamma, std::span<const double> weights,
    std::span<const double> eps_list, double delta_u) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("gamma must lie in (0, 1), got ", gamma));
  }
  if (!(delta_u > 0.0) || !std::isfinite(delta_u)) {
    return absl::InvalidArgumentError(absl::StrCat(
        "utility sensitivity must be finite and > 0, got ", delta_u));
  }
  if (weights.size() != eps_list.size()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "got ", weights.size(), " weights for ", eps_list.size(), " rounds"));
  }
  double total = 0.0;
  for (double p : weights) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      return absl::InvalidArgumentError(
          absl::StrCat("weights must be finite and >= 0, got ", p));
    }
    total += p;
  }
  if (total > 1.0 + 1e-12) {
    return absl::InvalidArgumentError(
        absl::StrCat("weights must sum to at most 1, got ", total));
  }
  UtilityMargins out;
  const double log_two_over_gamma = std::log(2.0 / gamma);
  for (size_t i = 0; i < weights.size(); ++i) {
    if (!(eps_list[i] > 0.0)) {
      return absl::InvalidArgumentError(
          absl::StrCat("eps[", i, "] must be > 0, got ", eps_list[i]));
    }
    if (weights[i] == 0.0) {
      out.margins.push_back(std::numeric_limits<double>::infinity());
      out.infinite.push_back(i);
      continue;
    }
    out.margins.push_back((4.0 * delta_u / eps_list[i]) *
                          (log_two_over_gamma - std::log(weights[i])));
  }
  return out;
}

}  // namespace expost
