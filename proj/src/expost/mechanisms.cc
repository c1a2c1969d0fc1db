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
#include <numbers>

#include "absl/strings/str_cat.h"

namespace expost {
namespace {

double GaussianLogDensity(std::span<const double> x,
                          std::span<const double> mean, double var) {
  double sq = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - mean[i];
    sq += d * d;
  }
  return -0.5 * sq / var -
         0.5 * static_cast<double>(x.size()) *
             std::log(2.0 * std::numbers::pi * var);
}

}  // namespace

std::string MechanismKindName(MechanismKind kind) {
  switch (kind) {
    case MechanismKind::kBrownian:
      return "brownian";
    case MechanismKind::kLaplace:
      return "laplace";
    case MechanismKind::kSkellam:
      return "skellam";
  }
  return "unknown";
}

absl::StatusOr<MechanismKind> ParseMechanismKind(const std::string& name) {
  if (name == "brownian") return MechanismKind::kBrownian;
  if (name == "laplace") return MechanismKind::kLaplace;
  if (name == "skellam") return MechanismKind::kSkellam;
  return absl::InvalidArgumentError(absl::StrCat(
      "unknown mechanism '", name, "' (expected brownian, laplace or skellam)"));
}

std::string StopReasonName(StopReason reason) {
  switch (reason) {
    case StopReason::kTargetMet:
      return "target-met";
    case StopReason::kScheduleExhausted:
      return "schedule-exhausted";
    case StopReason::kBudgetFloor:
      return "budget-floor";
  }
  return "unknown";
}

absl::StatusOr<MechanismSession> MechanismSession::Open(SessionOptions options,
                                                        Rng rng) {
  const size_t dim = options.center.size();
  if (dim == 0) return absl::InvalidArgumentError("center must be non-empty");
  for (double c : options.center) {
    if (!std::isfinite(c)) {
      return absl::InvalidArgumentError("center must be finite");
    }
  }
  if (!(options.min_time >= 0.0) || !std::isfinite(options.min_time)) {
    return absl::InvalidArgumentError(
        absl::StrCat("min_time must be finite and >= 0, got ",
                     options.min_time));
  }
  switch (options.kind) {
    case MechanismKind::kBrownian: {
      if (!options.budget.l2.has_value()) {
        return absl::InvalidArgumentError(
            "brownian mechanism needs an l2 sensitivity budget");
      }
      if (!(*options.budget.l2 > 0.0)) {
        return absl::InvalidArgumentError("l2 sensitivity must be > 0");
      }
      if (!options.boundary.has_value()) {
        return absl::InvalidArgumentError(
            "brownian mechanism needs a privacy boundary");
      }
      if (std::abs(options.boundary->sensitivity() - *options.budget.l2) >
          1e-12 * *options.budget.l2) {
        return absl::InvalidArgumentError(absl::StrCat(
            "boundary sensitivity ", options.boundary->sensitivity(),
            " does not match the l2 budget ", *options.budget.l2));
      }
      BrownianPath path(dim, rng);
      return MechanismSession(std::move(options), Path(std::move(path)));
    }
    case MechanismKind::kLaplace: {
      if (!options.budget.l1.has_value()) {
        return absl::InvalidArgumentError(
            "laplace mechanism needs an l1 sensitivity budget");
      }
      if (!(*options.budget.l1 > 0.0)) {
        return absl::InvalidArgumentError("l1 sensitivity must be > 0");
      }
      if (!(options.eta > 0.0) || !std::isfinite(options.eta)) {
        return absl::InvalidArgumentError(absl::StrCat(
            "laplace mechanism needs eta > 0, got ", options.eta));
      }
      auto path = LaplacePath::Build(dim, options.eta, options.eta, rng);
      if (!path.ok()) return path.status();
      return MechanismSession(std::move(options), Path(*std::move(path)));
    }
    case MechanismKind::kSkellam: {
      auto path = SkellamPath::Build(dim, options.skellam_rate_plus,
                                     options.skellam_rate_minus, 0.0, rng);
      if (!path.ok()) return path.status();
      return MechanismSession(std::move(options), Path(*std::move(path)));
    }
  }
  return absl::InvalidArgumentError("unknown mechanism kind");
}

double MechanismSession::floor_time() const {
  double floor = options_.min_time;
  if (options_.kind == MechanismKind::kLaplace) {
    floor = std::max(floor, options_.eta);
  }
  return floor;
}

absl::StatusOr<double> MechanismSession::TimeForEps(double eps) const {
  if (!(eps > 0.0) || !std::isfinite(eps)) {
    return absl::InvalidArgumentError(
        absl::StrCat("target eps must be finite and > 0, got ", eps));
  }
  switch (options_.kind) {
    case MechanismKind::kBrownian:
      return options_.boundary->Invert(eps);
    case MechanismKind::kLaplace:
      return *options_.budget.l1 / eps;
    case MechanismKind::kSkellam:
      return absl::UnimplementedError(
          "skellam mechanism has no privacy accounting; request times");
  }
  return absl::InternalError("unknown mechanism kind");
}

absl::StatusOr<std::vector<double>> MechanismSession::Noise(double t) {
  switch (options_.kind) {
    case MechanismKind::kBrownian:
      return std::get<BrownianPath>(path_).Reveal(t);
    case MechanismKind::kLaplace: {
      auto& path = std::get<LaplacePath>(path_);
      if (auto s = path.Extend(t); !s.ok()) return s;
      return path.Query(t);
    }
    case MechanismKind::kSkellam: {
      auto& path = std::get<SkellamPath>(path_);
      if (auto s = path.Extend(t); !s.ok()) return s;
      auto counts = path.Query(t);
      if (!counts.ok()) return counts.status();
      return std::vector<double>(counts->begin(), counts->end());
    }
  }
  return absl::InternalError("unknown mechanism kind");
}

std::optional<ExPostReceipt> MechanismSession::MakeReceipt(size_t index,
                                                           double t) const {
  switch (options_.kind) {
    case MechanismKind::kBrownian: {
      const PrivacyBoundary& b = *options_.boundary;
      return ExPostReceipt{index, t, b(t), b.delta(), BoundaryKindName(b.kind())};
    }
    case MechanismKind::kLaplace:
      return ExPostReceipt{index, t, *options_.budget.l1 / t, 0.0,
                           "deterministic"};
    case MechanismKind::kSkellam:
      return std::nullopt;
  }
  return std::nullopt;
}

absl::StatusOr<StepRecord> MechanismSession::Step(const StepRequest& request) {
  if (halted()) {
    return absl::FailedPreconditionError(absl::StrCat(
        "session halted (", StopReasonName(stop_->reason), ")"));
  }
  double t;
  if (request.type == StepRequest::Type::kTargetEps) {
    auto mapped = TimeForEps(request.value);
    if (!mapped.ok()) {
      if (absl::IsOutOfRange(mapped.status())) {
        Finalize(StopReason::kBudgetFloor);
      }
      return mapped.status();
    }
    t = *mapped;
  } else {
    t = request.value;
    if (!(t > 0.0) || !std::isfinite(t)) {
      return absl::InvalidArgumentError(
          absl::StrCat("step time must be finite and > 0, got ", t));
    }
  }
  if (!history_.empty()) {
    const StepRecord& last = history_.back();
    if (t == last.time) return last;
    if (t > last.time) {
      return absl::FailedPreconditionError(absl::StrCat(
          "noise times must be nonincreasing: requested ", t, " after ",
          last.time));
    }
  }
  if (t < floor_time()) {
    Finalize(StopReason::kBudgetFloor);
    return absl::OutOfRangeError(absl::StrCat(
        "requested time ", t, " is below the budget floor ", floor_time()));
  }
  auto noise = Noise(t);
  if (!noise.ok()) return noise.status();
  StepRecord record;
  record.index = history_.size() + 1;
  record.time = t;
  record.iterate = *std::move(noise);
  for (size_t i = 0; i < record.iterate.size(); ++i) {
    record.iterate[i] += options_.center[i];
  }
  record.receipt = MakeReceipt(record.index, t);
  history_.push_back(record);
  return record;
}

absl::StatusOr<StopRecord> MechanismSession::RunUntil(
    std::span<const StepRequest> schedule, const StopPredicate& stop) {
  for (const StepRequest& request : schedule) {
    const size_t before = history_.size();
    auto record = Step(request);
    if (!record.ok()) {
      if (absl::IsOutOfRange(record.status()) && halted()) return *stop_;
      return record.status();
    }
    if (history_.size() == before) continue;
    if (stop && stop(std::span<const StepRecord>(history_))) {
      return Finalize(StopReason::kTargetMet, history_.size());
    }
  }
  return Finalize(StopReason::kScheduleExhausted);
}

const StopRecord& MechanismSession::Finalize(
    StopReason reason, std::optional<size_t> stopped_index) {
  if (!stop_.has_value()) {
    StopRecord& out = stop_.emplace();
    out.reason = reason;
    out.stopped_index = stopped_index;
  }
  return *stop_;
}

absl::StatusOr<std::vector<double>> MechanismSession::RealizedPrivacyLoss(
    std::span<const double> h) const {
  if (options_.kind != MechanismKind::kBrownian) {
    return absl::UnimplementedError(
        "realized privacy loss is only defined for the brownian mechanism");
  }
  if (h.size() != dim()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "h has dimension ", h.size(), ", expected ", dim()));
  }
  double h_sq = 0.0;
  for (double v : h) h_sq += v * v;
  std::vector<double> losses;
  losses.reserve(history_.size());
  for (const StepRecord& step : history_) {
    double inner = 0.0;
    for (size_t i = 0; i < dim(); ++i) {
      inner += (step.iterate[i] - options_.center[i]) * h[i];
    }
    losses.push_back(h_sq / (2.0 * step.time) + inner / step.time);
  }
  return losses;
}

absl::StatusOr<double> MechanismSession::JointPrivacyLoss(
    std::span<const double> h) const {
  if (options_.kind != MechanismKind::kBrownian) {
    return absl::UnimplementedError(
        "joint privacy loss is only defined for the brownian mechanism");
  }
  if (h.size() != dim()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "h has dimension ", h.size(), ", expected ", dim()));
  }
  if (history_.empty()) return 0.0;
  // Forward time: Y_{t_1} ~ N(c, t_1), Y_{t_k} - Y_{t_{k-1}} ~ N(0, t_k -
  // t_{k-1}) independently, with t_1 < ... < t_N.
  std::vector<const StepRecord*> forward;
  for (auto it = history_.rbegin(); it != history_.rend(); ++it) {
    forward.push_back(&*it);
  }
  std::vector<double> shifted(options_.center);
  for (size_t i = 0; i < dim(); ++i) shifted[i] -= h[i];
  const auto log_density = [&](std::span<const double> c) {
    double total = GaussianLogDensity(forward[0]->iterate, c, forward[0]->time);
    for (size_t k = 1; k < forward.size(); ++k) {
      std::vector<double> inc(dim());
      for (size_t i = 0; i < dim(); ++i) {
        inc[i] = forward[k]->iterate[i] - forward[k - 1]->iterate[i];
      }
      const std::vector<double> zero(dim(), 0.0);
      total += GaussianLogDensity(inc, zero,
                                  forward[k]->time - forward[k - 1]->time);
    }
    return total;
  };
  return log_density(options_.center) - log_density(shifted);
}

nlohmann::json ReceiptJson(const StepRecord& step) {
  nlohmann::json j;
  j["n"] = step.index;
  j["time"] = step.time;
  if (step.receipt.has_value()) {
    j["eps"] = step.receipt->eps;
    j["delta"] = step.receipt->delta;
    j["basis"] = step.receipt->basis;
  } else {
    j["eps"] = nullptr;
    j["delta"] = nullptr;
    j["basis"] = nullptr;
  }
  return j;
}

nlohmann::json StopJson(const StopRecord& stop) {
  nlohmann::json j;
  j["N"] = stop.stopped_index.has_value() ? nlohmann::json(*stop.stopped_index)
                                          : nlohmann::json(nullptr);
  j["reason"] = StopReasonName(stop.reason);
  return j;
}

nlohmann::json MechanismSession::Transcript() const {
  nlohmann::json j;
  j["kind"] = MechanismKindName(options_.kind);
  j["dim"] = dim();
  nlohmann::json steps = nlohmann::json::array();
  for (const StepRecord& step : history_) {
    nlohmann::json s = ReceiptJson(step);
    s["iterate"] = step.iterate;
    steps.push_back(std::move(s));
  }
  j["steps"] = std::move(steps);
  j["stop"] = stop_.has_value() ? StopJson(*stop_) : nlohmann::json(nullptr);
  return j;
}

}  // namespace expost
