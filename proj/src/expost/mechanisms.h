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

// Noise-reduction mechanisms as interactive sessions.
//
// A session hides a center f(x) and a noise path. Each step reveals
// f(x) + noise(T_n) at a time T_n no larger than the previous one and issues
// an ex-post receipt:
//
//   Brownian:  eps_n = psi(T_n), delta = boundary delta
//   Laplace:   eps_n = D1 / T_n, delta = 0
//   Skellam:   no receipt (no privacy analysis is available)
//
// A session is a single logical actor; callers serialize steps.

#ifndef EXPOST_MECHANISMS_H_
#define EXPOST_MECHANISMS_H_

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "expost/boundaries.h"
#include "expost/random.h"
#include "expost/stochastic.h"
#include "json.hpp"

namespace expost {

enum class MechanismKind { kBrownian, kLaplace, kSkellam };

std::string MechanismKindName(MechanismKind kind);
absl::StatusOr<MechanismKind> ParseMechanismKind(const std::string& name);

struct SensitivityBudget {
  std::optional<double> l2;  // Brownian
  std::optional<double> l1;  // Laplace
};

struct ExPostReceipt {
  size_t step = 0;  // 1-based
  double time = 0.0;
  double eps = 0.0;
  double delta = 0.0;
  std::string basis;  // boundary kind name, or "deterministic"
};

enum class StopReason { kTargetMet, kScheduleExhausted, kBudgetFloor };

std::string StopReasonName(StopReason reason);

struct StopRecord {
  std::optional<size_t> stopped_index;  // N; absent if never met
  StopReason reason = StopReason::kScheduleExhausted;
};

struct StepRecord {
  size_t index = 0;  // 1-based
  double time = 0.0;
  std::vector<double> iterate;
  std::optional<ExPostReceipt> receipt;
};

// Either an explicit noise time or a target epsilon mapped to a time through
// the mechanism's accounting (boundary inverse, or D1 / eps).
struct StepRequest {
  enum class Type { kTime, kTargetEps };
  Type type;
  double value;

  static StepRequest Time(double t) { return {Type::kTime, t}; }
  static StepRequest TargetEps(double eps) { return {Type::kTargetEps, eps}; }
};

struct SessionOptions {
  MechanismKind kind = MechanismKind::kBrownian;
  std::vector<double> center;
  SensitivityBudget budget;
  std::optional<PrivacyBoundary> boundary;  // Brownian only
  // Laplace: smallest supported time (required, > 0).
  double eta = 0.0;
  // Optional minimum time for every kind; requests below it halt the session
  // with reason budget-floor.
  double min_time = 0.0;
  double skellam_rate_plus = 1.0;
  double skellam_rate_minus = 1.0;
};

// Predicate over the revealed prefix of a session.
using StopPredicate = std::function<bool(std::span<const StepRecord>)>;

class MechanismSession {
 public:
  static absl::StatusOr<MechanismSession> Open(SessionOptions options,
                                               Rng rng);

  // Reveals center + noise at the requested time. A request at the previous
  // step's time returns that step again (no new privacy loss, nothing is
  // appended). Errors: halted session, time above the previous time
  // (FailedPrecondition); time below the floor (OutOfRange, and the session
  // halts with reason budget-floor).
  absl::StatusOr<StepRecord> Step(const StepRequest& request);

  // Steps through `schedule`, evaluating `stop` on the revealed prefix after
  // each step. Stops at the first index where it holds (target-met), when a
  // request hits the floor (budget-floor), or when the schedule runs out.
  absl::StatusOr<StopRecord> RunUntil(std::span<const StepRequest> schedule,
                                      const StopPredicate& stop);

  // Marks the session finished with the given reason and stopping index N.
  // The first call wins; later calls return the same record.
  const StopRecord& Finalize(
      StopReason reason, std::optional<size_t> stopped_index = std::nullopt);

  // Maps a target epsilon to the noise time this session would use.
  absl::StatusOr<double> TimeForEps(double eps) const;

  // ---- Validation-only oracles. These read the secret center and so break
  // the privacy abstraction; never expose them to an analyst.

  // L_n = |h|^2 / (2 T_n) + <noise_n, h> / T_n for every step, where h =
  // f(x) - f(x') and noise_n = iterate_n - center. Brownian only.
  absl::StatusOr<std::vector<double>> RealizedPrivacyLoss(
      std::span<const double> h) const;
  // Log-ratio of the joint density of every revealed iterate under centers
  // f(x) and f(x) - h, computed from the Gaussian-increment factorization of
  // the path in forward time. Equals the last realized loss.
  absl::StatusOr<double> JointPrivacyLoss(std::span<const double> h) const;
  const std::vector<double>& center() const { return options_.center; }

  MechanismKind kind() const { return options_.kind; }
  size_t dim() const { return options_.center.size(); }
  const SessionOptions& options() const { return options_; }
  const std::vector<StepRecord>& history() const { return history_; }
  bool halted() const { return stop_.has_value(); }
  const std::optional<StopRecord>& stop() const { return stop_; }
  double floor_time() const;

  // {kind, dim, steps: [{n, time, eps, delta, iterate}], stop: {N, reason}}.
  nlohmann::json Transcript() const;

 private:
  using Path = std::variant<BrownianPath, LaplacePath, SkellamPath>;

  MechanismSession(SessionOptions options, Path path)
      : options_(std::move(options)), path_(std::move(path)) {}

  absl::StatusOr<std::vector<double>> Noise(double t);
  std::optional<ExPostReceipt> MakeReceipt(size_t index, double t) const;

  SessionOptions options_;
  Path path_;
  std::vector<StepRecord> history_;
  std::optional<StopRecord> stop_;
};

// {n, time, eps, delta} for a step; eps and delta are null when there is no
// receipt. Shared by transcripts and the HTTP service.
nlohmann::json ReceiptJson(const StepRecord& step);
nlohmann::json StopJson(const StopRecord& stop);

}  // namespace expost

#endif  // EXPOST_MECHANISMS_H_
