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

// Batch experiments: loss-vs-epsilon curves and stopped-epsilon
// distributions for gradual release of ERM models.
//
// Trial i of mechanism m always draws its noise path from the stream
// (seed, m, i), so the curves, every checker of the distributions, and the
// HTTP service replay the same paths for the same seed.

#ifndef EXPOST_EXPERIMENT_H_
#define EXPOST_EXPERIMENT_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "expost/boundaries.h"
#include "expost/erm.h"
#include "expost/mechanisms.h"
#include "json.hpp"

namespace expost {

enum class CheckerKind { kPublic, kAboveThreshold, kReducedAboveThreshold };

std::string CheckerKindName(CheckerKind kind);
absl::StatusOr<CheckerKind> ParseCheckerKind(const std::string& name);

// InvalidArgument status whose message starts with "field '<name>': ".
absl::Status FieldError(const std::string& field, const std::string& message);
// The field named by a FieldError status, if any.
std::optional<std::string> ErrorField(const absl::Status& status);

struct ExperimentConfig {
  TaskKind task = TaskKind::kLogistic;
  size_t n = 2000;
  size_t d = 10;
  // When set, data is read from this CSV instead of generated; n and d are
  // taken from the file unless subsample is set.
  std::optional<std::string> csv;
  std::optional<size_t> subsample;
  std::vector<MechanismKind> mechanisms = {MechanismKind::kBrownian,
                                           MechanismKind::kLaplace};
  double eps_min = 0.05;
  double eps_max = 2.0;
  double eps_factor = 1.25;
  double tune_eps = 0.3;
  BoundaryKind boundary = BoundaryKind::kLinear;
  double delta = 1e-6;
  double reg_lambda = 0.05;
  // Stop when the loss is at most this; defaults to 0.41 (logistic) or
  // 0.025 (ridge).
  std::optional<double> threshold;
  std::vector<CheckerKind> checkers = {CheckerKind::kPublic,
                                       CheckerKind::kAboveThreshold,
                                       CheckerKind::kReducedAboveThreshold};
  double at_eps = 0.5;
  double rat_eps_max = 10.0;
  size_t trials = 200;
  uint64_t seed = 1;
  // Worker threads; 0 = hardware concurrency. Does not affect results.
  unsigned workers = 0;

  // Unknown fields and type or range violations are FieldErrors.
  static absl::StatusOr<ExperimentConfig> FromJson(const nlohmann::json& j);
  nlohmann::json ToJson() const;
  absl::Status Validate() const;

  double StopThreshold() const;
  // Geometric grid eps_min * factor^k up to eps_max, plus eps_max and
  // tune_eps; sorted, duplicates removed.
  std::vector<double> Schedule() const;
  // FNV-1a of the canonical JSON form (workers excluded).
  uint64_t Hash() const;
};

// Data, task and boundary shared by all trials.
class Experiment {
 public:
  static absl::StatusOr<Experiment> Prepare(const ExperimentConfig& config);

  const ExperimentConfig& config() const { return config_; }
  const PreparedTask& task() const { return task_; }
  const std::vector<double>& schedule() const { return schedule_; }
  const PrivacyBoundary& boundary() const { return boundary_; }

  // Session options for one mechanism; Laplace uses eta = D1 / max eps.
  SessionOptions MechanismOptions(MechanismKind kind) const;
  // The schedule entries a mechanism can serve (Brownian skips targets at or
  // below the boundary floor).
  std::vector<double> MechanismSchedule(MechanismKind kind) const;
  Rng TrialRng(MechanismKind kind, size_t trial) const;
  Rng CheckerRng(MechanismKind kind, CheckerKind checker, size_t trial) const;

 private:
  Experiment(ExperimentConfig config, PreparedTask task,
             std::vector<double> schedule, PrivacyBoundary boundary)
      : config_(std::move(config)),
        task_(std::move(task)),
        schedule_(std::move(schedule)),
        boundary_(std::move(boundary)) {}

  ExperimentConfig config_;
  PreparedTask task_;
  std::vector<double> schedule_;
  PrivacyBoundary boundary_;
};

struct CurveRow {
  MechanismKind mechanism;
  double eps;  // schedule target
  double mean_loss;
  double ci_low;  // 95% normal approximation
  double ci_high;
  size_t trials;  // trials with a finite loss at this eps
};

struct DistributionRow {
  MechanismKind mechanism;
  CheckerKind checker;
  size_t trial;
  // Charged privacy at the stop: public eps_N, above-threshold eps_N + at_eps,
  // reduced-above-threshold 2 eps_N. +inf when the schedule ran out first.
  double stopped_eps;
  std::optional<size_t> stopped_round;  // 1-based step index N
};

absl::StatusOr<std::vector<CurveRow>> ComputeCurves(
    const Experiment& experiment);
absl::StatusOr<std::vector<DistributionRow>> ComputeDistributions(
    const Experiment& experiment);

// Median stopped_eps over the rows of one (mechanism, checker) pair; trials
// that never stopped count as +inf.
double MedianStoppedEps(const std::vector<DistributionRow>& rows,
                        MechanismKind mechanism, CheckerKind checker);

// CSV with a "# ..." metadata line (command, seed, config hash), a header
// row, and shortest round-trip number formatting.
std::string CurvesToCsv(const ExperimentConfig& config,
                        const std::vector<CurveRow>& rows);
std::string DistributionsToCsv(const ExperimentConfig& config,
                               const std::vector<DistributionRow>& rows);

// Shortest decimal form that parses back to the same double.
std::string FormatDouble(double v);

}  // namespace expost

#endif  // EXPOST_EXPERIMENT_H_
