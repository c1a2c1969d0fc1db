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

#include "expost/experiment.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <set>

#include "absl/strings/match.h"
#include "absl/strings/str_cat.h"
#include "expost/parallel.h"
#include "expost/threshold.h"

namespace expost {
namespace {

constexpr double kZ95 = 1.959963984540054;
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr uint64_t kTagMechanism = 0xe0;
constexpr uint64_t kTagChecker = 0xe1;
constexpr uint64_t kTagData = 0xe2;

// One revealed step of a trial.
struct TrajectoryPoint {
  double target_eps;
  double receipt_eps;
  double loss;  // NaN when the release could not be decoded
  size_t round;
};

absl::StatusOr<std::vector<TrajectoryPoint>> RunTrajectory(
    const Experiment& experiment, MechanismKind kind, size_t trial) {
  auto session = MechanismSession::Open(experiment.MechanismOptions(kind),
                                        experiment.TrialRng(kind, trial));
  if (!session.ok()) return session.status();
  std::vector<TrajectoryPoint> out;
  for (double eps : experiment.MechanismSchedule(kind)) {
    auto step = session->Step(StepRequest::TargetEps(eps));
    if (!step.ok()) return step.status();
    auto loss = experiment.task().ReleaseLoss(step->iterate);
    out.push_back({eps, step->receipt->eps,
                   loss.ok() ? *loss : std::numeric_limits<double>::quiet_NaN(),
                   step->index});
  }
  return out;
}

absl::StatusOr<std::vector<std::vector<TrajectoryPoint>>> RunAllTrajectories(
    const Experiment& experiment, MechanismKind kind) {
  const size_t trials = experiment.config().trials;
  std::vector<std::vector<TrajectoryPoint>> paths(trials);
  std::vector<absl::Status> errors(trials);
  ParallelFor(
      trials,
      [&](size_t i) {
        auto path = RunTrajectory(experiment, kind, i);
        if (path.ok()) {
          paths[i] = *std::move(path);
        } else {
          errors[i] = path.status();
        }
      },
      experiment.config().workers);
  for (const absl::Status& s : errors) {
    if (!s.ok()) return s;
  }
  return paths;
}

template <typename T>
absl::Status ReadNumber(const nlohmann::json& j, const std::string& key,
                        T* out) {
  if (!j.is_number()) return FieldError(key, "must be a number");
  if constexpr (std::is_integral_v<T>) {
    if (!j.is_number_unsigned() &&
        !(j.is_number_integer() && j.get<int64_t>() >= 0)) {
      return FieldError(key, "must be a nonnegative integer");
    }
  }
  *out = j.get<T>();
  return absl::OkStatus();
}

absl::Status ReadString(const nlohmann::json& j, const std::string& key,
                        std::string* out) {
  if (!j.is_string()) return FieldError(key, "must be a string");
  *out = j.get<std::string>();
  return absl::OkStatus();
}

uint64_t Fnv1a(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string Hex(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string CheckerKindName(CheckerKind kind) {
  switch (kind) {
    case CheckerKind::kPublic:
      return "public";
    case CheckerKind::kAboveThreshold:
      return "above_threshold";
    case CheckerKind::kReducedAboveThreshold:
      return "reduced_above_threshold";
  }
  return "unknown";
}

absl::StatusOr<CheckerKind> ParseCheckerKind(const std::string& name) {
  if (name == "public") return CheckerKind::kPublic;
  if (name == "above_threshold") return CheckerKind::kAboveThreshold;
  if (name == "reduced_above_threshold") {
    return CheckerKind::kReducedAboveThreshold;
  }
  return absl::InvalidArgumentError(absl::StrCat(
      "unknown checker '", name,
      "' (expected public, above_threshold or reduced_above_threshold)"));
}

absl::Status FieldError(const std::string& field, const std::string& message) {
  return absl::InvalidArgumentError(
      absl::StrCat("field '", field, "': ", message));
}

std::optional<std::string> ErrorField(const absl::Status& status) {
  const absl::string_view msg = status.message();
  if (!absl::StartsWith(msg, "field '")) return std::nullopt;
  const size_t end = msg.find('\'', 7);
  if (end == absl::string_view::npos) return std::nullopt;
  return std::string(msg.substr(7, end - 7));
}

absl::StatusOr<ExperimentConfig> ExperimentConfig::FromJson(
    const nlohmann::json& j) {
  if (!j.is_object()) {
    return absl::InvalidArgumentError("config must be a JSON object");
  }
  ExperimentConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const nlohmann::json& v = it.value();
    absl::Status s;
    if (key == "task") {
      std::string name;
      s = ReadString(v, key, &name);
      if (s.ok()) {
        auto kind = ParseTaskKind(name);
        if (!kind.ok()) return FieldError(key, std::string(kind.status().message()));
        c.task = *kind;
      }
    } else if (key == "n") {
      s = ReadNumber(v, key, &c.n);
    } else if (key == "d") {
      s = ReadNumber(v, key, &c.d);
    } else if (key == "csv") {
      if (v.is_null()) continue;
      std::string path;
      s = ReadString(v, key, &path);
      if (s.ok()) c.csv = path;
    } else if (key == "subsample") {
      if (v.is_null()) continue;
      size_t n = 0;
      s = ReadNumber(v, key, &n);
      if (s.ok()) c.subsample = n;
    } else if (key == "mechanisms" || key == "checkers") {
      if (!v.is_array()) return FieldError(key, "must be an array of strings");
      if (key == "mechanisms") c.mechanisms.clear();
      if (key == "checkers") c.checkers.clear();
      for (const auto& item : v) {
        if (!item.is_string()) {
          return FieldError(key, "must be an array of strings");
        }
        if (key == "mechanisms") {
          auto kind = ParseMechanismKind(item.get<std::string>());
          if (!kind.ok()) return FieldError(key, std::string(kind.status().message()));
          c.mechanisms.push_back(*kind);
        } else {
          auto kind = ParseCheckerKind(item.get<std::string>());
          if (!kind.ok()) return FieldError(key, std::string(kind.status().message()));
          c.checkers.push_back(*kind);
        }
      }
    } else if (key == "eps_min") {
      s = ReadNumber(v, key, &c.eps_min);
    } else if (key == "eps_max") {
      s = ReadNumber(v, key, &c.eps_max);
    } else if (key == "eps_factor") {
      s = ReadNumber(v, key, &c.eps_factor);
    } else if (key == "tune_eps") {
      s = ReadNumber(v, key, &c.tune_eps);
    } else if (key == "boundary") {
      std::string name;
      s = ReadString(v, key, &name);
      if (s.ok()) {
        auto kind = ParseBoundaryKind(name);
        if (!kind.ok()) return FieldError(key, std::string(kind.status().message()));
        c.boundary = *kind;
      }
    } else if (key == "delta") {
      s = ReadNumber(v, key, &c.delta);
    } else if (key == "reg_lambda") {
      s = ReadNumber(v, key, &c.reg_lambda);
    } else if (key == "threshold") {
      if (v.is_null()) continue;
      double t = 0.0;
      s = ReadNumber(v, key, &t);
      if (s.ok()) c.threshold = t;
    } else if (key == "at_eps") {
      s = ReadNumber(v, key, &c.at_eps);
    } else if (key == "rat_eps_max") {
      s = ReadNumber(v, key, &c.rat_eps_max);
    } else if (key == "trials") {
      s = ReadNumber(v, key, &c.trials);
    } else if (key == "seed") {
      s = ReadNumber(v, key, &c.seed);
    } else if (key == "workers") {
      s = ReadNumber(v, key, &c.workers);
    } else {
      return FieldError(key, "unknown field");
    }
    if (!s.ok()) return s;
  }
  if (auto s = c.Validate(); !s.ok()) return s;
  return c;
}

nlohmann::json ExperimentConfig::ToJson() const {
  nlohmann::json j;
  j["task"] = TaskKindName(task);
  j["n"] = n;
  j["d"] = d;
  j["csv"] = csv.has_value() ? nlohmann::json(*csv) : nullptr;
  j["subsample"] = subsample.has_value() ? nlohmann::json(*subsample) : nullptr;
  j["mechanisms"] = nlohmann::json::array();
  for (MechanismKind m : mechanisms) j["mechanisms"].push_back(MechanismKindName(m));
  j["eps_min"] = eps_min;
  j["eps_max"] = eps_max;
  j["eps_factor"] = eps_factor;
  j["tune_eps"] = tune_eps;
  j["boundary"] = BoundaryKindName(boundary);
  j["delta"] = delta;
  j["reg_lambda"] = reg_lambda;
  j["threshold"] = StopThreshold();
  j["checkers"] = nlohmann::json::array();
  for (CheckerKind k : checkers) j["checkers"].push_back(CheckerKindName(k));
  j["at_eps"] = at_eps;
  j["rat_eps_max"] = rat_eps_max;
  j["trials"] = trials;
  j["seed"] = seed;
  return j;
}

absl::Status ExperimentConfig::Validate() const {
  const auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!csv.has_value()) {
    if (n == 0) return FieldError("n", "must be positive");
    if (d == 0) return FieldError("d", "must be positive");
  }
  if (subsample.has_value() && *subsample == 0) {
    return FieldError("subsample", "must be positive");
  }
  if (mechanisms.empty()) return FieldError("mechanisms", "must not be empty");
  for (MechanismKind m : mechanisms) {
    if (m == MechanismKind::kSkellam) {
      return FieldError("mechanisms",
                        "skellam has no privacy accounting and cannot be "
                        "placed on an epsilon schedule");
    }
  }
  if (!positive(eps_min)) return FieldError("eps_min", "must be > 0");
  if (!positive(eps_max)) return FieldError("eps_max", "must be > 0");
  if (eps_max < eps_min) {
    return FieldError("eps_max", "must be >= eps_min (schedule must be "
                                 "nondecreasing)");
  }
  if (!(eps_factor > 1.0) || !std::isfinite(eps_factor)) {
    return FieldError("eps_factor", "must be > 1");
  }
  if (!positive(tune_eps)) return FieldError("tune_eps", "must be > 0");
  if (!(delta > 0.0 && delta < 1.0)) {
    return FieldError("delta", "must lie in (0, 1)");
  }
  if (!positive(reg_lambda)) return FieldError("reg_lambda", "must be > 0");
  if (threshold.has_value() && !std::isfinite(*threshold)) {
    return FieldError("threshold", "must be finite");
  }
  if (!positive(at_eps)) return FieldError("at_eps", "must be > 0");
  if (!positive(rat_eps_max)) return FieldError("rat_eps_max", "must be > 0");
  if (rat_eps_max < std::max(eps_max, tune_eps)) {
    return FieldError("rat_eps_max",
                      "must be at least the largest schedule epsilon");
  }
  if (trials == 0) return FieldError("trials", "must be >= 1");
  return absl::OkStatus();
}

double ExperimentConfig::StopThreshold() const {
  if (threshold.has_value()) return *threshold;
  return task == TaskKind::kLogistic ? 0.41 : 0.025;
}

std::vector<double> ExperimentConfig::Schedule() const {
  std::vector<double> eps;
  for (int k = 0;; ++k) {
    const double e = eps_min * std::pow(eps_factor, k);
    if (e > eps_max * (1.0 + 1e-12)) break;
    eps.push_back(e);
  }
  eps.push_back(eps_max);
  eps.push_back(tune_eps);
  std::sort(eps.begin(), eps.end());
  // Merge values that agree to rounding.
  std::vector<double> out;
  for (double e : eps) {
    if (!out.empty() && std::abs(e - out.back()) <= 1e-12 * e) continue;
    out.push_back(e);
  }
  return out;
}

uint64_t ExperimentConfig::Hash() const { return Fnv1a(ToJson().dump()); }

absl::StatusOr<Experiment> Experiment::Prepare(const ExperimentConfig& config) {
  if (auto s = config.Validate(); !s.ok()) return s;
  absl::StatusOr<Dataset> data;
  if (config.csv.has_value()) {
    data = LoadCsv(*config.csv, config.task);
    if (!data.ok()) return FieldError("csv", std::string(data.status().message()));
    if (config.subsample.has_value()) {
      data = Subsample(*data, *config.subsample,
                       StreamKey({kTagData, config.seed}));
      if (!data.ok()) {
        return FieldError("subsample", std::string(data.status().message()));
      }
    }
  } else {
    data = SynthGenerate(config.task, config.n, config.d, config.seed);
    if (!data.ok()) return data.status();
  }
  auto task = PreparedTask::Make(Normalize(*data), config.reg_lambda);
  if (!task.ok()) return task.status();
  auto boundary = TuneBoundary(config.boundary, task->spec().l2_sensitivity(),
                               config.delta, config.tune_eps);
  if (!boundary.ok()) return boundary.status();
  return Experiment(config, *std::move(task), config.Schedule(),
                    *std::move(boundary));
}

SessionOptions Experiment::MechanismOptions(MechanismKind kind) const {
  SessionOptions o;
  o.kind = kind;
  o.center = task_.center();
  if (kind == MechanismKind::kBrownian) {
    o.budget.l2 = task_.spec().l2_sensitivity();
    o.boundary = boundary_;
  } else {
    o.budget.l1 = task_.spec().l1_sensitivity();
    o.eta = task_.spec().l1_sensitivity() / schedule_.back();
  }
  return o;
}

std::vector<double> Experiment::MechanismSchedule(MechanismKind kind) const {
  if (kind != MechanismKind::kBrownian) return schedule_;
  std::vector<double> out;
  for (double eps : schedule_) {
    if (eps > boundary_.Floor() * (1.0 + 1e-9)) out.push_back(eps);
  }
  return out;
}

Rng Experiment::TrialRng(MechanismKind kind, size_t trial) const {
  return Rng(config_.seed,
             StreamKey({kTagMechanism, static_cast<uint64_t>(kind), trial}));
}

Rng Experiment::CheckerRng(MechanismKind kind, CheckerKind checker,
                           size_t trial) const {
  return Rng(config_.seed,
             StreamKey({kTagChecker, static_cast<uint64_t>(kind),
                        static_cast<uint64_t>(checker), trial}));
}

absl::StatusOr<std::vector<CurveRow>> ComputeCurves(
    const Experiment& experiment) {
  std::vector<CurveRow> rows;
  for (MechanismKind kind : experiment.config().mechanisms) {
    auto paths = RunAllTrajectories(experiment, kind);
    if (!paths.ok()) return paths.status();
    const std::vector<double> schedule = experiment.MechanismSchedule(kind);
    for (size_t k = 0; k < schedule.size(); ++k) {
      double sum = 0.0, sq = 0.0;
      size_t count = 0;
      for (const auto& path : *paths) {
        const double loss = path[k].loss;
        if (!std::isfinite(loss)) continue;
        sum += loss;
        sq += loss * loss;
        ++count;
      }
      CurveRow row{kind, schedule[k], std::numeric_limits<double>::quiet_NaN(),
                   0.0, 0.0, count};
      if (count > 0) {
        row.mean_loss = sum / count;
        double half = 0.0;
        if (count > 1) {
          const double var =
              std::max(0.0, (sq - sum * sum / count) / (count - 1));
          half = kZ95 * std::sqrt(var / count);
        }
        row.ci_low = row.mean_loss - half;
        row.ci_high = row.mean_loss + half;
      } else {
        row.ci_low = row.ci_high = row.mean_loss;
      }
      rows.push_back(row);
    }
  }
  std::sort(rows.begin(), rows.end(), [](const CurveRow& a, const CurveRow& b) {
    if (a.mechanism != b.mechanism) return a.mechanism < b.mechanism;
    return a.eps < b.eps;
  });
  return rows;
}

absl::StatusOr<std::vector<DistributionRow>> ComputeDistributions(
    const Experiment& experiment) {
  const ExperimentConfig& config = experiment.config();
  const double threshold = config.StopThreshold();
  const double delta_u = experiment.task().spec().utility_sensitivity();
  std::vector<DistributionRow> rows;
  for (MechanismKind kind : config.mechanisms) {
    auto paths = RunAllTrajectories(experiment, kind);
    if (!paths.ok()) return paths.status();
    for (CheckerKind checker : config.checkers) {
      std::vector<DistributionRow> block(config.trials);
      std::vector<absl::Status> errors(config.trials);
      ParallelFor(
          config.trials,
          [&](size_t trial) {
            const auto& path = (*paths)[trial];
            DistributionRow row{kind, checker, trial, kInf, std::nullopt};
            if (checker == CheckerKind::kPublic) {
              for (const TrajectoryPoint& p : path) {
                if (p.loss <= threshold) {
                  row.stopped_eps = p.receipt_eps;
                  row.stopped_round = p.round;
                  break;
                }
              }
            } else {
              // Utility = -loss against threshold -threshold; success means
              // loss <= threshold.
              const bool constant = checker == CheckerKind::kAboveThreshold;
              auto rat = RatSession::Open(
                  constant ? config.at_eps : config.rat_eps_max, -threshold,
                  delta_u, experiment.CheckerRng(kind, checker, trial));
              if (!rat.ok()) {
                errors[trial] = rat.status();
                return;
              }
              for (const TrajectoryPoint& p : path) {
                const double utility = std::isfinite(p.loss) ? -p.loss : -kInf;
                auto bit = rat->Step(utility,
                                     constant ? config.at_eps : p.receipt_eps);
                if (!bit.ok()) {
                  errors[trial] = bit.status();
                  return;
                }
                if (*bit) {
                  // Above-threshold: mechanism receipt + fixed test eps.
                  // Reduced: receipt + eps_N, with eps_N the receipt itself.
                  row.stopped_eps = *rat->ExPostBound(p.receipt_eps);
                  row.stopped_round = p.round;
                  break;
                }
              }
            }
            block[trial] = row;
          },
          config.workers);
      for (const absl::Status& s : errors) {
        if (!s.ok()) return s;
      }
      rows.insert(rows.end(), block.begin(), block.end());
    }
  }
  std::sort(rows.begin(), rows.end(),
            [](const DistributionRow& a, const DistributionRow& b) {
              if (a.mechanism != b.mechanism) return a.mechanism < b.mechanism;
              if (a.checker != b.checker) return a.checker < b.checker;
              return a.trial < b.trial;
            });
  return rows;
}

double MedianStoppedEps(const std::vector<DistributionRow>& rows,
                        MechanismKind mechanism, CheckerKind checker) {
  std::vector<double> values;
  for (const DistributionRow& r : rows) {
    if (r.mechanism == mechanism && r.checker == checker) {
      values.push_back(r.stopped_eps);
    }
  }
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const size_t m = values.size() / 2;
  if (values.size() % 2 == 1) return values[m];
  const double lo = values[m - 1], hi = values[m];
  if (std::isinf(lo) || std::isinf(hi)) return hi;
  return 0.5 * (lo + hi);
}

std::string FormatDouble(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto result = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, result.ptr);
}

std::string CurvesToCsv(const ExperimentConfig& config,
                        const std::vector<CurveRow>& rows) {
  std::string out = absl::StrCat("# expost curves task=", TaskKindName(config.task),
                                 " seed=", config.seed,
                                 " config_hash=", Hex(config.Hash()), "\n");
  absl::StrAppend(&out, "mechanism,eps,mean_loss,ci_low,ci_high,trials\n");
  for (const CurveRow& r : rows) {
    absl::StrAppend(&out, MechanismKindName(r.mechanism), ",",
                    FormatDouble(r.eps), ",", FormatDouble(r.mean_loss), ",",
                    FormatDouble(r.ci_low), ",", FormatDouble(r.ci_high), ",",
                    r.trials, "\n");
  }
  return out;
}

std::string DistributionsToCsv(const ExperimentConfig& config,
                               const std::vector<DistributionRow>& rows) {
  std::string out = absl::StrCat(
      "# expost distributions task=", TaskKindName(config.task),
      " seed=", config.seed, " config_hash=", Hex(config.Hash()), "\n");
  absl::StrAppend(&out, "mechanism,checker,trial,stopped_eps,stopped_round\n");
  for (const DistributionRow& r : rows) {
    absl::StrAppend(&out, MechanismKindName(r.mechanism), ",",
                    CheckerKindName(r.checker), ",", r.trial, ",",
                    FormatDouble(r.stopped_eps), ",",
                    r.stopped_round.has_value()
                        ? absl::StrCat(*r.stopped_round)
                        : std::string("NA"),
                    "\n");
  }
  return out;
}

}  // namespace expost
