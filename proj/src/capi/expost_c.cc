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

#include "expost/expost.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "expost/boundaries.h"
#include "expost/erm.h"
#include "expost/experiment.h"
#include "expost/mechanisms.h"
#include "expost/service.h"
#include "expost/threshold.h"
#include "expost/validate.h"
#include "json.hpp"

struct expost_boundary {
  expost::PrivacyBoundary value;
};

struct expost_session {
  expost::MechanismSession value;
};

struct expost_rat {
  expost::RatSession value;
};

struct expost_server {
  std::unique_ptr<expost::HttpService> value;
};

namespace {

thread_local std::string last_error;
thread_local std::string last_error_field;

expost_status Fail(expost_status code, std::string message,
                   std::string field = "") {
  last_error = std::move(message);
  last_error_field = std::move(field);
  return code;
}

expost_status Report(const absl::Status& s) {
  if (s.ok()) {
    last_error.clear();
    last_error_field.clear();
    return EXPOST_OK;
  }
  expost_status code = EXPOST_INTERNAL;
  switch (s.code()) {
    case absl::StatusCode::kInvalidArgument:
      code = EXPOST_INVALID_ARGUMENT;
      break;
    case absl::StatusCode::kOutOfRange:
      code = EXPOST_OUT_OF_RANGE;
      break;
    case absl::StatusCode::kFailedPrecondition:
      code = EXPOST_FAILED_PRECONDITION;
      break;
    case absl::StatusCode::kUnimplemented:
      code = EXPOST_UNIMPLEMENTED;
      break;
    case absl::StatusCode::kNotFound:
      code = EXPOST_NOT_FOUND;
      break;
    case absl::StatusCode::kUnavailable:
      code = EXPOST_UNAVAILABLE;
      break;
    default:
      break;
  }
  return Fail(code, std::string(s.message()),
              expost::ErrorField(s).value_or(""));
}

expost_status Ok() { return Report(absl::OkStatus()); }

expost_status NullArgument(const char* name) {
  return Fail(EXPOST_INVALID_ARGUMENT,
              std::string(name) + " must not be NULL");
}

char* CopyString(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out != nullptr) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

absl::StatusOr<expost::ExperimentConfig> ParseConfig(const char* text) {
  if (text == nullptr || *text == '\0') return expost::ExperimentConfig{};
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    return absl::InvalidArgumentError("config is not valid JSON");
  }
  return expost::ExperimentConfig::FromJson(j);
}

expost_status OpenSession(expost::SessionOptions options, uint64_t seed,
                          uint64_t stream, expost_session** out) {
  if (out == nullptr) return NullArgument("out");
  auto session = expost::MechanismSession::Open(std::move(options),
                                                expost::Rng(seed, stream));
  if (!session.ok()) return Report(session.status());
  *out = new expost_session{*std::move(session)};
  return Ok();
}

expost_status WriteStep(const absl::StatusOr<expost::StepRecord>& step,
                        double* iterate, double* eps) {
  if (!step.ok()) return Report(step.status());
  if (iterate != nullptr) {
    std::copy(step->iterate.begin(), step->iterate.end(), iterate);
  }
  if (eps != nullptr) {
    *eps = step->receipt.has_value()
               ? step->receipt->eps
               : std::numeric_limits<double>::quiet_NaN();
  }
  return Ok();
}

expost_status WriteString(const std::string& s, char** out) {
  *out = CopyString(s);
  if (*out == nullptr) return Fail(EXPOST_INTERNAL, "out of memory");
  return Ok();
}

}  // namespace

extern "C" {

const char* expost_version(void) { return "1.0.0"; }

const char* expost_status_name(expost_status status) {
  switch (status) {
    case EXPOST_OK:
      return "ok";
    case EXPOST_INVALID_ARGUMENT:
      return "invalid_argument";
    case EXPOST_OUT_OF_RANGE:
      return "out_of_range";
    case EXPOST_FAILED_PRECONDITION:
      return "failed_precondition";
    case EXPOST_UNIMPLEMENTED:
      return "unimplemented";
    case EXPOST_NOT_FOUND:
      return "not_found";
    case EXPOST_INTERNAL:
      return "internal";
    case EXPOST_UNAVAILABLE:
      return "unavailable";
  }
  return "unknown";
}

const char* expost_last_error(void) { return last_error.c_str(); }
const char* expost_last_error_field(void) { return last_error_field.c_str(); }
void expost_string_free(char* s) { std::free(s); }

expost_status expost_boundary_linear(double a, double b, double delta,
                                     double sensitivity,
                                     expost_boundary** out) {
  if (out == nullptr) return NullArgument("out");
  auto boundary = expost::PrivacyBoundary::Linear(a, b, delta, sensitivity);
  if (!boundary.ok()) return Report(boundary.status());
  *out = new expost_boundary{*boundary};
  return Ok();
}

expost_status expost_boundary_mixture(double rho, double delta,
                                      double sensitivity,
                                      expost_boundary** out) {
  if (out == nullptr) return NullArgument("out");
  auto boundary = expost::PrivacyBoundary::Mixture(rho, delta, sensitivity);
  if (!boundary.ok()) return Report(boundary.status());
  *out = new expost_boundary{*boundary};
  return Ok();
}

expost_status expost_boundary_tune(const char* kind, double sensitivity,
                                   double delta, double target_eps,
                                   expost_boundary** out) {
  if (kind == nullptr) return NullArgument("kind");
  if (out == nullptr) return NullArgument("out");
  auto parsed = expost::ParseBoundaryKind(kind);
  if (!parsed.ok()) return Report(parsed.status());
  auto boundary =
      expost::TuneBoundary(*parsed, sensitivity, delta, target_eps);
  if (!boundary.ok()) return Report(boundary.status());
  *out = new expost_boundary{*boundary};
  return Ok();
}

expost_status expost_boundary_eval(const expost_boundary* b, double t,
                                   double* psi) {
  if (b == nullptr) return NullArgument("boundary");
  if (psi == nullptr) return NullArgument("psi");
  auto v = b->value.Eval(t);
  if (!v.ok()) return Report(v.status());
  *psi = *v;
  return Ok();
}

expost_status expost_boundary_invert(const expost_boundary* b, double eps,
                                     double* t) {
  if (b == nullptr) return NullArgument("boundary");
  if (t == nullptr) return NullArgument("t");
  auto v = b->value.Invert(eps);
  if (!v.ok()) return Report(v.status());
  *t = *v;
  return Ok();
}

double expost_boundary_floor(const expost_boundary* b) {
  return b == nullptr ? std::numeric_limits<double>::quiet_NaN()
                      : b->value.Floor();
}

expost_status expost_boundary_json(const expost_boundary* b, char** json) {
  if (b == nullptr) return NullArgument("boundary");
  if (json == nullptr) return NullArgument("json");
  return WriteString(b->value.ToJson().dump(), json);
}

void expost_boundary_free(expost_boundary* b) { delete b; }

expost_status expost_session_open_brownian(const double* center, size_t dim,
                                           const expost_boundary* boundary,
                                           uint64_t seed, uint64_t stream,
                                           expost_session** out) {
  if (center == nullptr && dim > 0) return NullArgument("center");
  if (boundary == nullptr) return NullArgument("boundary");
  expost::SessionOptions options;
  options.kind = expost::MechanismKind::kBrownian;
  options.center.assign(center, center + dim);
  options.budget.l2 = boundary->value.sensitivity();
  options.boundary = boundary->value;
  return OpenSession(std::move(options), seed, stream, out);
}

expost_status expost_session_open_laplace(const double* center, size_t dim,
                                          double l1_sensitivity, double eta,
                                          uint64_t seed, uint64_t stream,
                                          expost_session** out) {
  if (center == nullptr && dim > 0) return NullArgument("center");
  expost::SessionOptions options;
  options.kind = expost::MechanismKind::kLaplace;
  options.center.assign(center, center + dim);
  options.budget.l1 = l1_sensitivity;
  options.eta = eta;
  return OpenSession(std::move(options), seed, stream, out);
}

expost_status expost_session_open_skellam(const double* center, size_t dim,
                                          double rate_plus, double rate_minus,
                                          uint64_t seed, uint64_t stream,
                                          expost_session** out) {
  if (center == nullptr && dim > 0) return NullArgument("center");
  expost::SessionOptions options;
  options.kind = expost::MechanismKind::kSkellam;
  options.center.assign(center, center + dim);
  options.skellam_rate_plus = rate_plus;
  options.skellam_rate_minus = rate_minus;
  return OpenSession(std::move(options), seed, stream, out);
}

size_t expost_session_dim(const expost_session* s) {
  return s == nullptr ? 0 : s->value.dim();
}

expost_status expost_session_step_time(expost_session* s, double t,
                                       double* iterate, double* eps) {
  if (s == nullptr) return NullArgument("session");
  return WriteStep(s->value.Step(expost::StepRequest::Time(t)), iterate, eps);
}

expost_status expost_session_step_eps(expost_session* s, double target_eps,
                                      double* iterate, double* eps) {
  if (s == nullptr) return NullArgument("session");
  return WriteStep(s->value.Step(expost::StepRequest::TargetEps(target_eps)),
                   iterate, eps);
}

expost_status expost_session_stop(expost_session* s, char** json) {
  if (s == nullptr) return NullArgument("session");
  if (json == nullptr) return NullArgument("json");
  const expost::StopRecord& stop =
      s->value.Finalize(expost::StopReason::kScheduleExhausted);
  return WriteString(expost::StopJson(stop).dump(), json);
}

expost_status expost_session_transcript(const expost_session* s,
                                        char** json) {
  if (s == nullptr) return NullArgument("session");
  if (json == nullptr) return NullArgument("json");
  return WriteString(s->value.Transcript().dump(), json);
}

void expost_session_free(expost_session* s) { delete s; }

expost_status expost_rat_open(double eps_max, double tau, double delta_u,
                              uint64_t seed, uint64_t stream,
                              expost_rat** out) {
  if (out == nullptr) return NullArgument("out");
  auto rat = expost::RatSession::Open(eps_max, tau, delta_u,
                                      expost::Rng(seed, stream));
  if (!rat.ok()) return Report(rat.status());
  *out = new expost_rat{*std::move(rat)};
  return Ok();
}

expost_status expost_rat_step(expost_rat* r, double utility, double eps,
                              int* bit) {
  if (r == nullptr) return NullArgument("rat");
  auto result = r->value.Step(utility, eps);
  if (!result.ok()) return Report(result.status());
  if (bit != nullptr) *bit = *result ? 1 : 0;
  return Ok();
}

expost_status expost_rat_ex_post_bound(expost_rat* r, double alg_eps,
                                       double* total) {
  if (r == nullptr) return NullArgument("rat");
  if (total == nullptr) return NullArgument("total");
  auto v = r->value.ExPostBound(alg_eps);
  if (!v.ok()) return Report(v.status());
  *total = *v;
  return Ok();
}

expost_status expost_rat_transcript(const expost_rat* r, int include_noise,
                                    char** json) {
  if (r == nullptr) return NullArgument("rat");
  if (json == nullptr) return NullArgument("json");
  return WriteString(r->value.Transcript(include_noise != 0).dump(), json);
}

void expost_rat_free(expost_rat* r) { delete r; }

expost_status expost_config_canonical(const char* config_json, char** json) {
  if (json == nullptr) return NullArgument("json");
  auto config = ParseConfig(config_json);
  if (!config.ok()) return Report(config.status());
  nlohmann::json j = config->ToJson();
  j["workers"] = config->workers;
  return WriteString(j.dump(2), json);
}

expost_status expost_run_curves(const char* config_json, char** csv) {
  if (csv == nullptr) return NullArgument("csv");
  auto config = ParseConfig(config_json);
  if (!config.ok()) return Report(config.status());
  auto experiment = expost::Experiment::Prepare(*config);
  if (!experiment.ok()) return Report(experiment.status());
  auto rows = expost::ComputeCurves(*experiment);
  if (!rows.ok()) return Report(rows.status());
  return WriteString(expost::CurvesToCsv(*config, *rows), csv);
}

expost_status expost_run_distributions(const char* config_json, char** csv) {
  if (csv == nullptr) return NullArgument("csv");
  auto config = ParseConfig(config_json);
  if (!config.ok()) return Report(config.status());
  auto experiment = expost::Experiment::Prepare(*config);
  if (!experiment.ok()) return Report(experiment.status());
  auto rows = expost::ComputeDistributions(*experiment);
  if (!rows.ok()) return Report(rows.status());
  return WriteString(expost::DistributionsToCsv(*config, *rows), csv);
}

expost_status expost_run_validate(uint64_t seed, double trial_scale,
                                  char** json, int* passed) {
  if (json == nullptr) return NullArgument("json");
  if (!(trial_scale > 0.0 && trial_scale <= 1.0)) {
    return Fail(EXPOST_INVALID_ARGUMENT, "trial_scale must lie in (0, 1]",
                "trial_scale");
  }
  const nlohmann::json report = expost::RunValidationSuite(seed, trial_scale);
  if (passed != nullptr) *passed = expost::SuitePassed(report) ? 1 : 0;
  return WriteString(report.dump(2), json);
}

expost_status expost_tune(const char* kind, double sensitivity, double delta,
                          double target_eps, char** json) {
  if (json == nullptr) return NullArgument("json");
  expost_boundary* b = nullptr;
  if (expost_status s =
          expost_boundary_tune(kind, sensitivity, delta, target_eps, &b);
      s != EXPOST_OK) {
    return s;
  }
  std::unique_ptr<expost_boundary> owned(b);
  auto report = expost::TuneReport(owned->value, target_eps);
  if (!report.ok()) return Report(report.status());
  return WriteString(report->dump(2), json);
}

expost_status expost_synth_csv(const char* task, size_t n, size_t d,
                               uint64_t seed, char** csv) {
  if (task == nullptr) return NullArgument("task");
  if (csv == nullptr) return NullArgument("csv");
  auto kind = expost::ParseTaskKind(task);
  if (!kind.ok()) return Report(kind.status());
  auto data = expost::SynthGenerate(*kind, n, d, seed);
  if (!data.ok()) return Report(data.status());
  return WriteString(expost::DatasetToCsv(*data), csv);
}

expost_status expost_task_sensitivity(const char* task, size_t n, size_t d,
                                      double reg_lambda, double* l2,
                                      double* l1) {
  if (task == nullptr) return NullArgument("task");
  auto kind = expost::ParseTaskKind(task);
  if (!kind.ok()) return Report(kind.status());
  auto spec = expost::MakeTaskSpec(*kind, reg_lambda, n, d);
  if (!spec.ok()) return Report(spec.status());
  if (l2 != nullptr) *l2 = spec->l2_sensitivity();
  if (l1 != nullptr) *l1 = spec->l1_sensitivity();
  return Ok();
}

expost_status expost_load_csv(const char* path, const char* task, size_t* n,
                              size_t* d) {
  if (path == nullptr) return NullArgument("path");
  if (task == nullptr) return NullArgument("task");
  auto kind = expost::ParseTaskKind(task);
  if (!kind.ok()) return Report(kind.status());
  auto data = expost::LoadCsv(path, *kind);
  if (!data.ok()) return Report(data.status());
  if (n != nullptr) *n = data->n();
  if (d != nullptr) *d = data->d();
  return Ok();
}

expost_status expost_server_start(const char* host, int port,
                                  const char* static_dir,
                                  expost_server** out) {
  if (out == nullptr) return NullArgument("out");
  expost::ServiceOptions options;
  if (host != nullptr) options.host = host;
  options.port = port;
  if (static_dir != nullptr) options.static_dir = static_dir;
  auto service = expost::HttpService::Start(options);
  if (!service.ok()) return Report(service.status());
  *out = new expost_server{*std::move(service)};
  return Ok();
}

int expost_server_port(const expost_server* s) {
  return s == nullptr ? -1 : s->value->port();
}

void expost_server_wait(expost_server* s) {
  if (s != nullptr) s->value->Wait();
}

void expost_server_stop(expost_server* s) {
  if (s != nullptr) s->value->Stop();
}

void expost_server_free(expost_server* s) { delete s; }

}  // extern "C"
