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

#include "expost/service.h"

#include <chrono>
#include <cmath>
#include <ctime>
#include <limits>
#include <set>

#include "absl/strings/str_cat.h"
#include "expost/experiment.h"
#include "expost/mechanisms.h"
#include "expost/threshold.h"
#include "httplib.h"
#include "json.hpp"

namespace expost {

struct ServiceSession {
  std::mutex mu;
  std::string id;
  std::string created_at;
  MechanismKind kind;
  std::optional<CheckerKind> checker;
  bool public_iterates = false;
  bool debug_unsafe = false;
  std::shared_ptr<const Experiment> experiment;  // null in raw mode
  std::optional<PrivacyBoundary> boundary;       // Brownian
  double l1 = 0.0;                               // Laplace
  std::optional<MechanismSession> session;
  std::optional<RatSession> rat;
  double threshold = 0.0;
  double at_eps = 0.0;
  std::vector<double> targets;
  std::string last_step_body;
  std::string stop_body;
  std::optional<double> total_eps;
};

namespace {

using nlohmann::json;

constexpr uint64_t kTagRaw = 0xe3;

HttpResult Error(int status, const std::string& code, const std::string& message,
                 std::optional<std::string> field = std::nullopt) {
  json j;
  j["code"] = code;
  if (field.has_value()) j["field"] = *field;
  j["message"] = message;
  return {status, j.dump()};
}

HttpResult FromStatus(const absl::Status& s) {
  const std::string message(s.message());
  switch (s.code()) {
    case absl::StatusCode::kInvalidArgument:
    case absl::StatusCode::kUnimplemented:
      return Error(400, "invalid_argument", message, ErrorField(s));
    case absl::StatusCode::kNotFound:
      return Error(400, "invalid_argument", message, ErrorField(s));
    case absl::StatusCode::kFailedPrecondition:
      return Error(409, "conflict", message);
    case absl::StatusCode::kOutOfRange:
      return Error(409, "budget_floor", message);
    default:
      return Error(500, "internal", message);
  }
}

HttpResult Ok(const json& j) { return {200, j.dump()}; }

std::string NowUtc() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

absl::StatusOr<bool> ReadBool(const json& body, const std::string& key) {
  if (!body.contains(key)) return false;
  if (!body[key].is_boolean()) return FieldError(key, "must be a boolean");
  return body[key].get<bool>();
}

absl::StatusOr<double> ReadPositive(const json& body, const std::string& key,
                                    std::optional<double> fallback) {
  if (!body.contains(key)) {
    if (fallback.has_value()) return *fallback;
    return FieldError(key, "is required");
  }
  if (!body[key].is_number()) return FieldError(key, "must be a number");
  const double v = body[key].get<double>();
  if (!(v > 0.0) || !std::isfinite(v)) {
    return FieldError(key, "must be finite and > 0");
  }
  return v;
}

double Norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Parses the open request into a ready session; the id is assigned later.
absl::StatusOr<std::shared_ptr<ServiceSession>> BuildSession(json body) {
  if (!body.is_object()) {
    return absl::InvalidArgumentError("request body must be a JSON object");
  }
  auto out = std::make_shared<ServiceSession>();
  if (!body.contains("mechanism") || !body["mechanism"].is_string()) {
    return FieldError("mechanism", "is required (brownian or laplace)");
  }
  auto kind = ParseMechanismKind(body["mechanism"].get<std::string>());
  if (!kind.ok()) return FieldError("mechanism", std::string(kind.status().message()));
  if (*kind == MechanismKind::kSkellam) {
    return FieldError("mechanism",
                      "skellam sessions issue no receipts and cannot be "
                      "stepped by target epsilon");
  }
  out->kind = *kind;
  auto pub = ReadBool(body, "public_iterates");
  if (!pub.ok()) return pub.status();
  auto dbg = ReadBool(body, "debug_unsafe");
  if (!dbg.ok()) return dbg.status();
  out->public_iterates = *pub;
  out->debug_unsafe = *dbg;
  uint64_t trial = 0;
  if (body.contains("trial")) {
    if (!body["trial"].is_number_unsigned()) {
      return FieldError("trial", "must be a nonnegative integer");
    }
    trial = body["trial"].get<uint64_t>();
  }
  if (body.contains("checker") && !body["checker"].is_null()) {
    if (!body["checker"].is_string()) return FieldError("checker", "must be a string");
    auto checker = ParseCheckerKind(body["checker"].get<std::string>());
    if (!checker.ok()) {
      return FieldError("checker", std::string(checker.status().message()));
    }
    out->checker = *checker;
  }
  for (const char* key :
       {"mechanism", "public_iterates", "debug_unsafe", "trial", "checker"}) {
    body.erase(key);
  }

  if (body.contains("center")) {
    if (out->checker.has_value()) {
      return FieldError("checker", "raw sessions have no task to check");
    }
    static const std::set<std::string> kRawKeys = {
        "center", "sensitivity", "delta", "boundary", "tune_eps", "eps_max",
        "seed"};
    for (auto it = body.begin(); it != body.end(); ++it) {
      if (!kRawKeys.count(it.key())) {
        return FieldError(it.key(), "unknown field for a raw session");
      }
    }
    if (!body["center"].is_array() || body["center"].empty()) {
      return FieldError("center", "must be a nonempty array of numbers");
    }
    SessionOptions options;
    options.kind = out->kind;
    for (const json& v : body["center"]) {
      if (!v.is_number()) return FieldError("center", "must contain numbers");
      options.center.push_back(v.get<double>());
    }
    auto sensitivity = ReadPositive(body, "sensitivity", std::nullopt);
    if (!sensitivity.ok()) return sensitivity.status();
    uint64_t seed = 1;
    if (body.contains("seed")) {
      if (!body["seed"].is_number_unsigned()) {
        return FieldError("seed", "must be a nonnegative integer");
      }
      seed = body["seed"].get<uint64_t>();
    }
    if (out->kind == MechanismKind::kBrownian) {
      auto delta = ReadPositive(body, "delta", 1e-6);
      if (!delta.ok()) return delta.status();
      auto tune = ReadPositive(body, "tune_eps", 0.3);
      if (!tune.ok()) return tune.status();
      BoundaryKind bkind = BoundaryKind::kLinear;
      if (body.contains("boundary")) {
        if (!body["boundary"].is_string()) {
          return FieldError("boundary", "must be a string");
        }
        auto parsed = ParseBoundaryKind(body["boundary"].get<std::string>());
        if (!parsed.ok()) {
          return FieldError("boundary", std::string(parsed.status().message()));
        }
        bkind = *parsed;
      }
      auto boundary = TuneBoundary(bkind, *sensitivity, *delta, *tune);
      if (!boundary.ok()) {
        return FieldError(absl::IsInvalidArgument(boundary.status()) ? "delta"
                                                                     : "tune_eps",
                          std::string(boundary.status().message()));
      }
      options.budget.l2 = *sensitivity;
      options.boundary = *boundary;
      out->boundary = *boundary;
    } else {
      auto eps_max = ReadPositive(body, "eps_max", 10.0);
      if (!eps_max.ok()) return eps_max.status();
      options.budget.l1 = *sensitivity;
      options.eta = *sensitivity / *eps_max;
      out->l1 = *sensitivity;
    }
    auto session = MechanismSession::Open(
        options, Rng(seed, StreamKey({kTagRaw, static_cast<uint64_t>(out->kind),
                                      trial})));
    if (!session.ok()) return session.status();
    out->session = *std::move(session);
    return out;
  }

  body["mechanisms"] = json::array({MechanismKindName(out->kind)});
  body["checkers"] = out->checker.has_value()
                         ? json::array({CheckerKindName(*out->checker)})
                         : json::array({"public"});
  auto config = ExperimentConfig::FromJson(body);
  if (!config.ok()) return config.status();
  config->trials = trial + 1;
  auto experiment = Experiment::Prepare(*config);
  if (!experiment.ok()) return experiment.status();
  out->experiment = std::make_shared<const Experiment>(*std::move(experiment));
  const Experiment& e = *out->experiment;
  const SessionOptions options = e.MechanismOptions(out->kind);
  if (out->kind == MechanismKind::kBrownian) {
    out->boundary = e.boundary();
  } else {
    out->l1 = *options.budget.l1;
  }
  auto session = MechanismSession::Open(options, e.TrialRng(out->kind, trial));
  if (!session.ok()) return session.status();
  out->session = *std::move(session);
  out->threshold = config->StopThreshold();
  out->at_eps = config->at_eps;
  if (out->checker.has_value() && *out->checker != CheckerKind::kPublic) {
    const bool constant = *out->checker == CheckerKind::kAboveThreshold;
    auto rat = RatSession::Open(
        constant ? config->at_eps : config->rat_eps_max, -out->threshold,
        e.task().spec().utility_sensitivity(),
        e.CheckerRng(out->kind, *out->checker, trial));
    if (!rat.ok()) return rat.status();
    out->rat = *std::move(rat);
  }
  return out;
}

double FloorEps(const ServiceSession& s) {
  return s.boundary.has_value() ? s.boundary->Floor() : 0.0;
}

json StateJson(const ServiceSession& s) {
  const MechanismSession& m = *s.session;
  json j;
  j["id"] = s.id;
  j["created_at"] = s.created_at;
  j["mechanism"] = MechanismKindName(s.kind);
  j["checker"] = s.checker.has_value() ? json(CheckerKindName(*s.checker))
                                       : json(nullptr);
  j["task"] = s.experiment ? json(TaskKindName(s.experiment->config().task))
                           : json(nullptr);
  j["dim"] = m.dim();
  j["state"] = m.halted() ? "halted" : "active";
  j["public_iterates"] = s.public_iterates;
  j["debug_unsafe"] = s.debug_unsafe;
  j["last_target_eps"] = s.targets.empty() ? json(nullptr) : json(s.targets.back());
  j["floor_eps"] = FloorEps(s);
  if (s.boundary.has_value()) {
    j["boundary"] = s.boundary->ToJson();
  } else {
    j["boundary"] = {{"kind", "deterministic"}, {"sensitivity", s.l1}};
  }
  json receipts = json::array();
  for (const StepRecord& r : m.history()) receipts.push_back(ReceiptJson(r));
  j["receipts"] = std::move(receipts);
  j["stop"] = m.stop().has_value() ? StopJson(*m.stop()) : json(nullptr);
  j["total_eps"] = s.total_eps.has_value() ? json(*s.total_eps) : json(nullptr);
  if (s.checker.has_value()) j["threshold"] = s.threshold;
  if (s.rat.has_value()) j["threshold_check"] = s.rat->Transcript(false);
  if (s.public_iterates || s.debug_unsafe) j["transcript"] = m.Transcript();
  if (s.debug_unsafe) j["center"] = m.center();
  return j;
}

absl::StatusOr<double> QueryNumber(
    const std::map<std::string, std::string>& query, const std::string& key,
    double fallback) {
  auto it = query.find(key);
  if (it == query.end()) return fallback;
  size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(it->second, &used);
  } catch (...) {
    used = 0;
  }
  if (used == 0 || used != it->second.size() || !std::isfinite(v)) {
    return FieldError(key, "must be a number");
  }
  return v;
}

}  // namespace

SessionStore::SessionStore() = default;
SessionStore::~SessionStore() = default;

std::shared_ptr<ServiceSession> SessionStore::Find(const std::string& id) {
  std::shared_lock lock(mu_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

HttpResult SessionStore::Open(const std::string& body) {
  json parsed = json::parse(body, nullptr, false);
  if (parsed.is_discarded()) {
    return Error(400, "invalid_argument", "request body is not valid JSON");
  }
  auto session = BuildSession(std::move(parsed));
  if (!session.ok()) return FromStatus(session.status());
  std::shared_ptr<ServiceSession> s = *std::move(session);
  s->id = absl::StrCat("s", next_id_.fetch_add(1));
  s->created_at = NowUtc();
  {
    std::unique_lock lock(mu_);
    sessions_[s->id] = s;
  }
  std::lock_guard guard(s->mu);
  return Ok(StateJson(*s));
}

HttpResult SessionStore::Step(const std::string& id, const std::string& body) {
  std::shared_ptr<ServiceSession> s = Find(id);
  if (!s) return Error(404, "not_found", absl::StrCat("no session '", id, "'"));
  std::lock_guard guard(s->mu);
  json parsed = json::parse(body, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object()) {
    return Error(400, "invalid_argument", "request body must be a JSON object");
  }
  for (auto it = parsed.begin(); it != parsed.end(); ++it) {
    if (it.key() != "target_eps") {
      return Error(400, "invalid_argument", "unknown field", it.key());
    }
  }
  auto target = ReadPositive(parsed, "target_eps", std::nullopt);
  if (!target.ok()) return FromStatus(target.status());
  MechanismSession& m = *s->session;
  if (m.halted()) {
    return Error(409, "conflict",
                 absl::StrCat("session is halted (", StopReasonName(m.stop()->reason),
                              ")"));
  }
  if (!s->targets.empty()) {
    if (*target == s->targets.back()) return {200, s->last_step_body};
    if (*target < s->targets.back()) {
      return Error(409, "conflict",
                   absl::StrCat("target_eps must be nondecreasing: ", *target,
                                " < ", s->targets.back()));
    }
  }
  if (*target <= FloorEps(*s)) {
    return Error(400, "invalid_argument",
                 absl::StrCat("unattainable: the boundary never drops to ",
                              *target, " (floor ", FloorEps(*s), ")"),
                 "target_eps");
  }
  if (s->rat.has_value() && *s->checker == CheckerKind::kReducedAboveThreshold &&
      *target > s->rat->eps_max()) {
    return Error(400, "invalid_argument",
                 absl::StrCat("target_eps exceeds the threshold check's "
                              "maximum ", s->rat->eps_max()),
                 "target_eps");
  }
  const size_t before = m.history().size();
  auto step = m.Step(StepRequest::TargetEps(*target));
  if (!step.ok()) return FromStatus(step.status());
  const bool fresh = m.history().size() > before;
  const StepRecord& record = *step;
  const double eps_n = record.receipt->eps;

  json j;
  j["id"] = s->id;
  j["n"] = record.index;
  j["target_eps"] = *target;
  j["receipt"] = ReceiptJson(record);
  j["iterate_summary"] = {{"dim", record.iterate.size()},
                          {"l2_norm", Norm(record.iterate)}};
  if (s->public_iterates || s->debug_unsafe) j["iterate"] = record.iterate;
  if (s->debug_unsafe) {
    std::vector<double> noise = record.iterate;
    for (size_t i = 0; i < noise.size(); ++i) noise[i] -= m.center()[i];
    j["debug"] = {{"center", m.center()}, {"noise", noise}};
  }
  if (s->checker.has_value() && fresh) {
    auto loss = s->experiment->task().ReleaseLoss(record.iterate);
    const double l = loss.ok() ? *loss : std::numeric_limits<double>::quiet_NaN();
    if (*s->checker == CheckerKind::kPublic) {
      j["loss"] = std::isfinite(l) ? json(l) : json(nullptr);
      const bool met = l <= s->threshold;
      j["below_threshold"] = met;
      if (met) {
        s->total_eps = eps_n;
        m.Finalize(StopReason::kTargetMet, record.index);
      }
    } else {
      const bool constant = *s->checker == CheckerKind::kAboveThreshold;
      const double utility =
          std::isfinite(l) ? -l : -std::numeric_limits<double>::infinity();
      auto bit = s->rat->Step(utility, constant ? s->at_eps : eps_n);
      if (!bit.ok()) return FromStatus(bit.status());
      j["rat_bit"] = *bit;
      if (*bit) {
        s->total_eps = *s->rat->ExPostBound(eps_n);
        m.Finalize(StopReason::kTargetMet, record.index);
      }
    }
  }
  j["total_eps"] = s->total_eps.has_value() ? json(*s->total_eps) : json(nullptr);
  j["state"] = m.halted() ? "halted" : "active";
  j["stop"] = m.stop().has_value() ? StopJson(*m.stop()) : json(nullptr);
  s->targets.push_back(*target);
  s->last_step_body = j.dump();
  return {200, s->last_step_body};
}

HttpResult SessionStore::Get(const std::string& id) {
  std::shared_ptr<ServiceSession> s = Find(id);
  if (!s) return Error(404, "not_found", absl::StrCat("no session '", id, "'"));
  std::lock_guard guard(s->mu);
  return Ok(StateJson(*s));
}

HttpResult SessionStore::Stop(const std::string& id) {
  std::shared_ptr<ServiceSession> s = Find(id);
  if (!s) return Error(404, "not_found", absl::StrCat("no session '", id, "'"));
  std::lock_guard guard(s->mu);
  if (s->stop_body.empty()) {
    MechanismSession& m = *s->session;
    m.Finalize(StopReason::kScheduleExhausted);
    json j;
    j["id"] = s->id;
    j["state"] = "halted";
    j["stop"] = StopJson(*m.stop());
    j["steps"] = m.history().size();
    j["last_receipt"] = m.history().empty() ? json(nullptr)
                                            : ReceiptJson(m.history().back());
    j["total_eps"] =
        s->total_eps.has_value() ? json(*s->total_eps) : json(nullptr);
    s->stop_body = j.dump();
  }
  return {200, s->stop_body};
}

HttpResult SessionStore::Boundary(
    const std::string& id, const std::map<std::string, std::string>& query) {
  std::shared_ptr<ServiceSession> s = Find(id);
  if (!s) return Error(404, "not_found", absl::StrCat("no session '", id, "'"));
  std::lock_guard guard(s->mu);
  const MechanismSession& m = *s->session;
  const double anchor = s->boundary.has_value()
                            ? s->boundary->sensitivity() * s->boundary->sensitivity()
                            : m.floor_time();
  auto tmin = QueryNumber(query, "tmin", anchor * 1e-2);
  if (!tmin.ok()) return FromStatus(tmin.status());
  auto tmax = QueryNumber(query, "tmax", anchor * 1e3);
  if (!tmax.ok()) return FromStatus(tmax.status());
  auto points = QueryNumber(query, "points", 100);
  if (!points.ok()) return FromStatus(points.status());
  if (!(*tmin > 0.0)) {
    return Error(400, "invalid_argument", "must be > 0", "tmin");
  }
  if (!(*tmax > *tmin)) {
    return Error(400, "invalid_argument", "must exceed tmin", "tmax");
  }
  if (*points != std::floor(*points) || *points < 2 || *points > 10000) {
    return Error(400, "invalid_argument", "must be an integer in [2, 10000]",
                 "points");
  }
  const int n = static_cast<int>(*points);
  json list = json::array();
  const double step = std::log(*tmax / *tmin) / (n - 1);
  for (int i = 0; i < n; ++i) {
    const double t = i == n - 1 ? *tmax : *tmin * std::exp(i * step);
    const double psi = s->boundary.has_value() ? (*s->boundary)(t) : s->l1 / t;
    list.push_back({{"t", t}, {"psi", psi}});
  }
  json j;
  j["id"] = s->id;
  j["kind"] = s->boundary.has_value() ? BoundaryKindName(s->boundary->kind())
                                      : std::string("deterministic");
  j["floor_eps"] = FloorEps(*s);
  j["points"] = std::move(list);
  if (m.history().empty()) {
    j["current"] = nullptr;
  } else {
    const StepRecord& last = m.history().back();
    j["current"] = {{"t", last.time}, {"eps", last.receipt->eps}};
  }
  return Ok(j);
}

HttpService::HttpService() : server_(std::make_unique<httplib::Server>()) {}

HttpService::~HttpService() {
  Stop();
  if (thread_.joinable()) thread_.join();
}

absl::StatusOr<std::unique_ptr<HttpService>> HttpService::Start(
    const ServiceOptions& options) {
  std::unique_ptr<HttpService> service(new HttpService());
  httplib::Server& server = *service->server_;
  SessionStore& store = service->store_;
  const auto reply = [](httplib::Response& res, const HttpResult& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  server.Post("/sessions", [&store, reply](const httplib::Request& req,
                                           httplib::Response& res) {
    reply(res, store.Open(req.body));
  });
  server.Post(R"(/sessions/([^/]+)/step)",
              [&store, reply](const httplib::Request& req,
                              httplib::Response& res) {
                reply(res, store.Step(req.matches[1], req.body));
              });
  server.Post(R"(/sessions/([^/]+)/stop)",
              [&store, reply](const httplib::Request& req,
                              httplib::Response& res) {
                reply(res, store.Stop(req.matches[1]));
              });
  server.Get(R"(/sessions/([^/]+)/boundary)",
             [&store, reply](const httplib::Request& req,
                             httplib::Response& res) {
               std::map<std::string, std::string> query;
               for (const auto& [k, v] : req.params) query[k] = v;
               reply(res, store.Boundary(req.matches[1], query));
             });
  server.Get(R"(/sessions/([^/]+))",
             [&store, reply](const httplib::Request& req,
                             httplib::Response& res) {
               reply(res, store.Get(req.matches[1]));
             });
  if (options.static_dir.has_value() &&
      !server.set_mount_point("/", *options.static_dir)) {
    return absl::NotFoundError(
        absl::StrCat("static directory not found: ", *options.static_dir));
  }
  if (options.port < 0 || options.port > 65535) {
    return absl::InvalidArgumentError(
        absl::StrCat("port must lie in [0, 65535], got ", options.port));
  }
  if (options.port == 0) {
    service->port_ = server.bind_to_any_port(options.host);
  } else if (server.bind_to_port(options.host, options.port)) {
    service->port_ = options.port;
  } else {
    service->port_ = -1;
  }
  if (service->port_ <= 0) {
    return absl::UnavailableError(absl::StrCat(
        "cannot bind ", options.host, ":", options.port));
  }
  service->thread_ = std::thread([&server] { server.listen_after_bind(); });
  server.wait_until_ready();
  return service;
}

void HttpService::Wait() {
  if (thread_.joinable()) thread_.join();
}

void HttpService::Stop() {
  if (server_) server_->stop();
}

}  // namespace expost
