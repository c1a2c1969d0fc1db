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

// Local HTTP API for interactive gradual release.
//
//   POST /sessions                      open a session
//   POST /sessions/{id}/step            {"target_eps": e}
//   GET  /sessions/{id}                 state snapshot
//   POST /sessions/{id}/stop            finalize (idempotent)
//   GET  /sessions/{id}/boundary?tmin=&tmax=&points=
//
// Errors are {"code", "field"?, "message"} with status 400 (bad request,
// field named when known), 404 (unknown id), 409 (monotonicity, halted or
// budget floor) or 500.
//
// Open body. Task mode takes any experiment config field plus
//   mechanism        "brownian" | "laplace"            (required)
//   checker          "public" | "above_threshold" | "reduced_above_threshold"
//   trial            noise stream index, default 0
//   public_iterates  return released iterates, default false
//   debug_unsafe     also return the secret center and noise, default false
// Raw mode is selected by a "center" array and takes mechanism, center,
// sensitivity, delta, boundary, tune_eps, eps_max, seed, trial and the two
// flags; it has no task, so no checker.

#ifndef EXPOST_SERVICE_H_
#define EXPOST_SERVICE_H_

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>

#include "absl/status/statusor.h"

namespace httplib {
class Server;
}

namespace expost {

struct HttpResult {
  int status = 200;
  std::string body;  // JSON
};

struct ServiceSession;

// Session table and request handlers, independent of the transport.
class SessionStore {
 public:
  SessionStore();
  ~SessionStore();

  HttpResult Open(const std::string& body);
  HttpResult Step(const std::string& id, const std::string& body);
  HttpResult Get(const std::string& id);
  HttpResult Stop(const std::string& id);
  HttpResult Boundary(const std::string& id,
                      const std::map<std::string, std::string>& query);

 private:
  std::shared_ptr<ServiceSession> Find(const std::string& id);

  std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<ServiceSession>> sessions_;
  std::atomic<uint64_t> next_id_{1};
};

struct ServiceOptions {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 picks a free port
  std::optional<std::string> static_dir;
};

class HttpService {
 public:
  // Binds and starts serving on a background thread.
  static absl::StatusOr<std::unique_ptr<HttpService>> Start(
      const ServiceOptions& options);
  ~HttpService();

  int port() const { return port_; }
  // Blocks until Stop() is called from another thread.
  void Wait();
  void Stop();

 private:
  HttpService();

  std::unique_ptr<httplib::Server> server_;
  SessionStore store_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace expost

#endif  // EXPOST_SERVICE_H_
