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

// expost command-line tool. Exit codes: 0 success, 1 runtime error,
// 2 configuration error, 3 validation failure.

#include <csignal>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "expost/expost.h"
#include "json.hpp"

namespace {

using nlohmann::json;

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitValidation = 3;

int ExitFor(expost_status status) {
  switch (status) {
    case EXPOST_OK:
      return 0;
    case EXPOST_INVALID_ARGUMENT:
    case EXPOST_NOT_FOUND:
      return kExitConfig;
    default:
      return kExitRuntime;
  }
}

int Fail(expost_status status) {
  std::cerr << "error: " << expost_last_error() << "\n";
  return ExitFor(status);
}

int Emit(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << "\n";
    return 0;
  }
  std::ofstream file(out, std::ios::binary);
  file << text;
  if (!file) {
    std::cerr << "error: cannot write " << out << "\n";
    return kExitRuntime;
  }
  return 0;
}

// Experiment config assembled from --config and per-field flags; flags win.
struct ConfigSource {
  std::string path;
  json overrides = json::object();

  template <typename T>
  void Flag(CLI::App* app, const std::string& flag, const std::string& key,
            const std::string& help) {
    app->add_option_function<T>(
        flag, [this, key](const T& v) { overrides[key] = v; }, help);
  }

  void Register(CLI::App* app) {
    app->add_option("--config", path, "JSON config file (field names as flags)");
    Flag<std::string>(app, "--task", "task", "logistic or ridge");
    Flag<uint64_t>(app, "--n", "n", "synthetic sample size");
    Flag<uint64_t>(app, "--d", "d", "synthetic dimension");
    Flag<std::string>(app, "--csv", "csv", "read data from a CSV file");
    Flag<uint64_t>(app, "--subsample", "subsample", "rows kept from the CSV");
    app->add_option_function<std::vector<std::string>>(
           "--mechanisms",
           [this](const std::vector<std::string>& v) {
             overrides["mechanisms"] = v;
           },
           "comma list of brownian, laplace")
        ->delimiter(',');
    Flag<double>(app, "--eps-min", "eps_min", "smallest schedule epsilon");
    Flag<double>(app, "--eps-max", "eps_max", "largest schedule epsilon");
    Flag<double>(app, "--eps-factor", "eps_factor", "geometric schedule ratio");
    Flag<double>(app, "--tune-eps", "tune_eps", "boundary tuning target");
    Flag<std::string>(app, "--boundary", "boundary", "linear or mixture");
    Flag<double>(app, "--delta", "delta", "boundary failure probability");
    Flag<double>(app, "--reg-lambda", "reg_lambda", "ridge penalty");
    Flag<double>(app, "--threshold", "threshold", "stopping loss threshold");
    app->add_option_function<std::vector<std::string>>(
           "--checkers",
           [this](const std::vector<std::string>& v) {
             overrides["checkers"] = v;
           },
           "comma list of public, above_threshold, reduced_above_threshold")
        ->delimiter(',');
    Flag<double>(app, "--at-eps", "at_eps", "above-threshold epsilon");
    Flag<double>(app, "--rat-eps-max", "rat_eps_max",
                 "reduced above-threshold maximum epsilon");
    Flag<uint64_t>(app, "--trials", "trials", "trials per mechanism");
    Flag<uint64_t>(app, "--seed", "seed", "random seed");
    Flag<unsigned>(app, "--workers", "workers", "worker threads (0 = all)");
  }

  // Merged config as JSON text, or an error message.
  bool Build(std::string* text, std::string* error) const {
    json j = json::object();
    if (!path.empty()) {
      std::ifstream file(path);
      if (!file) {
        *error = "cannot read config file " + path;
        return false;
      }
      j = json::parse(file, nullptr, false);
      if (j.is_discarded() || !j.is_object()) {
        *error = "config file " + path + " is not a JSON object";
        return false;
      }
    }
    j.update(overrides);
    *text = j.dump();
    return true;
  }
};

int RunBatch(const ConfigSource& source, const std::string& out,
             expost_status (*run)(const char*, char**)) {
  std::string config, error;
  if (!source.Build(&config, &error)) {
    std::cerr << "error: " << error << "\n";
    return kExitConfig;
  }
  char* csv = nullptr;
  if (expost_status s = run(config.c_str(), &csv); s != EXPOST_OK) {
    return Fail(s);
  }
  const std::string text = csv;
  expost_string_free(csv);
  return Emit(text, out);
}

int RunTune(const ConfigSource& source, double sensitivity,
            const std::string& out) {
  std::string config, error;
  if (!source.Build(&config, &error)) {
    std::cerr << "error: " << error << "\n";
    return kExitConfig;
  }
  char* canonical = nullptr;
  if (expost_status s = expost_config_canonical(config.c_str(), &canonical);
      s != EXPOST_OK) {
    return Fail(s);
  }
  const json c = json::parse(canonical);
  expost_string_free(canonical);
  if (!(sensitivity > 0.0)) {
    size_t n = c["n"], d = c["d"];
    if (!c["csv"].is_null()) {
      const std::string path = c["csv"];
      const std::string task = c["task"];
      if (expost_status s = expost_load_csv(path.c_str(), task.c_str(), &n, &d);
          s != EXPOST_OK) {
        return Fail(s);
      }
      if (!c["subsample"].is_null()) n = std::min<size_t>(n, c["subsample"]);
    }
    const std::string task = c["task"];
    if (expost_status s = expost_task_sensitivity(
            task.c_str(), n, d, c["reg_lambda"], &sensitivity, nullptr);
        s != EXPOST_OK) {
      return Fail(s);
    }
  }
  const std::string kind = c["boundary"];
  char* report = nullptr;
  if (expost_status s = expost_tune(kind.c_str(), sensitivity, c["delta"],
                                    c["tune_eps"], &report);
      s != EXPOST_OK) {
    return Fail(s);
  }
  const std::string text = report;
  expost_string_free(report);
  return Emit(text, out);
}

int RunValidate(uint64_t seed, double scale, const std::string& out) {
  char* report = nullptr;
  int passed = 0;
  if (expost_status s = expost_run_validate(seed, scale, &report, &passed);
      s != EXPOST_OK) {
    return Fail(s);
  }
  const std::string text = report;
  expost_string_free(report);
  const json checks = json::parse(text);
  for (const json& c : checks) {
    std::cerr << (c["pass"].get<bool>() ? "PASS " : "FAIL ")
              << c["check"].get<std::string>() << " estimate="
              << c["estimate"].dump() << "\n";
  }
  if (int code = Emit(text, out); code != 0) return code;
  return passed ? 0 : kExitValidation;
}

int RunSynth(const std::string& task, uint64_t n, uint64_t d, uint64_t seed,
             const std::string& out) {
  char* csv = nullptr;
  if (expost_status s = expost_synth_csv(task.c_str(), n, d, seed, &csv);
      s != EXPOST_OK) {
    return Fail(s);
  }
  const std::string text = csv;
  expost_string_free(csv);
  return Emit(text, out);
}

int RunServe(const std::string& host, int port, const std::string& static_dir) {
  // Route SIGINT and SIGTERM to a waiting thread that stops the server.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  expost_server* server = nullptr;
  if (expost_status s = expost_server_start(
          host.c_str(), port, static_dir.empty() ? nullptr : static_dir.c_str(),
          &server);
      s != EXPOST_OK) {
    return Fail(s);
  }
  std::cout << "listening on http://" << host << ":"
            << expost_server_port(server) << std::endl;
  std::thread stopper([&signals, server] {
    int sig = 0;
    sigwait(&signals, &sig);
    expost_server_stop(server);
  });
  expost_server_wait(server);
  stopper.detach();
  expost_server_free(server);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"expost: gradual private release with ex-post accounting"};
  app.require_subcommand(1);
  std::string out;

  ConfigSource curves_config;
  CLI::App* curves = app.add_subcommand(
      "curves", "mean loss against epsilon for each mechanism (CSV)");
  curves_config.Register(curves);
  curves->add_option("--out", out, "output path (default stdout)");

  ConfigSource dist_config;
  CLI::App* dist = app.add_subcommand(
      "distributions", "stopped-epsilon distributions per checker (CSV)");
  dist_config.Register(dist);
  dist->add_option("--out", out, "output path (default stdout)");

  ConfigSource tune_config;
  double sensitivity = 0.0;
  CLI::App* tune = app.add_subcommand(
      "tune", "tune a boundary for the target epsilon (JSON)");
  tune_config.Register(tune);
  tune->add_option("--sensitivity", sensitivity,
                   "l2 sensitivity (default: derived from the task)");
  tune->add_option("--out", out, "output path (default stdout)");

  uint64_t validate_seed = 1;
  double scale = 1.0;
  CLI::App* validate =
      app.add_subcommand("validate", "run the statistical validation suite");
  validate->add_option("--seed", validate_seed, "random seed");
  validate->add_option("--scale", scale, "trial count multiplier in (0, 1]");
  validate->add_option("--out", out, "JSON report path (default stdout)");

  std::string synth_task = "logistic";
  uint64_t synth_n = 2000, synth_d = 10, synth_seed = 1;
  CLI::App* synth = app.add_subcommand("synth", "write a synthetic dataset");
  synth->add_option("--task", synth_task, "logistic or ridge");
  synth->add_option("--n", synth_n, "rows");
  synth->add_option("--d", synth_d, "features");
  synth->add_option("--seed", synth_seed, "random seed");
  synth->add_option("--out", out, "output path (default stdout)");

  std::string host = "127.0.0.1", static_dir;
  int port = 8080;
  CLI::App* serve = app.add_subcommand("serve", "run the HTTP session service");
  serve->add_option("--host", host, "bind address (default loopback)");
  serve->add_option("--port", port, "port (0 picks a free one)");
  serve->add_option("--static", static_dir, "directory served at /");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  if (*curves) return RunBatch(curves_config, out, expost_run_curves);
  if (*dist) return RunBatch(dist_config, out, expost_run_distributions);
  if (*tune) return RunTune(tune_config, sensitivity, out);
  if (*validate) return RunValidate(validate_seed, scale, out);
  if (*synth) return RunSynth(synth_task, synth_n, synth_d, synth_seed, out);
  if (*serve) return RunServe(host, port, static_dir);
  return kExitConfig;
}
