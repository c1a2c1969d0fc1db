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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "expost/experiment.h"
#include "gtest/gtest.h"
#include "httplib.h"
#include "json.hpp"

namespace expost {
namespace {

using nlohmann::json;

constexpr char kTaskBody[] =
    R"({"mechanism": "brownian", "n": 400, "d": 4, "delta": 0.01, "seed": 5)";

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    auto service = HttpService::Start(ServiceOptions{});
    ASSERT_TRUE(service.ok()) << service.status();
    service_ = *std::move(service);
    client_ = std::make_unique<httplib::Client>("127.0.0.1", service_->port());
  }

  std::pair<int, std::string> Post(const std::string& path,
                                   const std::string& body) {
    auto res = client_->Post(path.c_str(), body, "application/json");
    if (!res) return {0, ""};
    return {res->status, res->body};
  }
  std::pair<int, std::string> Get(const std::string& path) {
    auto res = client_->Get(path.c_str());
    if (!res) return {0, ""};
    return {res->status, res->body};
  }
  std::string Open(const std::string& body) {
    auto [status, text] = Post("/sessions", body);
    EXPECT_EQ(status, 200) << text;
    return json::parse(text).value("id", "");
  }
  std::pair<int, json> Step(const std::string& id, double eps) {
    auto [status, text] =
        Post("/sessions/" + id + "/step", json{{"target_eps", eps}}.dump());
    return {status, json::parse(text)};
  }

  std::unique_ptr<HttpService> service_;
  std::unique_ptr<httplib::Client> client_;
};

TEST_F(ServiceTest, OpenReturnsDistinctIdsAndEmptyHistory) {
  const std::string a = Open(std::string(kTaskBody) + "}");
  const std::string b = Open(std::string(kTaskBody) + "}");
  EXPECT_FALSE(a.empty());
  EXPECT_NE(a, b);
  auto [status, text] = Get("/sessions/" + a);
  ASSERT_EQ(status, 200);
  const json state = json::parse(text);
  EXPECT_TRUE(state["receipts"].empty());
  EXPECT_EQ(state["state"], "active");
  EXPECT_TRUE(state["stop"].is_null());
}

TEST_F(ServiceTest, InvalidConfigNamesTheField) {
  auto [status, text] = Post(
      "/sessions", R"({"mechanism": "brownian", "center": [0.1, 0.2]})");
  EXPECT_EQ(status, 400);
  EXPECT_EQ(json::parse(text)["field"], "sensitivity");
  std::tie(status, text) = Post("/sessions", R"({"mechanism": "brownian",
                                                 "eps_factor": 0.5})");
  EXPECT_EQ(status, 400);
  EXPECT_EQ(json::parse(text)["field"], "eps_factor");
  std::tie(status, text) = Post("/sessions", R"({"n": 10})");
  EXPECT_EQ(status, 400);
  EXPECT_EQ(json::parse(text)["field"], "mechanism");
  std::tie(status, text) = Post("/sessions", "not json");
  EXPECT_EQ(status, 400);
  EXPECT_EQ(json::parse(text)["code"], "invalid_argument");
}

TEST_F(ServiceTest, UnknownIdIs404) {
  EXPECT_EQ(Get("/sessions/nope").first, 404);
  EXPECT_EQ(Post("/sessions/nope/step", R"({"target_eps": 1})").first, 404);
  EXPECT_EQ(Post("/sessions/nope/stop", "").first, 404);
  EXPECT_EQ(Get("/sessions/nope/boundary").first, 404);
}

TEST_F(ServiceTest, EqualStepIsIdempotentAndDecreaseConflicts) {
  const std::string id = Open(std::string(kTaskBody) + "}");
  const std::string path = "/sessions/" + id + "/step";
  auto first = Post(path, R"({"target_eps": 0.4})");
  auto second = Post(path, R"({"target_eps": 0.4})");
  ASSERT_EQ(first.first, 200) << first.second;
  EXPECT_EQ(first.second, second.second);
  auto lower = Post(path, R"({"target_eps": 0.35})");
  EXPECT_EQ(lower.first, 409);
  EXPECT_EQ(json::parse(lower.second)["code"], "conflict");
  EXPECT_EQ(json::parse(Get("/sessions/" + id).second)["receipts"].size(), 1u);
  auto bad = Post(path, R"({"target_eps": "big"})");
  EXPECT_EQ(bad.first, 400);
  EXPECT_EQ(json::parse(bad.second)["field"], "target_eps");
}

TEST_F(ServiceTest, SecretsStayHiddenUnlessDebugUnsafe) {
  const std::string body =
      R"({"mechanism": "laplace", "center": [123.456, -654.321],
          "sensitivity": 1.0, "eps_max": 5.0)";
  const std::string hidden = Open(body + "}");
  auto [status, step] = Step(hidden, 1.0);
  ASSERT_EQ(status, 200);
  EXPECT_FALSE(step.contains("iterate"));
  EXPECT_FALSE(step.contains("debug"));
  const std::string state = Get("/sessions/" + hidden).second;
  for (const std::string& text : {step.dump(), state}) {
    EXPECT_EQ(text.find("123.456"), std::string::npos);
    EXPECT_EQ(text.find("654.321"), std::string::npos);
    EXPECT_EQ(text.find("center"), std::string::npos);
  }
  const std::string open = Open(body + R"(, "debug_unsafe": true})");
  auto [s2, debug] = Step(open, 1.0);
  ASSERT_EQ(s2, 200);
  EXPECT_EQ(debug["debug"]["center"][0], 123.456);
  EXPECT_NEAR(debug["iterate"][0].get<double>(),
              123.456 + debug["debug"]["noise"][0].get<double>(), 1e-9);
}

TEST_F(ServiceTest, ReceiptsMatchTranscriptBytes) {
  const std::string id =
      Open(std::string(kTaskBody) + R"(, "public_iterates": true})");
  std::vector<std::string> receipts;
  for (double eps : {0.3, 0.5, 1.0}) {
    auto [status, step] = Step(id, eps);
    ASSERT_EQ(status, 200);
    receipts.push_back(step["receipt"].dump());
    EXPECT_EQ(step["iterate"].size(), 4u);
  }
  const json state = json::parse(Get("/sessions/" + id).second);
  const json& steps = state["transcript"]["steps"];
  ASSERT_EQ(steps.size(), 3u);
  for (size_t i = 0; i < 3; ++i) {
    json s = steps[i];
    s.erase("iterate");
    EXPECT_EQ(s.dump(), receipts[i]);
    EXPECT_EQ(state["receipts"][i].dump(), receipts[i]);
  }
}

TEST_F(ServiceTest, ReducedThresholdHaltsWithDoubledEpsilon) {
  // A loose threshold makes the first check pass with high probability.
  const std::string id = Open(
      std::string(kTaskBody) +
      R"(, "checker": "reduced_above_threshold", "threshold": 5.0})");
  auto [status, step] = Step(id, 1.0);
  ASSERT_EQ(status, 200);
  ASSERT_TRUE(step["rat_bit"].get<bool>());
  EXPECT_EQ(step["total_eps"].get<double>(),
            2.0 * step["receipt"]["eps"].get<double>());
  EXPECT_EQ(step["state"], "halted");
  EXPECT_EQ(step["stop"]["N"], 1);
  EXPECT_EQ(step["stop"]["reason"], "target-met");
  EXPECT_EQ(Step(id, 1.5).first, 409);
  EXPECT_EQ(Step(id, 1.0).first, 409);
}

TEST_F(ServiceTest, ReplayMatchesBatchAccounting) {
  ExperimentConfig config;
  config.n = 400;
  config.d = 4;
  config.delta = 0.01;
  config.seed = 5;
  config.trials = 6;
  config.mechanisms = {MechanismKind::kBrownian, MechanismKind::kLaplace};
  auto experiment = Experiment::Prepare(config);
  ASSERT_TRUE(experiment.ok());
  auto rows = ComputeDistributions(*experiment);
  ASSERT_TRUE(rows.ok());
  for (const DistributionRow& row : *rows) {
    json body = json::parse(std::string(kTaskBody) + "}");
    body["mechanism"] = MechanismKindName(row.mechanism);
    body["checker"] = CheckerKindName(row.checker);
    body["trial"] = row.trial;
    const std::string id = Open(body.dump());
    std::optional<size_t> stopped;
    double total = std::numeric_limits<double>::infinity();
    for (double eps : experiment->MechanismSchedule(row.mechanism)) {
      auto [status, step] = Step(id, eps);
      ASSERT_EQ(status, 200) << step.dump();
      if (step["state"] == "halted") {
        stopped = step["n"].get<size_t>();
        total = step["total_eps"].get<double>();
        break;
      }
    }
    EXPECT_EQ(stopped, row.stopped_round)
        << MechanismKindName(row.mechanism) << " "
        << CheckerKindName(row.checker) << " trial " << row.trial;
    EXPECT_EQ(total, row.stopped_eps);
  }
}

TEST_F(ServiceTest, StopIsIdempotent) {
  const std::string id = Open(std::string(kTaskBody) + "}");
  ASSERT_EQ(Step(id, 0.5).first, 200);
  auto first = Post("/sessions/" + id + "/stop", "");
  auto second = Post("/sessions/" + id + "/stop", "");
  ASSERT_EQ(first.first, 200);
  EXPECT_EQ(first.second, second.second);
  EXPECT_EQ(json::parse(first.second)["stop"]["reason"], "schedule-exhausted");
  EXPECT_EQ(Step(id, 0.6).first, 409);
}

TEST_F(ServiceTest, BoundaryListingUsesTheSessionBoundary) {
  const std::string id = Open(std::string(kTaskBody) + R"(, "boundary": "mixture"})");
  auto [status, text] =
      Get("/sessions/" + id + "/boundary?tmin=0.5&tmax=50&points=7");
  ASSERT_EQ(status, 200) << text;
  const json listing = json::parse(text);
  const json b = json::parse(Get("/sessions/" + id).second)["boundary"];
  auto boundary = PrivacyBoundary::Mixture(b["rho"], b["delta"],
                                           b["sensitivity"]);
  ASSERT_TRUE(boundary.ok());
  ASSERT_EQ(listing["points"].size(), 7u);
  EXPECT_EQ(listing["points"][0]["t"], 0.5);
  EXPECT_EQ(listing["points"][6]["t"], 50.0);
  for (const json& p : listing["points"]) {
    EXPECT_EQ(p["psi"].get<double>(), (*boundary)(p["t"].get<double>()));
  }
  EXPECT_TRUE(listing["current"].is_null());
  auto bad = Get("/sessions/" + id + "/boundary?tmin=-1");
  EXPECT_EQ(bad.first, 400);
  EXPECT_EQ(json::parse(bad.second)["field"], "tmin");
  bad = Get("/sessions/" + id + "/boundary?points=1");
  EXPECT_EQ(json::parse(bad.second)["field"], "points");
}

TEST_F(ServiceTest, ConcurrentStepsAreSerialized) {
  const std::string body =
      R"({"mechanism": "laplace", "center": [0.0], "sensitivity": 1.0,
          "eps_max": 100.0})";
  const std::string id = Open(body);
  std::vector<std::thread> threads;
  std::vector<int> statuses(16);
  for (int i = 0; i < 16; ++i) {
    threads.emplace_back([&, i] {
      httplib::Client c("127.0.0.1", service_->port());
      auto res = c.Post(("/sessions/" + id + "/step").c_str(),
                        json{{"target_eps", 1.0 + i}}.dump(),
                        "application/json");
      statuses[i] = res ? res->status : 0;
    });
  }
  for (auto& t : threads) t.join();
  for (int s : statuses) EXPECT_TRUE(s == 200 || s == 409) << s;
  const json state = json::parse(Get("/sessions/" + id).second);
  const json& receipts = state["receipts"];
  ASSERT_GE(receipts.size(), 1u);
  for (size_t i = 0; i < receipts.size(); ++i) {
    EXPECT_EQ(receipts[i]["n"], i + 1);
    if (i > 0) EXPECT_GT(receipts[i]["eps"], receipts[i - 1]["eps"]);
  }
}

TEST(HttpServiceTest, ServesStaticFiles) {
  const std::filesystem::path dir =
      std::filesystem::temp_directory_path() / "expost_static_test";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "index.html") << "<html>ok</html>";
  ServiceOptions options;
  options.static_dir = dir.string();
  auto service = HttpService::Start(options);
  ASSERT_TRUE(service.ok()) << service.status();
  httplib::Client c("127.0.0.1", (*service)->port());
  auto res = c.Get("/index.html");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->body, "<html>ok</html>");
  options.static_dir = (dir / "missing").string();
  EXPECT_FALSE(HttpService::Start(options).ok());
}

}  // namespace
}  // namespace expost
