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

#include "expost/validate.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>

#include "absl/strings/str_cat.h"
#include "expost/mechanisms.h"
#include "expost/parallel.h"
#include "expost/random.h"
#include "expost/stochastic.h"
#include "expost/threshold.h"

namespace expost {
namespace {

constexpr size_t kMinCrossingTrials = 1000;
constexpr size_t kMinKsSamples = 100;
constexpr size_t kMinCfSamples = 1000;
constexpr int kKolmogorovTerms = 100;
constexpr int kBootstrapResamples = 200;

// Domain tags for stream keys.
constexpr uint64_t kTagCrossing = 0xc0;
constexpr uint64_t kTagLine = 0xc1;
constexpr uint64_t kTagBootstrap = 0xc2;
constexpr uint64_t kTagSuite = 0xc3;

double ToUnit(uint32_t hi, uint32_t lo) {
  const uint64_t bits = (static_cast<uint64_t>(hi) << 32) | lo;
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

// Standard normals addressed by (trial, segment, level, index). Box-Muller on
// one Philox block yields the pair (2m, 2m + 1).
class AddressedNormals {
 public:
  AddressedNormals(uint64_t seed, uint64_t trial)
      : key_{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)},
        trial_(static_cast<uint32_t>(StreamKey({kTagLine, trial}))) {}

  double Get(uint32_t segment, uint32_t level, uint32_t index) {
    const uint32_t pair = index >> 1;
    if (!(cached_ && segment == segment_ && level == level_ &&
          pair == pair_)) {
      const auto block = Philox4x32({pair, segment, level, trial_}, key_);
      const double u1 = ToUnit(block[0], block[1]);
      const double u2 = ToUnit(block[2], block[3]);
      const double r = std::sqrt(-2.0 * std::log(u1));
      z0_ = r * std::cos(2.0 * std::numbers::pi * u2);
      z1_ = r * std::sin(2.0 * std::numbers::pi * u2);
      segment_ = segment;
      level_ = level;
      pair_ = pair;
      cached_ = true;
    }
    return (index & 1) ? z1_ : z0_;
  }

 private:
  std::array<uint32_t, 2> key_;
  uint32_t trial_;
  bool cached_ = false;
  uint32_t segment_ = 0, level_ = 0, pair_ = 0;
  double z0_ = 0.0, z1_ = 0.0;
};

bool PathCrossesLine(double a, double b, double horizon, int levels,
                     uint64_t seed, uint64_t trial, std::vector<double>& v) {
  AddressedNormals normals(seed, trial);
  const size_t points = (size_t{1} << levels);
  const double dt = 1.0 / static_cast<double>(points);
  const uint32_t segments = static_cast<uint32_t>(std::ceil(horizon));
  double start = 0.0;
  v.assign(points + 1, 0.0);
  for (uint32_t k = 0; k < segments; ++k) {
    const double end = start + normals.Get(k, 0, 0);
    v[0] = start;
    v[points] = end;
    const auto crosses = [&](size_t i) {
      const double t = k + static_cast<double>(i) * dt;
      return t <= horizon && v[i] >= a * t + b;
    };
    if (crosses(points)) return true;
    for (int level = 1; level <= levels; ++level) {
      const size_t stride = points >> level;
      // Neighbors at the previous level are 2 * stride apart, an interval of
      // length 2 * stride * dt; the bridge midpoint has variance len / 4.
      const double sd = std::sqrt(0.5 * static_cast<double>(stride) * dt);
      const size_t count = size_t{1} << (level - 1);
      for (size_t m = 0; m < count; ++m) {
        const size_t idx = stride * (2 * m + 1);
        v[idx] = 0.5 * (v[idx - stride] + v[idx + stride]) +
                 sd * normals.Get(k, static_cast<uint32_t>(level),
                                  static_cast<uint32_t>(m));
        if (crosses(idx)) return true;
      }
    }
    start = end;
  }
  return false;
}

nlohmann::json Check(const std::string& name, nlohmann::json params,
                     double estimate, double se, const std::string& bound,
                     bool pass) {
  nlohmann::json j;
  j["check"] = name;
  j["params"] = std::move(params);
  j["estimate"] = estimate;
  j["se"] = se;
  j["bound"] = bound;
  j["pass"] = pass;
  return j;
}

size_t Scaled(size_t n, double scale, size_t floor) {
  return std::max(floor, static_cast<size_t>(std::llround(n * scale)));
}

}  // namespace

McEstimate McEstimate::FromCount(size_t hits, size_t trials) {
  McEstimate e;
  e.trials = trials;
  e.estimate = trials == 0 ? 0.0 : static_cast<double>(hits) / trials;
  e.se = trials == 0 ? 0.0
                     : std::sqrt(e.estimate * (1.0 - e.estimate) / trials);
  return e;
}

double NormalCdf(double x, double variance) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0 * variance));
}

double LaplaceCdf(double x, double scale) {
  return x < 0 ? 0.5 * std::exp(x / scale) : 1.0 - 0.5 * std::exp(-x / scale);
}

absl::StatusOr<McEstimate> McBoundaryCrossing(
    const PrivacyBoundary& boundary, double sensitivity,
    std::span<const double> time_grid, size_t trials, uint64_t seed) {
  if (trials < kMinCrossingTrials) {
    return absl::FailedPreconditionError(absl::StrCat(
        "boundary crossing needs at least ", kMinCrossingTrials,
        " trials, got ", trials));
  }
  if (!(sensitivity >= 0.0)) {
    return absl::InvalidArgumentError("sensitivity must be >= 0");
  }
  if (time_grid.empty()) return absl::InvalidArgumentError("empty time grid");
  for (size_t i = 0; i < time_grid.size(); ++i) {
    if (!(time_grid[i] > 0.0) || (i > 0 && !(time_grid[i] < time_grid[i - 1]))) {
      return absl::InvalidArgumentError(
          "time grid must be positive and strictly decreasing");
    }
  }
  std::vector<double> psi(time_grid.size());
  for (size_t i = 0; i < psi.size(); ++i) psi[i] = boundary(time_grid[i]);

  std::vector<uint8_t> crossed(trials, 0);
  std::atomic<bool> failed{false};
  const std::vector<double> h = {sensitivity};
  ParallelFor(trials, [&](size_t trial) {
    SessionOptions options;
    options.center = {0.0};
    options.budget.l2 = boundary.sensitivity();
    options.boundary = boundary;
    auto session = MechanismSession::Open(
        options, Rng(seed, StreamKey({kTagCrossing, trial})));
    if (!session.ok()) {
      failed = true;
      return;
    }
    for (double t : time_grid) {
      if (!session->Step(StepRequest::Time(t)).ok()) {
        failed = true;
        return;
      }
    }
    auto losses = session->RealizedPrivacyLoss(h);
    if (!losses.ok()) {
      failed = true;
      return;
    }
    for (size_t i = 0; i < losses->size(); ++i) {
      if ((*losses)[i] > psi[i]) {
        crossed[trial] = 1;
        return;
      }
    }
  });
  if (failed) return absl::InternalError("boundary crossing simulation failed");
  size_t hits = 0;
  for (uint8_t c : crossed) hits += c;
  return McEstimate::FromCount(hits, trials);
}

double SingleTimeCrossingProbability(const PrivacyBoundary& boundary,
                                     double sensitivity, double t) {
  if (sensitivity == 0.0) return 0.0;
  const double mean = sensitivity * sensitivity / (2.0 * t);
  const double sd = sensitivity / std::sqrt(t);
  return 0.5 * std::erfc((boundary(t) - mean) / (sd * std::sqrt(2.0)));
}

absl::StatusOr<McEstimate> LineCrossingCheck(double a, double b,
                                             double horizon, double grid_step,
                                             size_t trials, uint64_t seed) {
  if (!(a > 0.0) || !(b > 0.0)) {
    return absl::InvalidArgumentError("line crossing needs a, b > 0");
  }
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    return absl::InvalidArgumentError("horizon must be finite and > 0");
  }
  if (!(grid_step > 0.0) || grid_step > 1.0) {
    return absl::InvalidArgumentError("grid_step must lie in (0, 1]");
  }
  if (trials == 0) return absl::InvalidArgumentError("trials must be > 0");
  int levels = 0;
  while (std::ldexp(1.0, -levels) > grid_step) ++levels;
  if (levels > 24) return absl::InvalidArgumentError("grid_step too small");

  std::vector<uint8_t> crossed(trials, 0);
  ParallelFor(trials, [&](size_t trial) {
    thread_local std::vector<double> buffer;
    crossed[trial] =
        PathCrossesLine(a, b, horizon, levels, seed, trial, buffer) ? 1 : 0;
  });
  size_t hits = 0;
  for (uint8_t c : crossed) hits += c;
  return McEstimate::FromCount(hits, trials);
}

double KolmogorovSurvival(double x) {
  if (x <= 0.0) return 1.0;
  // The alternating series is accurate to double precision here; below it
  // Q(x) is 1 to within 1e-10.
  if (x < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= kKolmogorovTerms; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    sum += (k % 2 == 1) ? term : -term;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

absl::StatusOr<KsResult> KsTest(std::span<const double> samples,
                                const std::function<double(double)>& cdf) {
  if (samples.size() < kMinKsSamples) {
    return absl::FailedPreconditionError(absl::StrCat(
        "KS test needs at least ", kMinKsSamples, " samples, got ",
        samples.size()));
  }
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf(sorted[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return KsResult{d, KolmogorovSurvival(std::sqrt(n) * d)};
}

absl::StatusOr<CfEstimate> EmpiricalCf(std::span<const double> samples,
                                       double lambda, uint64_t seed) {
  if (samples.size() < kMinCfSamples) {
    return absl::FailedPreconditionError(absl::StrCat(
        "empirical characteristic function needs at least ", kMinCfSamples,
        " samples, got ", samples.size()));
  }
  const size_t n = samples.size();
  std::vector<double> c(n), s(n);
  double re = 0.0, im = 0.0;
  for (size_t i = 0; i < n; ++i) {
    c[i] = std::cos(lambda * samples[i]);
    s[i] = std::sin(lambda * samples[i]);
    re += c[i];
    im += s[i];
  }
  CfEstimate out;
  out.re = re / n;
  out.im = im / n;
  Rng rng(seed, StreamKey({kTagBootstrap}));
  double sum_re = 0, sq_re = 0, sum_im = 0, sq_im = 0;
  for (int r = 0; r < kBootstrapResamples; ++r) {
    double br = 0.0, bi = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const size_t j = static_cast<size_t>(rng() % n);
      br += c[j];
      bi += s[j];
    }
    br /= n;
    bi /= n;
    sum_re += br;
    sq_re += br * br;
    sum_im += bi;
    sq_im += bi * bi;
  }
  const double k = kBootstrapResamples;
  out.se_re = std::sqrt(std::max(0.0, (sq_re - sum_re * sum_re / k) / (k - 1)));
  out.se_im = std::sqrt(std::max(0.0, (sq_im - sum_im * sum_im / k) / (k - 1)));
  return out;
}

nlohmann::json RunValidationSuite(uint64_t seed, double trial_scale) {
  nlohmann::json report = nlohmann::json::array();
  const auto sub_seed = [seed](uint64_t tag) {
    return StreamKey({kTagSuite, seed, tag});
  };

  // Brownian marginals before and after a reverse-time query.
  {
    const size_t n = Scaled(100000, trial_scale, 1000);
    std::vector<double> first(n), second(n);
    const uint64_t s = sub_seed(1);
    ParallelFor(n, [&](size_t i) {
      BrownianPath path(1, Rng(s, i));
      first[i] = (*path.Reveal(1.0))[0];
      second[i] = (*path.Reveal(0.5))[0];
    });
    for (auto [name, data, var] :
         {std::tuple{"brownian_marginal_t1", &first, 1.0},
          std::tuple{"brownian_marginal_t0.5_after_t1", &second, 0.5}}) {
      auto ks = *KsTest(*data, [var = var](double x) { return NormalCdf(x, var); });
      report.push_back(Check(name,
                             {{"samples", n}, {"variance", var}, {"seed", s}},
                             ks.p_value, 0.0, "ks p-value > 1e-3",
                             ks.p_value > 1e-3));
    }
  }

  // Laplace process marginals and increment characteristic function.
  {
    const size_t n = Scaled(100000, trial_scale, 1000);
    const double eta = 0.1;
    const std::vector<double> times = {0.1, 0.5, 1.0};
    std::vector<std::vector<double>> values(times.size(), std::vector<double>(n));
    const uint64_t s = sub_seed(2);
    ParallelFor(n, [&](size_t i) {
      auto path = *LaplacePath::Build(1, eta, 1.0, Rng(s, i));
      for (size_t k = 0; k < times.size(); ++k) {
        values[k][i] = (*path.Query(times[k]))[0];
      }
    });
    for (size_t k = 0; k < times.size(); ++k) {
      const double t = times[k];
      auto ks = *KsTest(values[k], [t](double x) { return LaplaceCdf(x, t); });
      report.push_back(Check(absl::StrCat("laplace_marginal_t", t),
                             {{"samples", n}, {"eta", eta}, {"seed", s}},
                             ks.p_value, 0.0, "ks p-value > 1e-3",
                             ks.p_value > 1e-3));
    }
    std::vector<double> increments(n);
    for (size_t i = 0; i < n; ++i) increments[i] = values[2][i] - values[0][i];
    for (double lambda : {0.5, 1.0, 2.0}) {
      auto cf = *EmpiricalCf(increments, lambda, s);
      const double expected =
          (1 + lambda * lambda * eta * eta) / (1 + lambda * lambda);
      const bool pass = std::abs(cf.re - expected) <= 5 * cf.se_re;
      report.push_back(Check(
          absl::StrCat("laplace_increment_cf_lambda", lambda),
          {{"samples", n}, {"eta", eta}, {"t", 1.0}, {"expected", expected},
           {"seed", s}},
          cf.re, cf.se_re, "|re - expected| <= 5 se", pass));
    }
  }

  // Noise-reduction identity on random sessions.
  {
    const size_t n = Scaled(1000, trial_scale, 50);
    const uint64_t s = sub_seed(3);
    std::vector<double> gaps(n, 0.0);
    ParallelFor(n, [&](size_t i) {
      Rng rng(s, i);
      const size_t dim = 1 + rng() % 5;
      const size_t steps = 1 + rng() % 6;
      std::vector<double> center(dim), h(dim);
      for (size_t j = 0; j < dim; ++j) {
        center[j] = rng.StandardNormal();
        h[j] = 0.5 * rng.StandardNormal();
      }
      SessionOptions options;
      options.center = center;
      options.budget.l2 = 1.0;
      options.boundary = *PrivacyBoundary::Mixture(1.0, 0.05, 1.0);
      auto session = *MechanismSession::Open(options, rng.Split(1));
      double t = 10.0 * rng.Uniform();
      for (size_t k = 0; k < steps; ++k) {
        (void)session.Step(StepRequest::Time(t));
        t *= 0.1 + 0.85 * rng.Uniform();
      }
      gaps[i] = std::abs(*session.JointPrivacyLoss(h) -
                         session.RealizedPrivacyLoss(h)->back());
    });
    const auto worst = std::max_element(gaps.begin(), gaps.end());
    report.push_back(Check(
        "noise_reduction_identity",
        {{"sessions", n}, {"seed", s},
         {"worst_trial", static_cast<size_t>(worst - gaps.begin())}},
        *worst, 0.0, "max |joint - last| < 1e-8", *worst < 1e-8));
  }

  // Boundary validity at delta = 0.05 on a 50-point grid.
  {
    const size_t n = Scaled(10000, trial_scale, kMinCrossingTrials);
    const double delta = 0.05, sens = 1.0;
    for (BoundaryKind kind : {BoundaryKind::kLinear, BoundaryKind::kMixture}) {
      auto boundary = *TuneBoundary(kind, sens, delta, 1.0);
      const double t_star = *boundary.Invert(1.0);
      std::vector<double> grid(50);
      for (size_t k = 0; k < grid.size(); ++k) {
        grid[k] = t_star * 100.0 * std::pow(1e-4, k / 49.0);
      }
      const uint64_t s = sub_seed(4 + static_cast<uint64_t>(kind));
      auto est = *McBoundaryCrossing(boundary, sens, grid, n, s);
      report.push_back(Check(
          absl::StrCat("boundary_crossing_", BoundaryKindName(kind)),
          {{"trials", n}, {"delta", delta}, {"grid_points", grid.size()},
           {"seed", s}},
          est.estimate, est.se, "estimate <= delta + 3 se",
          est.estimate <= delta + 3 * est.se));
    }
  }

  // Single reveal against the closed-form normal tail.
  {
    const size_t n = Scaled(10000, trial_scale, kMinCrossingTrials);
    const uint64_t s = sub_seed(6);
    Rng pick(s, 0);
    for (int pair = 0; pair < 10; ++pair) {
      const BoundaryKind kind =
          pair % 2 == 0 ? BoundaryKind::kLinear : BoundaryKind::kMixture;
      // Large delta keeps the single-time tail away from 0, so the
      // comparison has power.
      const double delta = 0.05 + 0.55 * pick.Uniform();
      const double target = 0.5 + pick.Uniform();
      auto boundary = *TuneBoundary(kind, 1.0, delta, target);
      const double t = *boundary.Invert(target) *
                       std::exp(std::log(0.1) + pick.Uniform() * std::log(100.0));
      const std::vector<double> grid = {t};
      auto est = *McBoundaryCrossing(boundary, 1.0, grid, n,
                                     StreamKey({s, static_cast<uint64_t>(pair)}));
      const double p = SingleTimeCrossingProbability(boundary, 1.0, t);
      const double se = std::sqrt(p * (1 - p) / n);
      report.push_back(Check(
          absl::StrCat("single_time_tail_", pair),
          {{"trials", n}, {"kind", BoundaryKindName(kind)}, {"delta", delta},
           {"t", t}, {"closed_form", p}, {"seed", s}},
          est.estimate, se, "|estimate - closed_form| <= 3 se + 1/trials",
          std::abs(est.estimate - p) <= 3 * se + 1.0 / n));
    }
  }

  // Line crossing.
  {
    const size_t n = Scaled(10000, trial_scale, 100);
    const uint64_t s = sub_seed(7);
    auto est = *LineCrossingCheck(1.0, 1.0, 50.0, 1e-3, n, s);
    const double delta = std::exp(-2.0);
    report.push_back(Check(
        "line_crossing_a1_b1",
        {{"trials", n}, {"horizon", 50.0}, {"grid_step", 1e-3},
         {"delta", delta}, {"seed", s}},
        est.estimate, est.se, "delta - 3 se - 0.01 <= estimate <= delta",
        est.estimate >= delta - 3 * est.se - 0.01 && est.estimate <= delta));
    auto far = *LineCrossingCheck(1.0, 20.0, 50.0, 1e-3, n, s);
    report.push_back(Check("line_crossing_a1_b20",
                           {{"trials", n}, {"seed", s}}, far.estimate, far.se,
                           "estimate == 0", far.estimate == 0.0));
  }

  // Threshold noise under a constant schedule.
  {
    const size_t n = Scaled(10000, trial_scale, 200);
    const uint64_t s = sub_seed(8);
    const double delta_u = 0.1, eps = 0.5;
    std::vector<double> zeta(n);
    std::vector<uint8_t> shared(n, 1);
    ParallelFor(n, [&](size_t i) {
      auto rat = *RatSession::Open(10.0, 0.0, delta_u, Rng(s, i));
      for (int r = 0; r < 5; ++r) (void)rat.Step(-1e12, eps);
      zeta[i] = rat.rounds()[0].zeta;
      for (const auto& round : rat.rounds()) {
        if (round.zeta != zeta[i]) shared[i] = 0;
      }
    });
    const bool all_shared =
        std::all_of(shared.begin(), shared.end(), [](uint8_t v) { return v; });
    auto ks = *KsTest(zeta, [&](double x) {
      return LaplaceCdf(x, 2.0 * delta_u / eps);
    });
    report.push_back(Check(
        "rat_constant_eps_threshold_noise",
        {{"sessions", n}, {"eps", eps}, {"delta_u", delta_u},
         {"shared_across_rounds", all_shared}, {"seed", s}},
        ks.p_value, 0.0, "zeta shared across rounds and ks p-value > 1e-3",
        all_shared && ks.p_value > 1e-3));
  }

  // Utility margins.
  {
    const size_t n = Scaled(10000, trial_scale, 200);
    const uint64_t s = sub_seed(9);
    const double gamma = 0.1, delta_u = 0.05, tau = 1.0;
    const int rounds = 10;
    std::vector<double> eps, utility, weights(rounds, 1.0 / rounds);
    for (int r = 0; r < rounds; ++r) {
      eps.push_back(0.2 * (r + 1));
      utility.push_back(tau - 2.0 + 0.2 * r);
    }
    auto margins = *RatUtilityMargins(gamma, weights, eps, delta_u);
    std::vector<uint8_t> failure(n, 0);
    ParallelFor(n, [&](size_t i) {
      auto rat = *RatSession::Open(2.0, tau, delta_u, Rng(s, i));
      for (int r = 0; r < rounds; ++r) {
        if (*rat.Step(utility[r], eps[r])) {
          failure[i] = utility[r] < tau - margins.margins[r];
          return;
        }
      }
    });
    size_t fails = 0;
    for (uint8_t f : failure) fails += f;
    const auto est = McEstimate::FromCount(n - fails, n);
    const double se = std::sqrt(gamma * (1 - gamma) / n);
    report.push_back(Check(
        "rat_utility_margin",
        {{"runs", n}, {"gamma", gamma}, {"seed", s}}, est.estimate, se,
        "coverage >= 1 - gamma - 3 se", est.estimate >= 1 - gamma - 3 * se));
  }
  return report;
}

bool SuitePassed(const nlohmann::json& report) {
  for (const auto& check : report) {
    if (!check.value("pass", false)) return false;
  }
  return true;
}

}  // namespace expost
