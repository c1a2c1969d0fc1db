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

#include "expost/boundaries.h"

#include <cmath>
#include <functional>
#include <limits>

#include "absl/strings/str_cat.h"

namespace expost {
namespace {

constexpr double kGridLo = 1e-6;
constexpr double kGridHi = 1e6;
constexpr int kGridPoints = 241;
constexpr double kLinearConstraintTol = 1e-12;
constexpr double kBisectionRelTol = 1e-14;
constexpr int kMaxBisectionIters = 400;
constexpr double kTuneLogTol = 1e-8;
constexpr int kTuneScanPoints = 81;

absl::Status CheckCommon(double delta, double sensitivity) {
  if (!(delta > 0.0 && delta < 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("delta must lie in (0, 1), got ", delta));
  }
  if (!(sensitivity > 0.0) || !std::isfinite(sensitivity)) {
    return absl::InvalidArgumentError(
        absl::StrCat("sensitivity must be finite and > 0, got ", sensitivity));
  }
  return absl::OkStatus();
}

// Minimizes f over [lo, hi] in log space. Returns the argmin; f may return
// +inf for infeasible points.
double MinimizeLogScale(const std::function<double(double)>& f, double lo,
                        double hi) {
  const double log_lo = std::log(lo);
  const double log_hi = std::log(hi);
  const double step = (log_hi - log_lo) / (kTuneScanPoints - 1);
  int best = 0;
  double best_value = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kTuneScanPoints; ++i) {
    const double v = f(std::exp(log_lo + i * step));
    if (v < best_value) {
      best_value = v;
      best = i;
    }
  }
  double left = log_lo + std::max(best - 1, 0) * step;
  double right = log_lo + std::min(best + 1, kTuneScanPoints - 1) * step;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = right - inv_phi * (right - left);
  double x2 = left + inv_phi * (right - left);
  double f1 = f(std::exp(x1));
  double f2 = f(std::exp(x2));
  while (right - left > kTuneLogTol) {
    if (f1 <= f2) {
      right = x2;
      x2 = x1;
      f2 = f1;
      x1 = right - inv_phi * (right - left);
      f1 = f(std::exp(x1));
    } else {
      left = x1;
      x1 = x2;
      f1 = f2;
      x2 = left + inv_phi * (right - left);
      f2 = f(std::exp(x2));
    }
  }
  const double candidate = std::exp(0.5 * (left + right));
  const double at_best = std::exp(log_lo + best * step);
  return f(candidate) <= f(at_best) ? candidate : at_best;
}

}  // namespace

std::string BoundaryKindName(BoundaryKind kind) {
  return kind == BoundaryKind::kLinear ? "linear" : "mixture";
}

absl::StatusOr<BoundaryKind> ParseBoundaryKind(const std::string& name) {
  if (name == "linear") return BoundaryKind::kLinear;
  if (name == "mixture") return BoundaryKind::kMixture;
  return absl::InvalidArgumentError(
      absl::StrCat("unknown boundary kind '", name,
                   "' (expected linear or mixture)"));
}

absl::StatusOr<PrivacyBoundary> PrivacyBoundary::Linear(double a, double b,
                                                        double delta,
                                                        double sensitivity) {
  if (auto s = CheckCommon(delta, sensitivity); !s.ok()) return s;
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
    return absl::InvalidArgumentError(
        absl::StrCat("linear boundary needs a, b > 0, got a=", a, " b=", b));
  }
  const double target = std::log(1.0 / delta);
  if (std::abs(2.0 * a * b - target) > kLinearConstraintTol * target) {
    return absl::InvalidArgumentError(
        absl::StrCat("linear boundary needs 2ab = log(1/delta) = ", target,
                     ", got 2ab = ", 2.0 * a * b));
  }
  PrivacyBoundary boundary(BoundaryKind::kLinear, a, b, 0.0, delta,
                           sensitivity);
  if (auto s = boundary.CheckDecreasing(); !s.ok()) return s;
  return boundary;
}

absl::StatusOr<PrivacyBoundary> PrivacyBoundary::Mixture(double rho,
                                                         double delta,
                                                         double sensitivity) {
  if (auto s = CheckCommon(delta, sensitivity); !s.ok()) return s;
  if (!(rho > 0.0) || !std::isfinite(rho)) {
    return absl::InvalidArgumentError(
        absl::StrCat("mixture boundary needs rho > 0, got ", rho));
  }
  PrivacyBoundary boundary(BoundaryKind::kMixture, 0.0, 0.0, rho, delta,
                           sensitivity);
  if (auto s = boundary.CheckDecreasing(); !s.ok()) return s;
  return boundary;
}

double PrivacyBoundary::operator()(double t) const {
  const double d = sensitivity_;
  if (kind_ == BoundaryKind::kLinear) {
    return (d / t) * (d / 2.0 + b_) + d * a_;
  }
  const double log_term =
      std::log(1.0 / delta_) + 0.5 * std::log1p(t / rho_);
  return d * d / (2.0 * t) + (d / t) * std::sqrt(2.0 * (t + rho_) * log_term);
}

absl::StatusOr<double> PrivacyBoundary::Eval(double t) const {
  if (!(t > 0.0) || std::isnan(t)) {
    return absl::InvalidArgumentError(
        absl::StrCat("boundary time must be > 0, got ", t));
  }
  return (*this)(t);
}

double PrivacyBoundary::Floor() const {
  return kind_ == BoundaryKind::kLinear ? sensitivity_ * a_ : 0.0;
}

absl::Status PrivacyBoundary::CheckDecreasing() const {
  const double ratio = std::pow(kGridHi / kGridLo, 1.0 / (kGridPoints - 1));
  double t = kGridLo;
  double prev = (*this)(t);
  for (int i = 1; i < kGridPoints; ++i) {
    t *= ratio;
    const double v = (*this)(t);
    if (!std::isfinite(v) || !(v > 0.0) || !(v < prev)) {
      return absl::InternalError(absl::StrCat(
          BoundaryKindName(kind_), " boundary is not strictly decreasing and "
          "positive near t=", t, " (psi=", v, ", previous ", prev, ")"));
    }
    prev = v;
  }
  return absl::OkStatus();
}

absl::StatusOr<double> PrivacyBoundary::Invert(double eps) const {
  if (std::isnan(eps) || !(eps > Floor())) {
    return absl::OutOfRangeError(absl::StrCat(
        "unattainable privacy level eps=", eps, ": the ",
        BoundaryKindName(kind_), " boundary never drops to or below it "
        "(floor ", Floor(), ")"));
  }
  double lo = 1.0;
  double hi = 1.0;
  if ((*this)(1.0) > eps) {
    while ((*this)(hi) > eps) {
      lo = hi;
      hi *= 2.0;
      if (!std::isfinite(hi) || hi > 1e300) {
        return absl::OutOfRangeError(absl::StrCat(
            "unattainable privacy level eps=", eps,
            ": required noise time overflows"));
      }
    }
  } else {
    while ((*this)(lo) <= eps) {
      hi = lo;
      lo *= 0.5;
      if (lo < 1e-300) {
        return absl::InternalError(absl::StrCat(
            "boundary inversion for eps=", eps, " did not bracket"));
      }
    }
  }
  // Invariant: psi(lo) > eps >= psi(hi).
  double psi_lo = (*this)(lo);
  double psi_hi = (*this)(hi);
  for (int i = 0; i < kMaxBisectionIters && hi / lo - 1.0 > kBisectionRelTol;
       ++i) {
    const double mid = std::sqrt(lo * hi);
    if (!(mid > lo && mid < hi)) break;
    const double v = (*this)(mid);
    if (!(v <= psi_lo && v >= psi_hi)) {
      return absl::InternalError(absl::StrCat(
          "boundary shape error: psi is not monotone on [", lo, ", ", hi,
          "]"));
    }
    if (v > eps) {
      lo = mid;
      psi_lo = v;
    } else {
      hi = mid;
      psi_hi = v;
    }
  }
  return hi;
}

nlohmann::json PrivacyBoundary::ToJson() const {
  nlohmann::json j;
  j["kind"] = BoundaryKindName(kind_);
  j["a"] = kind_ == BoundaryKind::kLinear ? nlohmann::json(a_) : nullptr;
  j["b"] = kind_ == BoundaryKind::kLinear ? nlohmann::json(b_) : nullptr;
  j["rho"] = kind_ == BoundaryKind::kMixture ? nlohmann::json(rho_) : nullptr;
  j["delta"] = delta_;
  j["sensitivity"] = sensitivity_;
  return j;
}

absl::StatusOr<PrivacyBoundary> TuneBoundary(BoundaryKind kind,
                                             double sensitivity, double delta,
                                             double target_eps) {
  if (auto s = CheckCommon(delta, sensitivity); !s.ok()) return s;
  if (!(target_eps > 0.0) || !std::isfinite(target_eps)) {
    return absl::InvalidArgumentError(
        absl::StrCat("target_eps must be finite and > 0, got ", target_eps));
  }
  const double log_inv_delta = std::log(1.0 / delta);
  const auto make = [&](double param) -> absl::StatusOr<PrivacyBoundary> {
    if (kind == BoundaryKind::kLinear) {
      return PrivacyBoundary::Linear(param, log_inv_delta / (2.0 * param),
                                     delta, sensitivity);
    }
    return PrivacyBoundary::Mixture(param, delta, sensitivity);
  };
  const auto required_time = [&](double param) {
    auto boundary = make(param);
    if (!boundary.ok()) return std::numeric_limits<double>::infinity();
    auto t = boundary->Invert(target_eps);
    return t.ok() ? *t : std::numeric_limits<double>::infinity();
  };

  double lo, hi;
  if (kind == BoundaryKind::kLinear) {
    const double a_max = target_eps / sensitivity;
    lo = a_max * 1e-8;
    hi = a_max * (1.0 - 1e-9);
  } else {
    lo = 1e-6;
    hi = 1e6;
  }
  const double best = MinimizeLogScale(required_time, lo, hi);
  if (!std::isfinite(required_time(best))) {
    return absl::OutOfRangeError(absl::StrCat(
        "unattainable privacy level: no ", BoundaryKindName(kind),
        " boundary reaches eps=", target_eps));
  }
  return make(best);
}

absl::StatusOr<nlohmann::json> TuneReport(const PrivacyBoundary& boundary,
                                          double target_eps) {
  auto t = boundary.Invert(target_eps);
  if (!t.ok()) return t.status();
  nlohmann::json j = boundary.ToJson();
  j["target_eps"] = target_eps;
  j["required_time"] = *t;
  return j;
}

absl::StatusOr<std::vector<double>> EpsilonScheduleToTimes(
    const PrivacyBoundary& boundary, std::span<const double> eps_list) {
  std::vector<double> times;
  times.reserve(eps_list.size());
  for (size_t i = 0; i < eps_list.size(); ++i) {
    if (i > 0 && eps_list[i] < eps_list[i - 1]) {
      return absl::InvalidArgumentError(absl::StrCat(
          "epsilon schedule must be nondecreasing: eps[", i, "]=",
          eps_list[i], " < eps[", i - 1, "]=", eps_list[i - 1]));
    }
    auto t = boundary.Invert(eps_list[i]);
    if (!t.ok()) return t.status();
    times.push_back(*t);
  }
  return times;
}

}  // namespace expost
