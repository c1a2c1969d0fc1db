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

#include "expost/stochastic.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "absl/strings/str_cat.h"

namespace expost {

BrownianPath::BrownianPath(size_t dim, Rng rng) : dim_(dim), rng_(rng) {}

absl::StatusOr<std::vector<double>> BrownianPath::Reveal(double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) {
    return absl::InvalidArgumentError(
        absl::StrCat("reveal time must be finite and >= 0, got ", t));
  }
  for (const Point& p : revealed_) {
    if (p.time == t) return p.value;
  }
  std::vector<double> value(dim_, 0.0);
  if (revealed_.empty()) {
    if (t > 0.0) {
      const double sd = std::sqrt(t);
      for (double& v : value) v = sd * rng_.StandardNormal();
    }
  } else {
    const Point& last = revealed_.back();
    if (t > last.time) {
      return absl::FailedPreconditionError(absl::StrCat(
          "reveal times must be nonincreasing: requested ", t,
          " after ", last.time));
    }
    if (t > 0.0) {
      const double ratio = t / last.time;
      const double sd = std::sqrt(t * (last.time - t) / last.time);
      for (size_t i = 0; i < dim_; ++i) {
        value[i] = ratio * last.value[i] + sd * rng_.StandardNormal();
      }
    }
  }
  revealed_.push_back({t, value});
  return value;
}

LaplacePath::LaplacePath(size_t dim, double eta, Rng rng)
    : dim_(dim), eta_(eta), t_hi_(eta), rng_(rng) {}

absl::StatusOr<LaplacePath> LaplacePath::Build(size_t dim, double eta,
                                               double t_hi, Rng rng) {
  if (dim == 0) return absl::InvalidArgumentError("dim must be positive");
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    return absl::InvalidArgumentError(
        absl::StrCat("eta must be finite and > 0, got ", eta));
  }
  if (!(t_hi >= eta) || !std::isfinite(t_hi)) {
    return absl::InvalidArgumentError(
        absl::StrCat("t_hi must be finite and >= eta, got ", t_hi));
  }
  LaplacePath path(dim, eta, rng);
  path.AppendJump(eta);
  path.pending_jump_ = eta * std::exp(0.5 * path.rng_.Exponential());
  auto status = path.Extend(t_hi);
  if (!status.ok()) return status;
  return path;
}

void LaplacePath::AppendJump(double time) {
  jump_times_.push_back(time);
  const size_t row = jump_values_.size();
  for (size_t i = 0; i < dim_; ++i) jump_values_.push_back(rng_.Laplace(time));
  for (size_t i = 0; i < dim_; ++i) {
    const double prev = row == 0 ? 0.0 : prefix_sums_[row - dim_ + i];
    prefix_sums_.push_back(prev + jump_values_[row + i]);
  }
}

absl::Status LaplacePath::Extend(double new_t_hi) {
  if (!std::isfinite(new_t_hi)) {
    return absl::InvalidArgumentError("t_hi must be finite");
  }
  if (new_t_hi <= t_hi_) return absl::OkStatus();
  while (pending_jump_ <= new_t_hi) {
    AppendJump(pending_jump_);
    pending_jump_ *= std::exp(0.5 * rng_.Exponential());
  }
  t_hi_ = new_t_hi;
  return absl::OkStatus();
}

absl::StatusOr<std::vector<double>> LaplacePath::Query(double t) const {
  if (!(t >= eta_ && t <= t_hi_)) {
    return absl::OutOfRangeError(absl::StrCat(
        "query time ", t, " outside simulated range [", eta_, ", ", t_hi_,
        "]"));
  }
  const auto it = std::upper_bound(jump_times_.begin(), jump_times_.end(), t);
  const size_t last = static_cast<size_t>(it - jump_times_.begin()) - 1;
  return std::vector<double>(prefix_sums_.begin() + last * dim_,
                             prefix_sums_.begin() + (last + 1) * dim_);
}

SkellamPath::SkellamPath(size_t dim, double rate_plus, double rate_minus,
                         Rng rng)
    : dim_(dim), rate_plus_(rate_plus), rate_minus_(rate_minus) {
  streams_.reserve(2 * dim);
  for (size_t i = 0; i < 2 * dim; ++i) {
    const double rate = i % 2 == 0 ? rate_plus : rate_minus;
    JumpStream s{rate, rng.Split(i), 0.0, {}};
    s.pending = rate > 0.0 ? s.rng.Exponential() / rate
                           : std::numeric_limits<double>::infinity();
    streams_.push_back(std::move(s));
  }
}

absl::StatusOr<SkellamPath> SkellamPath::Build(size_t dim, double rate_plus,
                                               double rate_minus, double t_hi,
                                               Rng rng) {
  if (dim == 0) return absl::InvalidArgumentError("dim must be positive");
  if (!(rate_plus >= 0.0) || !(rate_minus >= 0.0) ||
      !std::isfinite(rate_plus) || !std::isfinite(rate_minus)) {
    return absl::InvalidArgumentError(absl::StrCat(
        "Skellam rates must be finite and >= 0, got ", rate_plus, ", ",
        rate_minus));
  }
  SkellamPath path(dim, rate_plus, rate_minus, rng);
  auto status = path.Extend(t_hi);
  if (!status.ok()) return status;
  return path;
}

void SkellamPath::Advance(JumpStream& stream, double t_hi) {
  while (stream.pending <= t_hi) {
    stream.times.push_back(stream.pending);
    stream.pending += stream.rng.Exponential() / stream.rate;
  }
}

absl::Status SkellamPath::Extend(double new_t_hi) {
  if (!(new_t_hi >= 0.0) || !std::isfinite(new_t_hi)) {
    return absl::InvalidArgumentError(
        absl::StrCat("t_hi must be finite and >= 0, got ", new_t_hi));
  }
  if (new_t_hi <= t_hi_) return absl::OkStatus();
  for (JumpStream& s : streams_) Advance(s, new_t_hi);
  t_hi_ = new_t_hi;
  return absl::OkStatus();
}

absl::StatusOr<std::vector<int64_t>> SkellamPath::Query(double t) const {
  if (!(t >= 0.0 && t <= t_hi_)) {
    return absl::OutOfRangeError(absl::StrCat(
        "query time ", t, " outside simulated range [0, ", t_hi_, "]"));
  }
  std::vector<int64_t> value(dim_);
  for (size_t i = 0; i < dim_; ++i) {
    const auto count = [t](const JumpStream& s) {
      return static_cast<int64_t>(
          std::upper_bound(s.times.begin(), s.times.end(), t) -
          s.times.begin());
    };
    value[i] = count(streams_[2 * i]) - count(streams_[2 * i + 1]);
  }
  return value;
}

}  // namespace expost
