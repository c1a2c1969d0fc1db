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

// Noise processes queried at adaptively chosen, decreasing times.
//
// All three paths are single-writer objects: reveal/extend calls on one path
// must be serialized by the caller. Const queries on a quiescent path are
// safe to run concurrently.

#ifndef EXPOST_STOCHASTIC_H_
#define EXPOST_STOCHASTIC_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "expost/random.h"

namespace expost {

// A d-dimensional standard Brownian motion that is sampled lazily, in
// reverse time. The first reveal at t draws B_t ~ N(0, t I). Every later
// reveal at s <= t_min (the smallest time revealed so far) draws from the
// Brownian bridge between B_0 = 0 and B_{t_min}:
//
//   B_s | B_{t_min} = v  ~  N((s / t_min) v, s (t_min - s) / t_min I).
//
// By the Markov property the values at times above t_min carry no extra
// information about B_s, so this is the exact conditional law.
class BrownianPath {
 public:
  struct Point {
    double time;
    std::vector<double> value;
  };

  BrownianPath(size_t dim, Rng rng);

  // Returns B_t. Re-querying a revealed time returns the stored vector.
  // Errors: t < 0 (InvalidArgument); t above the smallest revealed time
  // (FailedPrecondition). Rejected calls consume no randomness.
  absl::StatusOr<std::vector<double>> Reveal(double t);

  size_t dim() const { return dim_; }
  // Points in reveal order (strictly decreasing times).
  const std::vector<Point>& revealed() const { return revealed_; }

 private:
  size_t dim_;
  Rng rng_;
  std::vector<Point> revealed_;
};

// The continuous-time Laplace process started at eta:
//
//   Z_t = sum_{n=0}^{P_t} Lap(T_n),
//
// where P is an inhomogeneous Poisson process on [eta, inf) with intensity
// 2/t, T_0 = eta and T_n is its n-th jump. Each summand is a vector with
// i.i.d. Laplace coordinates of scale T_n. Z_t ~ Lap(t) coordinate-wise.
//
// Jumps are simulated by the time change s = 2 log t, under which P becomes a
// unit-rate homogeneous process: T_{n+1} = T_n * exp(E / 2), E ~ Exp(1).
class LaplacePath {
 public:
  static absl::StatusOr<LaplacePath> Build(size_t dim, double eta, double t_hi,
                                           Rng rng);

  // Z_t for t in [eta, t_hi]; piecewise constant and right-continuous.
  absl::StatusOr<std::vector<double>> Query(double t) const;
  // Appends jumps in (t_hi, new_t_hi]. Values at times <= the old t_hi are
  // unchanged. A new_t_hi at or below the current one is a no-op.
  absl::Status Extend(double new_t_hi);

  size_t dim() const { return dim_; }
  double eta() const { return eta_; }
  double t_hi() const { return t_hi_; }
  const std::vector<double>& jump_times() const { return jump_times_; }
  // Summand n (the Lap(T_n) vector added at jump_times()[n]).
  std::span<const double> jump_value(size_t n) const {
    return {jump_values_.data() + n * dim_, dim_};
  }

 private:
  LaplacePath(size_t dim, double eta, Rng rng);
  void AppendJump(double time);

  size_t dim_;
  double eta_;
  double t_hi_;
  Rng rng_;
  // First jump time beyond t_hi_, already drawn.
  double pending_jump_ = 0.0;
  std::vector<double> jump_times_;
  std::vector<double> jump_values_;  // row-major, one row per jump
  std::vector<double> prefix_sums_;  // row n = sum of rows 0..n
};

// X_t = P_1(t) - P_2(t) coordinate-wise, with P_1, P_2 independent
// homogeneous Poisson processes of rates rate_plus and rate_minus.
// X_t ~ Skellam(t * rate_plus, t * rate_minus).
class SkellamPath {
 public:
  static absl::StatusOr<SkellamPath> Build(size_t dim, double rate_plus,
                                           double rate_minus, double t_hi,
                                           Rng rng);

  // Integer vector X_t for t in [0, t_hi].
  absl::StatusOr<std::vector<int64_t>> Query(double t) const;
  absl::Status Extend(double new_t_hi);

  size_t dim() const { return dim_; }
  double t_hi() const { return t_hi_; }
  double rate_plus() const { return rate_plus_; }
  double rate_minus() const { return rate_minus_; }

 private:
  struct JumpStream {
    double rate;
    Rng rng;
    double pending;  // next jump beyond t_hi
    std::vector<double> times;
  };

  SkellamPath(size_t dim, double rate_plus, double rate_minus, Rng rng);
  static void Advance(JumpStream& stream, double t_hi);

  size_t dim_;
  double rate_plus_;
  double rate_minus_;
  double t_hi_ = 0.0;
  // 2 * dim streams: (plus, minus) for each coordinate.
  std::vector<JumpStream> streams_;
};

}  // namespace expost

#endif  // EXPOST_STOCHASTIC_H_
