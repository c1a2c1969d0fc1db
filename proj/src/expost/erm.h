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

// Regularized empirical risk minimization tasks released through noise
// reduction.
//
// logistic: the non-private minimizer of
//             (1/n) sum log(1 + exp(-y <beta, x>)) + (lambda/2) |beta|^2
//           is released directly (output perturbation).
// ridge:    the sufficient statistics (X^T X, X^T y) are released as one
//           concatenated vector and the noisy statistics are solved for beta.
//
// Rows are unit-norm and labels bounded, which fixes the sensitivities.

#ifndef EXPOST_ERM_H_
#define EXPOST_ERM_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "Eigen/Dense"
#include "absl/status/statusor.h"

namespace expost {

enum class TaskKind { kLogistic, kRidge };

std::string TaskKindName(TaskKind kind);
absl::StatusOr<TaskKind> ParseTaskKind(const std::string& name);

struct Dataset {
  TaskKind kind = TaskKind::kLogistic;
  Eigen::MatrixXd x;  // n x d
  Eigen::VectorXd y;  // +-1 for logistic, [-1, 1] for ridge
  // Rows with zero norm, left unscaled by Normalize().
  std::vector<size_t> zero_rows;

  size_t n() const { return static_cast<size_t>(x.rows()); }
  size_t d() const { return static_cast<size_t>(x.cols()); }
};

struct TaskSpec {
  TaskKind kind = TaskKind::kLogistic;
  double reg_lambda = 0.05;
  size_t n = 0;
  size_t d = 0;

  // logistic: 2 / (n lambda) on beta.
  // ridge:    2 sqrt(2) on the concatenated (X^T X, X^T y).
  double l2_sensitivity() const;
  // logistic: 2 sqrt(d) / (n lambda).  ridge: 2 d + 2 sqrt(d).
  double l1_sensitivity() const;
  // Length of the released vector: d for logistic, d^2 + d for ridge.
  size_t release_dim() const;
  // Radius of the ball models are projected onto before evaluation. It
  // contains the non-private minimizer, since its objective is at most the
  // objective at 0.
  double projection_radius() const;
  // Sensitivity of the unregularized mean loss of a model in that ball.
  double utility_sensitivity() const;
};

absl::StatusOr<TaskSpec> MakeTaskSpec(TaskKind kind, double reg_lambda,
                                      size_t n, size_t d);

// Numeric CSV, label in the last column, optional header line, '#' comment
// lines and blank lines skipped. Logistic labels {0, 1} map to {-1, +1};
// ridge labels are clamped to [-1, 1]. Errors name the row and column.
absl::StatusOr<Dataset> ParseCsv(const std::string& text, TaskKind kind);
absl::StatusOr<Dataset> LoadCsv(const std::string& path, TaskKind kind);

// Scales every nonzero row to unit norm. Idempotent.
Dataset Normalize(const Dataset& data);

// n rows without replacement, order determined by seed.
absl::StatusOr<Dataset> Subsample(const Dataset& data, size_t n,
                                  uint64_t seed);

double LogisticLoss(const Eigen::VectorXd& beta, const Dataset& data,
                    double reg_lambda);
Eigen::VectorXd LogisticGradient(const Eigen::VectorXd& beta,
                                 const Dataset& data, double reg_lambda);
// Damped Newton to gradient norm 1e-8.
absl::StatusOr<Eigen::VectorXd> LogisticFit(const Dataset& data,
                                            double reg_lambda);

// (X^T X row-major, X^T y), length d^2 + d.
Eigen::VectorXd RidgeSuffStats(const Dataset& data);
// Symmetrizes the matrix block, clips its eigenvalues at 1e-6, and solves
// (A + n lambda I) beta = b.
absl::StatusOr<Eigen::VectorXd> RidgeSolve(std::span<const double> stats,
                                           size_t n, size_t d,
                                           double reg_lambda);
double RidgeLoss(const Eigen::VectorXd& beta, const Dataset& data,
                 double reg_lambda);

// Unit-norm synthetic data with a hidden unit direction u drawn from seed.
//   logistic: x = normalize(3 s u + N(0, I)), s = +-1 equally likely;
//             y = sign(<u, x>), flipped with probability 0.04.
//   ridge:    x = normalize(N(0, I)); y = clamp(<u, x> + N(0, 0.01), -1, 1).
absl::StatusOr<Dataset> SynthGenerate(TaskKind kind, size_t n, size_t d,
                                      uint64_t seed);

std::string DatasetToCsv(const Dataset& data);

Eigen::VectorXd ProjectToBall(const Eigen::VectorXd& v, double radius);

// A dataset with its non-private release vector and the map from a (noisy)
// release to the loss of the model it decodes to.
class PreparedTask {
 public:
  static absl::StatusOr<PreparedTask> Make(Dataset data, double reg_lambda);

  const TaskSpec& spec() const { return spec_; }
  const Dataset& data() const { return data_; }
  // Non-private release: beta-hat (logistic) or the sufficient statistics.
  const std::vector<double>& center() const { return center_; }

  // Decoded model, projected onto the ball of projection_radius().
  absl::StatusOr<Eigen::VectorXd> Decode(std::span<const double> release) const;
  // Regularized loss of the decoded model.
  absl::StatusOr<double> ReleaseLoss(std::span<const double> release) const;
  // Loss of the non-private model.
  double optimal_loss() const { return optimal_loss_; }

 private:
  PreparedTask() = default;

  TaskSpec spec_;
  Dataset data_;
  std::vector<double> center_;
  double optimal_loss_ = 0.0;
};

}  // namespace expost

#endif  // EXPOST_ERM_H_
