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

#include "expost/erm.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_split.h"
#include "absl/strings/ascii.h"
#include "absl/strings/strip.h"
#include "expost/random.h"

namespace expost {
namespace {

constexpr double kGradTol = 1e-8;
constexpr int kMaxNewtonIters = 100000;
constexpr double kEigenFloor = 1e-6;
constexpr double kSynthMargin = 3.0;
constexpr double kSynthFlip = 0.04;
constexpr double kSynthNoiseSd = 0.1;

// log(1 + exp(-z)) without overflow.
double Softplus(double neg_z) {
  return neg_z > 0 ? neg_z + std::log1p(std::exp(-neg_z))
                   : std::log1p(std::exp(neg_z));
}

double Sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

std::string TaskKindName(TaskKind kind) {
  return kind == TaskKind::kLogistic ? "logistic" : "ridge";
}

absl::StatusOr<TaskKind> ParseTaskKind(const std::string& name) {
  if (name == "logistic") return TaskKind::kLogistic;
  if (name == "ridge") return TaskKind::kRidge;
  return absl::InvalidArgumentError(absl::StrCat(
      "unknown task '", name, "' (expected logistic or ridge)"));
}

double TaskSpec::l2_sensitivity() const {
  if (kind == TaskKind::kLogistic) {
    return 2.0 / (static_cast<double>(n) * reg_lambda);
  }
  return 2.0 * std::sqrt(2.0);
}

double TaskSpec::l1_sensitivity() const {
  const double dd = static_cast<double>(d);
  if (kind == TaskKind::kLogistic) {
    return 2.0 * std::sqrt(dd) / (static_cast<double>(n) * reg_lambda);
  }
  return 2.0 * dd + 2.0 * std::sqrt(dd);
}

size_t TaskSpec::release_dim() const {
  return kind == TaskKind::kLogistic ? d : d * d + d;
}

double TaskSpec::projection_radius() const {
  // lambda |beta|^2 / 2 <= L(beta) <= L(0): ln 2 for logistic, mean(y^2)/2
  // <= 1/2 for ridge.
  if (kind == TaskKind::kLogistic) {
    return std::sqrt(2.0 * std::log(2.0) / reg_lambda);
  }
  return 1.0 / std::sqrt(reg_lambda);
}

double TaskSpec::utility_sensitivity() const {
  const double r = projection_radius();
  // logistic: per-example loss lies in [log(1 + e^-R), log(1 + e^R)], a
  // range of exactly R. ridge: (z - y)^2 / 2 in [0, (R + 1)^2 / 2].
  const double range = kind == TaskKind::kLogistic ? r : 0.5 * (r + 1) * (r + 1);
  return range / static_cast<double>(n);
}

absl::StatusOr<TaskSpec> MakeTaskSpec(TaskKind kind, double reg_lambda,
                                      size_t n, size_t d) {
  if (!(reg_lambda > 0.0) || !std::isfinite(reg_lambda)) {
    return absl::InvalidArgumentError(
        absl::StrCat("reg_lambda must be finite and > 0, got ", reg_lambda));
  }
  if (n == 0 || d == 0) {
    return absl::InvalidArgumentError("n and d must be positive");
  }
  return TaskSpec{kind, reg_lambda, n, d};
}

absl::StatusOr<Dataset> ParseCsv(const std::string& text, TaskKind kind) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  size_t width = 0;
  bool seen_data = false;
  while (std::getline(in, line)) {
    ++line_no;
    absl::string_view view = absl::StripAsciiWhitespace(line);
    if (view.empty() || view.front() == '#') continue;
    std::vector<absl::string_view> cells = absl::StrSplit(view, ',');
    std::vector<double> row;
    row.reserve(cells.size());
    bool numeric = true;
    size_t bad_col = 0;
    for (size_t c = 0; c < cells.size(); ++c) {
      double v;
      if (!absl::SimpleAtod(absl::StripAsciiWhitespace(cells[c]), &v) ||
          !std::isfinite(v)) {
        numeric = false;
        bad_col = c + 1;
        break;
      }
      row.push_back(v);
    }
    if (!numeric) {
      if (!seen_data) {
        seen_data = true;  // header line
        continue;
      }
      return absl::InvalidArgumentError(absl::StrCat(
          "csv parse error at row ", line_no, ", column ", bad_col,
          ": non-numeric cell '", cells[bad_col - 1], "'"));
    }
    seen_data = true;
    if (row.size() < 2) {
      return absl::InvalidArgumentError(absl::StrCat(
          "csv parse error at row ", line_no,
          ": need at least one feature and a label"));
    }
    if (width == 0) width = row.size();
    if (row.size() != width) {
      return absl::InvalidArgumentError(absl::StrCat(
          "csv parse error at row ", line_no, ": expected ", width,
          " columns, got ", row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return absl::InvalidArgumentError("csv has no data rows");

  Dataset data;
  data.kind = kind;
  const size_t n = rows.size();
  const size_t d = width - 1;
  data.x.resize(n, d);
  data.y.resize(n);
  bool zero_one = kind == TaskKind::kLogistic;
  for (const auto& row : rows) {
    if (row.back() != 0.0 && row.back() != 1.0) zero_one = false;
  }
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < d; ++j) data.x(i, j) = rows[i][j];
    double label = rows[i].back();
    if (kind == TaskKind::kLogistic) {
      if (zero_one) label = label == 0.0 ? -1.0 : 1.0;
      if (label != 1.0 && label != -1.0) {
        return absl::InvalidArgumentError(absl::StrCat(
            "label error at data row ", i + 1, ": logistic labels must be "
            "-1/+1 (or 0/1), got ", rows[i].back()));
      }
    } else {
      label = std::clamp(label, -1.0, 1.0);
    }
    data.y(i) = label;
  }
  return data;
}

absl::StatusOr<Dataset> LoadCsv(const std::string& path, TaskKind kind) {
  std::ifstream file(path);
  if (!file) {
    return absl::NotFoundError(absl::StrCat("cannot open csv file ", path));
  }
  std::stringstream buffer;
  buffer << file.rdbuf();
  return ParseCsv(buffer.str(), kind);
}

Dataset Normalize(const Dataset& data) {
  Dataset out = data;
  out.zero_rows.clear();
  for (Eigen::Index i = 0; i < out.x.rows(); ++i) {
    const double norm = out.x.row(i).norm();
    if (norm == 0.0) {
      out.zero_rows.push_back(static_cast<size_t>(i));
    } else {
      out.x.row(i) /= norm;
    }
  }
  return out;
}

absl::StatusOr<Dataset> Subsample(const Dataset& data, size_t n,
                                  uint64_t seed) {
  if (n == 0 || n > data.n()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "subsample size must lie in [1, ", data.n(), "], got ", n));
  }
  std::vector<size_t> index(data.n());
  std::iota(index.begin(), index.end(), 0);
  Rng rng(seed, StreamKey({0x5ab5a3b1e}));
  // Partial Fisher-Yates.
  for (size_t i = 0; i < n; ++i) {
    const size_t j = i + static_cast<size_t>(rng() % (data.n() - i));
    std::swap(index[i], index[j]);
  }
  Dataset out;
  out.kind = data.kind;
  out.x.resize(n, data.x.cols());
  out.y.resize(n);
  for (size_t i = 0; i < n; ++i) {
    out.x.row(i) = data.x.row(index[i]);
    out.y(i) = data.y(index[i]);
    if (out.x.row(i).squaredNorm() == 0.0) out.zero_rows.push_back(i);
  }
  return out;
}

double LogisticLoss(const Eigen::VectorXd& beta, const Dataset& data,
                    double reg_lambda) {
  const Eigen::VectorXd z = data.x * beta;
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    total += Softplus(-data.y(i) * z(i));
  }
  return total / static_cast<double>(data.n()) +
         0.5 * reg_lambda * beta.squaredNorm();
}

Eigen::VectorXd LogisticGradient(const Eigen::VectorXd& beta,
                                 const Dataset& data, double reg_lambda) {
  const Eigen::VectorXd z = data.x * beta;
  Eigen::VectorXd w(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    // d/dz log(1 + exp(-y z)) = -y sigmoid(-y z).
    w(i) = -data.y(i) * Sigmoid(-data.y(i) * z(i));
  }
  return data.x.transpose() * w / static_cast<double>(data.n()) +
         reg_lambda * beta;
}

absl::StatusOr<Eigen::VectorXd> LogisticFit(const Dataset& data,
                                            double reg_lambda) {
  if (!(reg_lambda > 0.0)) {
    return absl::InvalidArgumentError("reg_lambda must be > 0");
  }
  if (data.kind != TaskKind::kLogistic) {
    return absl::InvalidArgumentError("logistic fit needs a binary dataset");
  }
  const Eigen::Index d = data.x.cols();
  const double n = static_cast<double>(data.n());
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
  double loss = LogisticLoss(beta, data, reg_lambda);
  Eigen::VectorXd grad = LogisticGradient(beta, data, reg_lambda);
  for (int iter = 0; iter < kMaxNewtonIters; ++iter) {
    if (grad.norm() <= kGradTol) return beta;
    const Eigen::VectorXd z = data.x * beta;
    Eigen::VectorXd w(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      const double s = Sigmoid(z(i));
      w(i) = s * (1.0 - s);
    }
    Eigen::MatrixXd hessian =
        data.x.transpose() * w.asDiagonal() * data.x / n;
    hessian.diagonal().array() += reg_lambda;
    const Eigen::VectorXd step = hessian.llt().solve(-grad);
    // Backtracking (Armijo) line search.
    double alpha = 1.0;
    const double slope = grad.dot(step);
    Eigen::VectorXd next = beta + step;
    double next_loss = LogisticLoss(next, data, reg_lambda);
    while (next_loss > loss + 1e-4 * alpha * slope && alpha > 1e-12) {
      alpha *= 0.5;
      next = beta + alpha * step;
      next_loss = LogisticLoss(next, data, reg_lambda);
    }
    const Eigen::VectorXd next_grad = LogisticGradient(next, data, reg_lambda);
    if (next_loss > loss && next_grad.norm() >= grad.norm()) {
      // No progress at machine precision.
      if (grad.norm() <= 1e3 * kGradTol) return beta;
      return absl::InternalError(absl::StrCat(
          "logistic fit stalled at iteration ", iter, " with gradient norm ",
          grad.norm()));
    }
    beta = next;
    loss = next_loss;
    grad = next_grad;
  }
  if (grad.norm() <= kGradTol) return beta;
  return absl::InternalError(absl::StrCat(
      "logistic fit did not converge in ", kMaxNewtonIters,
      " iterations; gradient norm ", grad.norm()));
}

Eigen::VectorXd RidgeSuffStats(const Dataset& data) {
  const Eigen::Index d = data.x.cols();
  const Eigen::MatrixXd a = data.x.transpose() * data.x;
  const Eigen::VectorXd b = data.x.transpose() * data.y;
  Eigen::VectorXd out(d * d + d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) out(i * d + j) = a(i, j);
  }
  out.tail(d) = b;
  return out;
}

absl::StatusOr<Eigen::VectorXd> RidgeSolve(std::span<const double> stats,
                                           size_t n, size_t d,
                                           double reg_lambda) {
  if (stats.size() != d * d + d) {
    return absl::InvalidArgumentError(absl::StrCat(
        "ridge statistics have length ", stats.size(), ", expected ",
        d * d + d));
  }
  const Eigen::Index dd = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd m(dd, dd);
  for (Eigen::Index i = 0; i < dd; ++i) {
    for (Eigen::Index j = 0; j < dd; ++j) m(i, j) = stats[i * d + j];
  }
  Eigen::VectorXd b(dd);
  for (Eigen::Index i = 0; i < dd; ++i) b(i) = stats[d * d + i];
  if (!m.allFinite() || !b.allFinite()) {
    return absl::InternalError("ridge statistics are not finite");
  }
  m = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  if (eig.info() != Eigen::Success) {
    return absl::InternalError("eigendecomposition of ridge matrix failed");
  }
  const Eigen::VectorXd clipped =
      eig.eigenvalues().cwiseMax(kEigenFloor);
  const Eigen::MatrixXd repaired = eig.eigenvectors() * clipped.asDiagonal() *
                                   eig.eigenvectors().transpose();
  Eigen::MatrixXd system = repaired;
  system.diagonal().array() += static_cast<double>(n) * reg_lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(system);
  if (llt.info() != Eigen::Success) {
    return absl::InternalError("ridge system is not positive definite");
  }
  Eigen::VectorXd beta = llt.solve(b);
  if (!beta.allFinite()) return absl::InternalError("ridge solve failed");
  return beta;
}

double RidgeLoss(const Eigen::VectorXd& beta, const Dataset& data,
                 double reg_lambda) {
  const Eigen::VectorXd r = data.x * beta - data.y;
  return 0.5 * r.squaredNorm() / static_cast<double>(data.n()) +
         0.5 * reg_lambda * beta.squaredNorm();
}

absl::StatusOr<Dataset> SynthGenerate(TaskKind kind, size_t n, size_t d,
                                      uint64_t seed) {
  if (n == 0 || d == 0) {
    return absl::InvalidArgumentError("n and d must be positive");
  }
  const Eigen::Index dd = static_cast<Eigen::Index>(d);
  Rng direction_rng(seed, StreamKey({0x5e7d, 0}));
  Eigen::VectorXd u(dd);
  for (Eigen::Index j = 0; j < dd; ++j) u(j) = direction_rng.StandardNormal();
  u /= u.norm();

  Dataset data;
  data.kind = kind;
  data.x.resize(static_cast<Eigen::Index>(n), dd);
  data.y.resize(static_cast<Eigen::Index>(n));
  for (size_t i = 0; i < n; ++i) {
    // One stream per row keeps rows independent of n.
    Rng rng(seed, StreamKey({0x5e7d, 1, i}));
    Eigen::VectorXd g(dd);
    for (Eigen::Index j = 0; j < dd; ++j) g(j) = rng.StandardNormal();
    if (kind == TaskKind::kLogistic) {
      const double s = rng.Uniform() < 0.5 ? -1.0 : 1.0;
      g += kSynthMargin * s * u;
    }
    const double norm = g.norm();
    if (norm > 0) g /= norm;
    data.x.row(static_cast<Eigen::Index>(i)) = g;
    const double z = g.dot(u);
    if (kind == TaskKind::kLogistic) {
      double label = z >= 0 ? 1.0 : -1.0;
      if (rng.Uniform() < kSynthFlip) label = -label;
      data.y(static_cast<Eigen::Index>(i)) = label;
    } else {
      data.y(static_cast<Eigen::Index>(i)) =
          std::clamp(z + kSynthNoiseSd * rng.StandardNormal(), -1.0, 1.0);
    }
  }
  return data;
}

std::string DatasetToCsv(const Dataset& data) {
  // Shortest round-trip form, so LoadCsv reproduces the values exactly.
  const auto format = [](double v) {
    char buf[32];
    auto result = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, result.ptr);
  };
  std::string out;
  for (size_t j = 0; j < data.d(); ++j) absl::StrAppend(&out, "x", j, ",");
  absl::StrAppend(&out, "y\n");
  for (size_t i = 0; i < data.n(); ++i) {
    for (size_t j = 0; j < data.d(); ++j) {
      absl::StrAppend(&out, format(data.x(i, j)), ",");
    }
    absl::StrAppend(&out, format(data.y(i)), "\n");
  }
  return out;
}

Eigen::VectorXd ProjectToBall(const Eigen::VectorXd& v, double radius) {
  const double norm = v.norm();
  if (norm <= radius) return v;
  return v * (radius / norm);
}

absl::StatusOr<PreparedTask> PreparedTask::Make(Dataset data,
                                                double reg_lambda) {
  auto spec = MakeTaskSpec(data.kind, reg_lambda, data.n(), data.d());
  if (!spec.ok()) return spec.status();
  PreparedTask task;
  task.spec_ = *spec;
  task.data_ = std::move(data);
  if (task.spec_.kind == TaskKind::kLogistic) {
    auto beta = LogisticFit(task.data_, reg_lambda);
    if (!beta.ok()) return beta.status();
    task.center_.assign(beta->data(), beta->data() + beta->size());
    task.optimal_loss_ = LogisticLoss(*beta, task.data_, reg_lambda);
  } else {
    const Eigen::VectorXd stats = RidgeSuffStats(task.data_);
    task.center_.assign(stats.data(), stats.data() + stats.size());
    auto beta = RidgeSolve(task.center_, task.spec_.n, task.spec_.d,
                           reg_lambda);
    if (!beta.ok()) return beta.status();
    task.optimal_loss_ = RidgeLoss(*beta, task.data_, reg_lambda);
  }
  return task;
}

absl::StatusOr<Eigen::VectorXd> PreparedTask::Decode(
    std::span<const double> release) const {
  if (release.size() != spec_.release_dim()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "release has length ", release.size(), ", expected ",
        spec_.release_dim()));
  }
  Eigen::VectorXd beta;
  if (spec_.kind == TaskKind::kLogistic) {
    beta = Eigen::Map<const Eigen::VectorXd>(
        release.data(), static_cast<Eigen::Index>(release.size()));
  } else {
    auto solved = RidgeSolve(release, spec_.n, spec_.d, spec_.reg_lambda);
    if (!solved.ok()) return solved.status();
    beta = *std::move(solved);
  }
  return ProjectToBall(beta, spec_.projection_radius());
}

absl::StatusOr<double> PreparedTask::ReleaseLoss(
    std::span<const double> release) const {
  auto beta = Decode(release);
  if (!beta.ok()) return beta.status();
  return spec_.kind == TaskKind::kLogistic
             ? LogisticLoss(*beta, data_, spec_.reg_lambda)
             : RidgeLoss(*beta, data_, spec_.reg_lambda);
}

}  // namespace expost
