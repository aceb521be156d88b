/*
 * Copyright 2026 The StackGen Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Generative classifiers: Gaussian naive Bayes, LDA and QDA.

#include <cmath>
#include <limits>
#include <numbers>

#include "learners/internal.hpp"

namespace stackgen::learners {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct ClassMoments {
  Matrix means;  // C x D
  Vector counts;
};

ClassMoments class_moments(const Matrix& X, std::span<const int> y, int num_classes) {
  ClassMoments m{Matrix::Zero(num_classes, X.cols()), Vector::Zero(num_classes)};
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    m.means.row(y[static_cast<std::size_t>(i)]) += X.row(i);
    m.counts(y[static_cast<std::size_t>(i)]) += 1.0;
  }
  for (Eigen::Index c = 0; c < num_classes; ++c) {
    if (m.counts(c) > 0) m.means.row(c) /= m.counts(c);
  }
  return m;
}

class GaussianNaiveBayes final : public Classifier {
 public:
  explicit GaussianNaiveBayes(const Json& params)
      : var_smoothing_(num_param(params, "var_smoothing", 1e-9)) {
    require(var_smoothing_ >= 0.0, "var_smoothing must be non-negative");
  }

  void fit(const Matrix& X, std::span<const int> y, int num_classes) override {
    auto m = class_moments(X, y, num_classes);
    means_ = m.means;
    vars_ = Matrix::Zero(num_classes, X.cols());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const int c = y[static_cast<std::size_t>(i)];
      vars_.row(c) += (X.row(i) - means_.row(c)).array().square().matrix();
    }
    double max_var = 0.0;
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      const double mu = X.col(j).mean();
      max_var = std::max(max_var, (X.col(j).array() - mu).square().mean());
    }
    const double eps = var_smoothing_ * max_var;
    log_prior_.resize(num_classes);
    for (Eigen::Index c = 0; c < num_classes; ++c) {
      if (m.counts(c) > 0) vars_.row(c) /= m.counts(c);
      vars_.row(c).array() += eps;
      log_prior_(c) = m.counts(c) > 0
                          ? std::log(m.counts(c) / static_cast<double>(X.rows()))
                          : kNegInf;
    }
    if ((vars_.array() <= 0.0).any()) {
      fail(ErrorCode::kTrainingFailed, "zero variance feature in naive Bayes");
    }
  }

  Matrix predict_proba(const Matrix& X) const override {
    Matrix scores(X.rows(), means_.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      for (Eigen::Index c = 0; c < means_.rows(); ++c) {
        if (!std::isfinite(log_prior_(c))) {
          scores(i, c) = kNegInf;
          continue;
        }
        const auto var = vars_.row(c).array();
        const auto diff = X.row(i).array() - means_.row(c).array();
        scores(i, c) = log_prior_(c) -
                       0.5 * (2.0 * std::numbers::pi * var).log().sum() -
                       0.5 * (diff.square() / var).sum();
      }
    }
    return softmax_rows(scores);
  }

  Json state() const override {
    return Json{{"means", matrix_to_json(means_)},
                {"vars", matrix_to_json(vars_)},
                {"log_prior", prior_json()}};
  }

  void load_state(const Json& j) override {
    means_ = matrix_from_json(j.at("means"));
    vars_ = matrix_from_json(j.at("vars"));
    log_prior_ = prior_from(j.at("log_prior"));
  }

 private:
  Json prior_json() const {
    Json out = Json::array();
    for (Eigen::Index c = 0; c < log_prior_.size(); ++c) {
      if (std::isfinite(log_prior_(c))) {
        out.push_back(log_prior_(c));
      } else {
        out.push_back(nullptr);
      }
    }
    return out;
  }
  static Vector prior_from(const Json& j) {
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t c = 0; c < j.size(); ++c) {
      v(static_cast<Eigen::Index>(c)) = j[c].is_null() ? kNegInf : j[c].get<double>();
    }
    return v;
  }

  double var_smoothing_;
  Matrix means_;
  Matrix vars_;
  Vector log_prior_;
};

// Linear discriminant analysis with a pooled covariance. Both solvers produce
// the same linear scores; "svd" uses a pseudo-inverse, "lsqr" a least-squares
// solve, so they differ only when the covariance is rank deficient.
class LinearDiscriminant final : public Classifier {
 public:
  explicit LinearDiscriminant(const Json& params)
      : solver_(str_param(params, "solver", "svd")) {
    require(solver_ == "svd" || solver_ == "lsqr", "lda solver must be svd or lsqr");
  }

  void fit(const Matrix& X, std::span<const int> y, int num_classes) override {
    auto m = class_moments(X, y, num_classes);
    Matrix cov = Matrix::Zero(X.cols(), X.cols());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const Vector d = (X.row(i) - m.means.row(y[static_cast<std::size_t>(i)])).transpose();
      cov += d * d.transpose();
    }
    cov /= static_cast<double>(X.rows());
    Matrix solved;  // D x C, cov^-1 * mean_c
    if (solver_ == "svd") {
      Eigen::JacobiSVD<Matrix> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
      const Vector& sv = svd.singularValues();
      const double tol = 1e-10 * std::max(1.0, sv.size() > 0 ? sv(0) : 0.0);
      Vector inv = sv.unaryExpr([tol](double s) { return s > tol ? 1.0 / s : 0.0; });
      const Matrix pinv = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
      solved = pinv * m.means.transpose();
    } else {
      solved = cov.completeOrthogonalDecomposition().solve(m.means.transpose());
    }
    if (!solved.allFinite()) fail(ErrorCode::kTrainingFailed, "LDA solve failed");
    coef_ = solved.transpose();  // C x D
    intercept_.resize(num_classes);
    for (Eigen::Index c = 0; c < num_classes; ++c) {
      intercept_(c) = m.counts(c) > 0
                          ? -0.5 * m.means.row(c).dot(coef_.row(c)) +
                                std::log(m.counts(c) / static_cast<double>(X.rows()))
                          : kNegInf;
    }
  }

  Matrix predict_proba(const Matrix& X) const override {
    Matrix scores = X * coef_.transpose();
    scores.rowwise() += intercept_.transpose();
    return softmax_rows(scores);
  }

  Json state() const override {
    Json b = Json::array();
    for (Eigen::Index c = 0; c < intercept_.size(); ++c) {
      if (std::isfinite(intercept_(c))) {
        b.push_back(intercept_(c));
      } else {
        b.push_back(nullptr);
      }
    }
    return Json{{"coef", matrix_to_json(coef_)}, {"intercept", b}};
  }

  void load_state(const Json& j) override {
    coef_ = matrix_from_json(j.at("coef"));
    const auto& b = j.at("intercept");
    intercept_.resize(static_cast<Eigen::Index>(b.size()));
    for (std::size_t c = 0; c < b.size(); ++c) {
      intercept_(static_cast<Eigen::Index>(c)) = b[c].is_null() ? kNegInf : b[c].get<double>();
    }
  }

 private:
  std::string solver_;
  Matrix coef_;
  Vector intercept_;
};

class QuadraticDiscriminant final : public Classifier {
 public:
  explicit QuadraticDiscriminant(const Json& params)
      : reg_(num_param(params, "reg_param", 0.0)) {
    require(reg_ >= 0.0 && reg_ <= 1.0, "reg_param must lie in [0, 1]");
  }

  void fit(const Matrix& X, std::span<const int> y, int num_classes) override {
    auto m = class_moments(X, y, num_classes);
    const Eigen::Index d = X.cols();
    means_ = m.means;
    precisions_.assign(static_cast<std::size_t>(num_classes), Matrix());
    offsets_.resize(num_classes);
    for (Eigen::Index c = 0; c < num_classes; ++c) {
      if (m.counts(c) < 2) {
        fail(ErrorCode::kTrainingFailed,
             "QDA needs at least two instances per class");
      }
      Matrix cov = Matrix::Zero(d, d);
      for (Eigen::Index i = 0; i < X.rows(); ++i) {
        if (y[static_cast<std::size_t>(i)] != c) continue;
        const Vector diff = (X.row(i) - means_.row(c)).transpose();
        cov += diff * diff.transpose();
      }
      cov /= (m.counts(c) - 1.0);
      cov = (1.0 - reg_) * cov + reg_ * Matrix::Identity(d, d);
      Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
      const Vector& ev = eig.eigenvalues();
      if (ev(0) <= 1e-10 * std::max(1.0, ev(d - 1))) {
        fail(ErrorCode::kTrainingFailed, "QDA covariance of class " +
                                             std::to_string(c) + " is singular");
      }
      precisions_[static_cast<std::size_t>(c)] =
          eig.eigenvectors() * ev.cwiseInverse().asDiagonal() *
          eig.eigenvectors().transpose();
      offsets_(c) = -0.5 * ev.array().log().sum() +
                    std::log(m.counts(c) / static_cast<double>(X.rows()));
    }
  }

  Matrix predict_proba(const Matrix& X) const override {
    Matrix scores(X.rows(), means_.rows());
    for (Eigen::Index c = 0; c < means_.rows(); ++c) {
      const Matrix& P = precisions_[static_cast<std::size_t>(c)];
      for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const Vector diff = (X.row(i) - means_.row(c)).transpose();
        scores(i, c) = offsets_(c) - 0.5 * diff.dot(P * diff);
      }
    }
    return softmax_rows(scores);
  }

  Json state() const override {
    Json prec = Json::array();
    for (const auto& P : precisions_) prec.push_back(matrix_to_json(P));
    return Json{{"means", matrix_to_json(means_)},
                {"precisions", prec},
                {"offsets", vector_to_json(offsets_)}};
  }

  void load_state(const Json& j) override {
    means_ = matrix_from_json(j.at("means"));
    precisions_.clear();
    for (const auto& p : j.at("precisions")) precisions_.push_back(matrix_from_json(p));
    offsets_ = vector_from_json(j.at("offsets"));
  }

 private:
  double reg_;
  Matrix means_;
  std::vector<Matrix> precisions_;
  Vector offsets_;
};

}  // namespace

std::unique_ptr<Classifier> make_gaussian_nb(const Json& params) {
  return std::make_unique<GaussianNaiveBayes>(params);
}

std::unique_ptr<Classifier> make_lda(const Json& params) {
  return std::make_unique<LinearDiscriminant>(params);
}

std::unique_ptr<Classifier> make_qda(const Json& params) {
  return std::make_unique<QuadraticDiscriminant>(params);
}

}  // namespace stackgen::learners
