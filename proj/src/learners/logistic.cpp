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

#include <cmath>

#include "learners/internal.hpp"

namespace stackgen::learners {

LogisticFit fit_logistic(const Matrix& X, std::span<const int> y, int num_classes,
                         double inverse_reg, int max_iter) {
  require(inverse_reg > 0.0, "logistic C must be positive");
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  const Eigen::Index k = num_classes;
  Matrix onehot = Matrix::Zero(n, k);
  for (Eigen::Index i = 0; i < n; ++i) onehot(i, y[static_cast<std::size_t>(i)]) = 1.0;
  const double l2 = 1.0 / (inverse_reg * static_cast<double>(n));

  auto objective = [&](const Vector& theta, Vector& grad) {
    Eigen::Map<const Matrix> W(theta.data(), d, k);
    Eigen::Map<const Vector> b(theta.data() + d * k, k);
    Matrix scores = X * W;
    scores.rowwise() += b.transpose();
    double loss = 0.0;
    Matrix p(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mx = scores.row(i).maxCoeff();
      double sum = 0.0;
      for (Eigen::Index c = 0; c < k; ++c) {
        p(i, c) = std::exp(scores(i, c) - mx);
        sum += p(i, c);
      }
      p.row(i) /= sum;
      loss -= scores(i, y[static_cast<std::size_t>(i)]) - mx - std::log(sum);
    }
    loss /= static_cast<double>(n);
    loss += 0.5 * l2 * W.squaredNorm();
    const Matrix resid = (p - onehot) / static_cast<double>(n);
    grad.resize(theta.size());
    Eigen::Map<Matrix> gW(grad.data(), d, k);
    Eigen::Map<Vector> gb(grad.data() + d * k, k);
    gW = X.transpose() * resid + l2 * W;
    gb = resid.colwise().sum().transpose();
    return loss;
  };

  Vector theta = Vector::Zero(d * k + k);
  theta = minimize_lbfgs(objective, theta, max_iter, 1e-6);
  if (!theta.allFinite()) fail(ErrorCode::kTrainingFailed, "logistic fit diverged");
  LogisticFit fit;
  fit.coef = Eigen::Map<const Matrix>(theta.data(), d, k).transpose();
  fit.intercept = theta.tail(k);
  return fit;
}

Matrix logistic_proba(const LogisticFit& fit, const Matrix& X) {
  Matrix scores = X * fit.coef.transpose();
  scores.rowwise() += fit.intercept.transpose();
  return softmax_rows(scores);
}

namespace {

class LogisticRegression final : public Classifier {
 public:
  explicit LogisticRegression(const Json& params)
      : c_(num_param(params, "C", 1.0)),
        max_iter_(static_cast<int>(num_param(params, "max_iter", 200))) {
    require(c_ > 0.0, "lr C must be positive");
  }

  void fit(const Matrix& X, std::span<const int> y, int num_classes) override {
    fit_ = fit_logistic(X, y, num_classes, c_, max_iter_);
  }

  Matrix predict_proba(const Matrix& X) const override {
    return logistic_proba(fit_, X);
  }

  Json state() const override {
    return Json{{"coef", matrix_to_json(fit_.coef)},
                {"intercept", vector_to_json(fit_.intercept)}};
  }

  void load_state(const Json& j) override {
    fit_.coef = matrix_from_json(j.at("coef"));
    fit_.intercept = vector_from_json(j.at("intercept"));
  }

 private:
  double c_;
  int max_iter_;
  LogisticFit fit_;
};

}  // namespace

std::unique_ptr<Classifier> make_logistic(const Json& params) {
  return std::make_unique<LogisticRegression>(params);
}

}  // namespace stackgen::learners
