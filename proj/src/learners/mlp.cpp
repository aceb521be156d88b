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

// One-hidden-layer perceptron with a softmax output, trained by Adam on
// shuffled mini-batches.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "learners/internal.hpp"

namespace stackgen::learners {

namespace {

constexpr int kBatchSize = 200;
constexpr double kTol = 1e-4;
constexpr int kNoChangeEpochs = 10;

class Perceptron final : public Classifier {
 public:
  Perceptron(const Json& params, std::uint64_t seed)
      : hidden_(static_cast<int>(num_param(params, "hidden_layer_sizes", 100))),
        activation_(str_param(params, "activation", "relu")),
        alpha_(num_param(params, "alpha", 1e-4)),
        lr_(num_param(params, "learning_rate_init", 1e-3)),
        max_iter_(static_cast<int>(num_param(params, "max_iter", 200))),
        seed_(seed) {
    require(hidden_ >= 1, "hidden_layer_sizes must be positive");
    require(activation_ == "relu" || activation_ == "tanh",
            "mlp activation must be relu or tanh");
  }

  void fit(const Matrix& X, std::span<const int> y, int num_classes) override {
    const Eigen::Index n = X.rows(), d = X.cols(), k = num_classes;
    Rng rng(seed_);
    auto glorot = [&](Eigen::Index fan_in, Eigen::Index fan_out) {
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      Matrix m(fan_in, fan_out);
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
      return m;
    };
    W1_ = glorot(d, hidden_);
    b1_ = glorot(1, hidden_).row(0).transpose();
    W2_ = glorot(hidden_, k);
    b2_ = glorot(1, k).row(0).transpose();

    Matrix onehot = Matrix::Zero(n, k);
    for (Eigen::Index i = 0; i < n; ++i) onehot(i, y[static_cast<std::size_t>(i)]) = 1.0;

    // Adam moments.
    Matrix mW1 = Matrix::Zero(d, hidden_), vW1 = mW1;
    Vector mb1 = Vector::Zero(hidden_), vb1 = mb1;
    Matrix mW2 = Matrix::Zero(hidden_, k), vW2 = mW2;
    Vector mb2 = Vector::Zero(k), vb2 = mb2;
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long step = 0;

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    const Eigen::Index batch = std::min<Eigen::Index>(kBatchSize, n);
    double best_loss = std::numeric_limits<double>::infinity();
    int no_change = 0;

    for (int epoch = 0; epoch < max_iter_; ++epoch) {
      rng.shuffle(order);
      double epoch_loss = 0.0;
      for (Eigen::Index start = 0; start < n; start += batch) {
        const Eigen::Index m = std::min(batch, n - start);
        Matrix xb(m, d), yb(m, k);
        for (Eigen::Index r = 0; r < m; ++r) {
          xb.row(r) = X.row(order[static_cast<std::size_t>(start + r)]);
          yb.row(r) = onehot.row(order[static_cast<std::size_t>(start + r)]);
        }
        Matrix pre = xb * W1_;
        pre.rowwise() += b1_.transpose();
        const Matrix h = activate(pre);
        Matrix out = h * W2_;
        out.rowwise() += b2_.transpose();
        const Matrix p = softmax_rows(out);

        double loss = 0.0;
        for (Eigen::Index r = 0; r < m; ++r) {
          for (Eigen::Index c = 0; c < k; ++c) {
            if (yb(r, c) > 0) loss -= std::log(std::clamp(p(r, c), 1e-15, 1.0));
          }
        }
        loss += 0.5 * alpha_ * (W1_.squaredNorm() + W2_.squaredNorm());
        epoch_loss += loss;

        const double inv_m = 1.0 / static_cast<double>(m);
        const Matrix delta_out = (p - yb) * inv_m;
        const Matrix gW2 = h.transpose() * delta_out + alpha_ * inv_m * W2_;
        const Vector gb2 = delta_out.colwise().sum().transpose();
        Matrix delta_h = (delta_out * W2_.transpose()).cwiseProduct(derivative(pre, h));
        const Matrix gW1 = xb.transpose() * delta_h + alpha_ * inv_m * W1_;
        const Vector gb1 = delta_h.colwise().sum().transpose();

        ++step;
        const double lr_t = lr_ * std::sqrt(1.0 - std::pow(beta2, step)) /
                            (1.0 - std::pow(beta1, step));
        auto adam = [&](auto& param, auto& mom, auto& vel, const auto& grad) {
          mom = beta1 * mom + (1.0 - beta1) * grad;
          vel = beta2 * vel + (1.0 - beta2) * grad.cwiseProduct(grad);
          param.array() -= lr_t * mom.array() / (vel.array().sqrt() + eps);
        };
        adam(W1_, mW1, vW1, gW1);
        adam(b1_, mb1, vb1, gb1);
        adam(W2_, mW2, vW2, gW2);
        adam(b2_, mb2, vb2, gb2);
      }
      epoch_loss /= static_cast<double>(n);
      if (!std::isfinite(epoch_loss)) fail(ErrorCode::kTrainingFailed, "MLP diverged");
      if (epoch_loss > best_loss - kTol) {
        if (++no_change >= kNoChangeEpochs) break;
      } else {
        no_change = 0;
      }
      best_loss = std::min(best_loss, epoch_loss);
    }
  }

  Matrix predict_proba(const Matrix& X) const override {
    Matrix pre = X * W1_;
    pre.rowwise() += b1_.transpose();
    Matrix out = activate(pre) * W2_;
    out.rowwise() += b2_.transpose();
    return softmax_rows(out);
  }

  Json state() const override {
    return Json{{"activation", activation_},
                {"W1", matrix_to_json(W1_)}, {"b1", vector_to_json(b1_)},
                {"W2", matrix_to_json(W2_)}, {"b2", vector_to_json(b2_)}};
  }

  void load_state(const Json& j) override {
    activation_ = j.at("activation").get<std::string>();
    W1_ = matrix_from_json(j.at("W1"));
    b1_ = vector_from_json(j.at("b1"));
    W2_ = matrix_from_json(j.at("W2"));
    b2_ = vector_from_json(j.at("b2"));
  }

 private:
  Matrix activate(const Matrix& pre) const {
    if (activation_ == "relu") return pre.cwiseMax(0.0);
    return pre.array().tanh().matrix();
  }

  Matrix derivative(const Matrix& pre, const Matrix& h) const {
    if (activation_ == "relu") {
      return (pre.array() > 0.0).cast<double>().matrix();
    }
    return (1.0 - h.array().square()).matrix();
  }

  int hidden_;
  std::string activation_;
  double alpha_;
  double lr_;
  int max_iter_;
  std::uint64_t seed_;
  Matrix W1_, W2_;
  Vector b1_, b2_;
};

}  // namespace

std::unique_ptr<Classifier> make_mlp(const Json& params, std::uint64_t seed) {
  return std::make_unique<Perceptron>(params, seed);
}

}  // namespace stackgen::learners
