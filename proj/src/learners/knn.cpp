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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "learners/internal.hpp"

namespace stackgen::learners {

namespace {

class KNearestNeighbors final : public Classifier {
 public:
  explicit KNearestNeighbors(const Json& params)
      : k_(static_cast<int>(num_param(params, "n_neighbors", 5))),
        weights_(str_param(params, "weights", "uniform")),
        metric_(str_param(params, "metric", "euclidean")) {
    require(k_ >= 1, "n_neighbors must be at least 1");
    require(weights_ == "uniform" || weights_ == "distance",
            "knn weights must be 'uniform' or 'distance'");
    require(metric_ == "euclidean" || metric_ == "manhattan",
            "knn metric must be 'euclidean' or 'manhattan'");
  }

  void fit(const Matrix& X, std::span<const int> y, int num_classes) override {
    X_ = X;
    y_.assign(y.begin(), y.end());
    num_classes_ = num_classes;
  }

  Matrix predict_proba(const Matrix& X) const override {
    const auto n_train = static_cast<std::size_t>(X_.rows());
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(k_), n_train);
    Matrix proba = Matrix::Zero(X.rows(), num_classes_);
    std::vector<std::pair<double, std::size_t>> dist(n_train);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      for (std::size_t t = 0; t < n_train; ++t) {
        const auto diff = X_.row(static_cast<Eigen::Index>(t)) - X.row(i);
        const double d = metric_ == "euclidean" ? diff.norm() : diff.cwiseAbs().sum();
        dist[t] = {d, t};
      }
      std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k),
                        dist.end());
      const bool exact_hit = dist[0].first == 0.0;
      for (std::size_t t = 0; t < k; ++t) {
        const auto [d, idx] = dist[t];
        double w = 1.0;
        if (weights_ == "distance") {
          // Exact matches take all the weight.
          if (exact_hit) {
            w = d == 0.0 ? 1.0 : 0.0;
          } else {
            w = 1.0 / d;
          }
        }
        proba(i, y_[idx]) += w;
      }
    }
    normalize_rows(proba);
    return proba;
  }

  Json state() const override {
    return Json{{"X", matrix_to_json(X_)}, {"y", y_}, {"num_classes", num_classes_}};
  }

  void load_state(const Json& j) override {
    X_ = matrix_from_json(j.at("X"));
    y_ = j.at("y").get<std::vector<int>>();
    num_classes_ = j.at("num_classes").get<int>();
  }

 private:
  int k_;
  std::string weights_;
  std::string metric_;
  Matrix X_;
  std::vector<int> y_;
  int num_classes_ = 0;
};

}  // namespace

std::unique_ptr<Classifier> make_knn(const Json& params) {
  return std::make_unique<KNearestNeighbors>(params);
}

}  // namespace stackgen::learners
