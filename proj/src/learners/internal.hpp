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

#pragma once

#include <functional>
#include <optional>
#include <string>

#include "stackgen/learners.hpp"

namespace stackgen::learners {

// Parameter access. Missing keys take the default; present keys must have
// the expected JSON type.
double num_param(const Json& params, const char* key, double fallback);
std::string str_param(const Json& params, const char* key, const char* fallback);
// JSON null means "unbounded".
std::optional<int> opt_int_param(const Json& params, const char* key,
                                 std::optional<int> fallback);

Matrix softmax_rows(const Matrix& scores);
void normalize_rows(Matrix& proba);

Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);
Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j);

// Limited-memory BFGS on a smooth objective. `fg` fills the gradient and
// returns the objective value.
using Objective = std::function<double(const Vector& x, Vector& grad)>;
Vector minimize_lbfgs(const Objective& fg, Vector x0, int max_iter,
                      double grad_tol);

// Multinomial logistic regression with an L2 penalty on the weights (not the
// intercepts): mean cross-entropy + ||W||^2 / (2 * C * n).
struct LogisticFit {
  Matrix coef;  // C x D
  Vector intercept;
};
LogisticFit fit_logistic(const Matrix& X, std::span<const int> y, int num_classes,
                         double inverse_reg, int max_iter);
Matrix logistic_proba(const LogisticFit& fit, const Matrix& X);

// CART tree shared by the forest and boosting learners. Classification trees
// store a class distribution per node; regression trees store one value.
class DecisionTree {
 public:
  enum class Criterion { kGini, kEntropy, kSquaredError };

  struct Options {
    Criterion criterion = Criterion::kGini;
    std::optional<int> max_depth;
    int min_samples_split = 2;
    int min_samples_leaf = 1;
    int max_features = 0;  // 0 = all
    bool random_thresholds = false;
  };

  // Weighted classification fit; rows with zero weight are ignored.
  void fit_classifier(const Matrix& X, std::span<const int> y, int num_classes,
                      std::span<const double> weights, const Options& options,
                      Rng& rng);
  void fit_regressor(const Matrix& X, std::span<const double> target,
                     const Options& options, Rng& rng);

  int leaf_of(const Matrix& X, Eigen::Index row) const;
  // Class distribution (classification) at the leaf reached by `row`.
  std::span<const double> distribution(const Matrix& X, Eigen::Index row) const;
  double value(const Matrix& X, Eigen::Index row) const;
  void set_leaf_value(int node, double v);
  std::size_t num_nodes() const { return feature_.size(); }
  int width() const { return width_; }

  Json state() const;
  void load_state(const Json& j);

 private:
  struct Build;
  int add_node();
  void grow(Build& b);

  std::vector<int> feature_;
  std::vector<double> threshold_;
  std::vector<int> left_;
  std::vector<int> right_;
  std::vector<double> values_;  // width_ entries per node
  int width_ = 1;
};

std::unique_ptr<Classifier> make_knn(const Json& params);
std::unique_ptr<Classifier> make_svc(const Json& params, std::uint64_t seed);
std::unique_ptr<Classifier> make_gaussian_nb(const Json& params);
std::unique_ptr<Classifier> make_mlp(const Json& params, std::uint64_t seed);
std::unique_ptr<Classifier> make_logistic(const Json& params);
std::unique_ptr<Classifier> make_lda(const Json& params);
std::unique_ptr<Classifier> make_qda(const Json& params);
std::unique_ptr<Classifier> make_forest(const Json& params, std::uint64_t seed,
                                        bool extra);
std::unique_ptr<Classifier> make_adaboost(const Json& params, std::uint64_t seed);
std::unique_ptr<Classifier> make_gradient_boosting(const Json& params,
                                                   std::uint64_t seed);

}  // namespace stackgen::learners
