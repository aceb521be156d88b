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

// Tree ensembles: random forest, extremely randomized trees, SAMME AdaBoost
// on stumps, and gradient boosting with Newton leaf updates.

#include <algorithm>
#include <cmath>
#include <limits>

#include "learners/internal.hpp"

namespace stackgen::learners {

namespace {

DecisionTree::Criterion parse_criterion(const std::string& s) {
  if (s == "gini") return DecisionTree::Criterion::kGini;
  if (s == "entropy") return DecisionTree::Criterion::kEntropy;
  fail(ErrorCode::kInvalidArgument, "criterion must be gini or entropy, got '" + s + "'");
}

Json trees_to_json(const std::vector<DecisionTree>& trees) {
  Json out = Json::array();
  for (const auto& t : trees) out.push_back(t.state());
  return out;
}

std::vector<DecisionTree> trees_from_json(const Json& j) {
  std::vector<DecisionTree> out;
  for (const auto& item : j) {
    out.emplace_back();
    out.back().load_state(item);
  }
  return out;
}

class Forest final : public Classifier {
 public:
  Forest(const Json& params, std::uint64_t seed, bool extra)
      : n_estimators_(static_cast<int>(num_param(params, "n_estimators", 100))),
        extra_(extra),
        seed_(seed) {
    require(n_estimators_ >= 1, "n_estimators must be positive");
    options_.criterion = parse_criterion(str_param(params, "criterion", "gini"));
    options_.max_depth = opt_int_param(params, "max_depth", std::nullopt);
    options_.min_samples_leaf = static_cast<int>(num_param(params, "min_samples_leaf", 1));
    options_.random_thresholds = extra;
    require(options_.min_samples_leaf >= 1, "min_samples_leaf must be positive");
    require(!options_.max_depth || *options_.max_depth >= 1, "max_depth must be positive");
    if (params.contains("max_features") && params["max_features"].is_number()) {
      fixed_features_ = params["max_features"].get<int>();
      require(fixed_features_ >= 1, "max_features must be positive");
    } else if (params.contains("max_features") && params["max_features"].is_null()) {
      max_features_ = "all";
    } else {
      max_features_ = str_param(params, "max_features", "sqrt");
      require(max_features_ == "sqrt" || max_features_ == "log2" || max_features_ == "all",
              "max_features must be sqrt, log2, all or an integer");
    }
  }

  void fit(const Matrix& X, std::span<const int> y, int num_classes) override {
    num_classes_ = num_classes;
    const auto d = static_cast<int>(X.cols());
    DecisionTree::Options o = options_;
    if (fixed_features_ > 0) {
      o.max_features = std::min(fixed_features_, d);
    } else if (max_features_ == "sqrt") {
      o.max_features = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(d))));
    } else if (max_features_ == "log2") {
      o.max_features = std::max(1, static_cast<int>(std::log2(static_cast<double>(d))));
    } else {
      o.max_features = 0;
    }
    trees_.assign(static_cast<std::size_t>(n_estimators_), DecisionTree{});
    const auto n = static_cast<std::size_t>(X.rows());
    std::vector<double> weights(n, 1.0);
    for (int t = 0; t < n_estimators_; ++t) {
      Rng rng(mix_seed(seed_, static_cast<std::uint64_t>(t)));
      if (!extra_) {
        std::fill(weights.begin(), weights.end(), 0.0);
        for (std::size_t k = 0; k < n; ++k) weights[rng.below(n)] += 1.0;
      }
      trees_[static_cast<std::size_t>(t)].fit_classifier(X, y, num_classes, weights, o, rng);
    }
  }

  Matrix predict_proba(const Matrix& X) const override {
    Matrix out = Matrix::Zero(X.rows(), num_classes_);
    for (const auto& tree : trees_) {
      for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const auto dist = tree.distribution(X, i);
        for (int c = 0; c < num_classes_; ++c) out(i, c) += dist[static_cast<std::size_t>(c)];
      }
    }
    out /= static_cast<double>(trees_.size());
    normalize_rows(out);
    return out;
  }

  Json state() const override {
    return Json{{"num_classes", num_classes_}, {"trees", trees_to_json(trees_)}};
  }

  void load_state(const Json& j) override {
    num_classes_ = j.at("num_classes").get<int>();
    trees_ = trees_from_json(j.at("trees"));
    require(!trees_.empty(), "forest state has no trees", ErrorCode::kSchemaInvalid);
  }

 private:
  int n_estimators_;
  bool extra_;
  std::uint64_t seed_;
  DecisionTree::Options options_;
  std::string max_features_;
  int fixed_features_ = 0;
  int num_classes_ = 0;
  std::vector<DecisionTree> trees_;
};

// Multi-class AdaBoost (SAMME) with depth-one trees.
class AdaBoost final : public Classifier {
 public:
  AdaBoost(const Json& params, std::uint64_t seed)
      : n_estimators_(static_cast<int>(num_param(params, "n_estimators", 50))),
        learning_rate_(num_param(params, "learning_rate", 1.0)),
        seed_(seed) {
    require(n_estimators_ >= 1, "n_estimators must be positive");
    require(learning_rate_ > 0.0, "learning_rate must be positive");
  }

  void fit(const Matrix& X, std::span<const int> y, int num_classes) override {
    num_classes_ = num_classes;
    const auto n = static_cast<std::size_t>(X.rows());
    const double k = num_classes;
    std::vector<double> w(n, 1.0 / static_cast<double>(n));
    DecisionTree::Options o;
    o.max_depth = 1;
    trees_.clear();
    alphas_.clear();
    Rng rng(seed_);
    for (int m = 0; m < n_estimators_; ++m) {
      DecisionTree stump;
      stump.fit_classifier(X, y, num_classes, w, o, rng);
      std::vector<bool> wrong(n);
      double err = 0.0, total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto dist = stump.distribution(X, static_cast<Eigen::Index>(i));
        const auto pred = std::max_element(dist.begin(), dist.end()) - dist.begin();
        wrong[i] = pred != y[i];
        if (wrong[i]) err += w[i];
        total += w[i];
      }
      err /= total;
      if (err <= 0.0) {
        // Perfect stump: keep it with unit weight and stop.
        trees_.push_back(std::move(stump));
        alphas_.push_back(1.0);
        break;
      }
      if (err >= 1.0 - 1.0 / k) {
        if (trees_.empty()) {
          fail(ErrorCode::kTrainingFailed, "first boosting stump is no better than chance");
        }
        break;
      }
      const double alpha = learning_rate_ * (std::log((1.0 - err) / err) + std::log(k - 1.0));
      trees_.push_back(std::move(stump));
      alphas_.push_back(alpha);
      if (m + 1 == n_estimators_) break;
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (wrong[i]) w[i] *= std::exp(alpha);
        sum += w[i];
      }
      for (double& v : w) v /= sum;
    }
  }

  Matrix predict_proba(const Matrix& X) const override {
    Matrix scores = Matrix::Zero(X.rows(), num_classes_);
    double alpha_sum = 0.0;
    for (std::size_t t = 0; t < trees_.size(); ++t) {
      alpha_sum += alphas_[t];
      for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const auto dist = trees_[t].distribution(X, i);
        const auto pred = std::max_element(dist.begin(), dist.end()) - dist.begin();
        scores(i, pred) += alphas_[t];
      }
    }
    scores /= alpha_sum;
    if (num_classes_ == 2) {
      Matrix two(X.rows(), 2);
      for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const double d = scores(i, 1) - scores(i, 0);
        two(i, 0) = -d;
        two(i, 1) = d;
      }
      return softmax_rows(two);
    }
    return softmax_rows(scores / static_cast<double>(num_classes_ - 1));
  }

  Json state() const override {
    return Json{{"num_classes", num_classes_}, {"alphas", alphas_},
                {"trees", trees_to_json(trees_)}};
  }

  void load_state(const Json& j) override {
    num_classes_ = j.at("num_classes").get<int>();
    alphas_ = j.at("alphas").get<std::vector<double>>();
    trees_ = trees_from_json(j.at("trees"));
    require(!trees_.empty() && trees_.size() == alphas_.size(),
            "boosting state is inconsistent", ErrorCode::kSchemaInvalid);
  }

 private:
  int n_estimators_;
  double learning_rate_;
  std::uint64_t seed_;
  int num_classes_ = 0;
  std::vector<DecisionTree> trees_;
  std::vector<double> alphas_;
};

// Gradient boosting on the log-loss. Binary problems grow one tree per round
// on the positive-class logit; otherwise one tree per class.
class GradientBoosting final : public Classifier {
 public:
  GradientBoosting(const Json& params, std::uint64_t seed)
      : n_estimators_(static_cast<int>(num_param(params, "n_estimators", 100))),
        learning_rate_(num_param(params, "learning_rate", 0.1)),
        seed_(seed) {
    require(n_estimators_ >= 1, "n_estimators must be positive");
    require(learning_rate_ > 0.0, "learning_rate must be positive");
    options_.criterion = DecisionTree::Criterion::kSquaredError;
    options_.max_depth = opt_int_param(params, "max_depth", 3);
  }

  void fit(const Matrix& X, std::span<const int> y, int num_classes) override {
    num_classes_ = num_classes;
    const Eigen::Index n = X.rows();
    const int width = num_classes == 2 ? 1 : num_classes;
    std::vector<double> prior(static_cast<std::size_t>(num_classes), 0.0);
    for (int label : y) prior[static_cast<std::size_t>(label)] += 1.0;
    for (double& p : prior) p /= static_cast<double>(n);

    init_ = Vector(width);
    if (width == 1) {
      const double p = std::clamp(prior[1], 1e-15, 1.0 - 1e-15);
      init_(0) = std::log(p / (1.0 - p));
    } else {
      for (int c = 0; c < width; ++c) {
        init_(c) = std::log(std::max(prior[static_cast<std::size_t>(c)], 1e-15));
      }
    }
    Matrix raw = init_.transpose().replicate(n, 1);
    trees_.clear();
    Rng rng(seed_);
    std::vector<double> resid(static_cast<std::size_t>(n));

    for (int m = 0; m < n_estimators_; ++m) {
      const Matrix p = width == 1 ? Matrix() : softmax_rows(raw);
      for (int c = 0; c < width; ++c) {
        for (Eigen::Index i = 0; i < n; ++i) {
          const int label = y[static_cast<std::size_t>(i)];
          const double prob = width == 1 ? 1.0 / (1.0 + std::exp(-raw(i, 0))) : p(i, c);
          const double truth = width == 1 ? (label == 1 ? 1.0 : 0.0) : (label == c ? 1.0 : 0.0);
          resid[static_cast<std::size_t>(i)] = truth - prob;
        }
        DecisionTree tree;
        tree.fit_regressor(X, resid, options_, rng);

        // Newton step per leaf.
        std::vector<double> num(tree.num_nodes(), 0.0), den(tree.num_nodes(), 0.0);
        std::vector<int> leaf(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
          const int node = tree.leaf_of(X, i);
          leaf[static_cast<std::size_t>(i)] = node;
          const double r = resid[static_cast<std::size_t>(i)];
          num[static_cast<std::size_t>(node)] += r;
          den[static_cast<std::size_t>(node)] += std::abs(r) * (1.0 - std::abs(r));
        }
        const double scale = width == 1 ? 1.0 : (num_classes - 1.0) / num_classes;
        for (std::size_t node = 0; node < tree.num_nodes(); ++node) {
          const double v = den[node] < 1e-150 ? 0.0 : scale * num[node] / den[node];
          tree.set_leaf_value(static_cast<int>(node), v);
        }
        for (Eigen::Index i = 0; i < n; ++i) {
          raw(i, c) += learning_rate_ * tree.value(X, i);
        }
        trees_.push_back(std::move(tree));
      }
    }
  }

  Matrix predict_proba(const Matrix& X) const override {
    const int width = static_cast<int>(init_.size());
    Matrix raw = init_.transpose().replicate(X.rows(), 1);
    for (std::size_t t = 0; t < trees_.size(); ++t) {
      const auto c = static_cast<Eigen::Index>(t % static_cast<std::size_t>(width));
      for (Eigen::Index i = 0; i < X.rows(); ++i) {
        raw(i, c) += learning_rate_ * trees_[t].value(X, i);
      }
    }
    if (width > 1) return softmax_rows(raw);
    Matrix out(X.rows(), 2);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      out(i, 1) = 1.0 / (1.0 + std::exp(-raw(i, 0)));
      out(i, 0) = 1.0 - out(i, 1);
    }
    return out;
  }

  Json state() const override {
    return Json{{"num_classes", num_classes_}, {"learning_rate", learning_rate_},
                {"init", vector_to_json(init_)}, {"trees", trees_to_json(trees_)}};
  }

  void load_state(const Json& j) override {
    num_classes_ = j.at("num_classes").get<int>();
    learning_rate_ = j.at("learning_rate").get<double>();
    init_ = vector_from_json(j.at("init"));
    trees_ = trees_from_json(j.at("trees"));
    require(init_.size() >= 1 && trees_.size() % static_cast<std::size_t>(init_.size()) == 0,
            "boosting state is inconsistent", ErrorCode::kSchemaInvalid);
  }

 private:
  int n_estimators_;
  double learning_rate_;
  std::uint64_t seed_;
  DecisionTree::Options options_;
  int num_classes_ = 0;
  Vector init_;
  std::vector<DecisionTree> trees_;
};

}  // namespace

std::unique_ptr<Classifier> make_forest(const Json& params, std::uint64_t seed, bool extra) {
  return std::make_unique<Forest>(params, seed, extra);
}

std::unique_ptr<Classifier> make_adaboost(const Json& params, std::uint64_t seed) {
  return std::make_unique<AdaBoost>(params, seed);
}

std::unique_ptr<Classifier> make_gradient_boosting(const Json& params, std::uint64_t seed) {
  return std::make_unique<GradientBoosting>(params, seed);
}

}  // namespace stackgen::learners
