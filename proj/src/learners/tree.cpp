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

constexpr double kPure = 1e-12;

double node_impurity(DecisionTree::Criterion c, std::span<const double> w, double total) {
  if (total <= 0.0) return 0.0;
  double out = c == DecisionTree::Criterion::kGini ? 1.0 : 0.0;
  for (double v : w) {
    const double p = v / total;
    if (c == DecisionTree::Criterion::kGini) {
      out -= p * p;
    } else if (p > 0.0) {
      out -= p * std::log2(p);
    }
  }
  return out;
}

}  // namespace

struct DecisionTree::Build {
  const Matrix& X;
  std::span<const int> y;             // classification
  std::span<const double> target;     // regression
  std::span<const double> weight;     // classification, may be empty
  int num_classes = 0;
  const Options& options;
  Rng& rng;
  std::vector<Eigen::Index> rows;
  std::vector<std::pair<double, Eigen::Index>> scratch;
  std::vector<int> features;

  bool regression() const { return options.criterion == Criterion::kSquaredError; }
  double w(Eigen::Index r) const {
    return weight.empty() ? 1.0 : weight[static_cast<std::size_t>(r)];
  }
};

int DecisionTree::add_node() {
  feature_.push_back(-1);
  threshold_.push_back(0.0);
  left_.push_back(-1);
  right_.push_back(-1);
  values_.resize(values_.size() + static_cast<std::size_t>(width_), 0.0);
  return static_cast<int>(feature_.size()) - 1;
}

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double gain = -1.0;
  std::size_t n_left = 0;
};

}  // namespace

void DecisionTree::fit_classifier(const Matrix& X, std::span<const int> y,
                                  int num_classes, std::span<const double> weights,
                                  const Options& options, Rng& rng) {
  require(options.criterion != Criterion::kSquaredError,
          "classification tree needs gini or entropy");
  width_ = num_classes;
  feature_.clear();
  threshold_.clear();
  left_.clear();
  right_.clear();
  values_.clear();
  Build b{X, y, {}, weights, num_classes, options, rng, {}, {}, {}};
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    if (b.w(r) > 0.0) b.rows.push_back(r);
  }
  grow(b);
}

void DecisionTree::fit_regressor(const Matrix& X, std::span<const double> target,
                                 const Options& options, Rng& rng) {
  Options o = options;
  o.criterion = Criterion::kSquaredError;
  width_ = 1;
  feature_.clear();
  threshold_.clear();
  left_.clear();
  right_.clear();
  values_.clear();
  Build b{X, {}, target, {}, 0, o, rng, {}, {}, {}};
  b.rows.resize(static_cast<std::size_t>(X.rows()));
  std::iota(b.rows.begin(), b.rows.end(), 0);
  grow(b);
}

void DecisionTree::grow(Build& b) {
  b.features.resize(static_cast<std::size_t>(b.X.cols()));
  struct Task {
    int node;
    std::size_t begin, end;
    int depth;
  };
  std::vector<Task> stack;
  stack.push_back({add_node(), 0, b.rows.size(), 0});
  std::vector<double> left_w(static_cast<std::size_t>(width_)),
      total_w(static_cast<std::size_t>(width_));

  while (!stack.empty()) {
    const Task task = stack.back();
    stack.pop_back();
    const std::size_t n = task.end - task.begin;

    // Node value and impurity.
    double impurity = 0.0, total = 0.0, sum = 0.0, sumsq = 0.0;
    std::fill(total_w.begin(), total_w.end(), 0.0);
    for (std::size_t k = task.begin; k < task.end; ++k) {
      const Eigen::Index r = b.rows[k];
      if (b.regression()) {
        const double t = b.target[static_cast<std::size_t>(r)];
        sum += t;
        sumsq += t * t;
      } else {
        total_w[static_cast<std::size_t>(b.y[static_cast<std::size_t>(r)])] += b.w(r);
      }
    }
    double* value = values_.data() + static_cast<std::size_t>(task.node) * width_;
    if (b.regression()) {
      total = static_cast<double>(n);
      value[0] = n > 0 ? sum / total : 0.0;
      impurity = n > 0 ? sumsq - sum * sum / total : 0.0;
    } else {
      total = std::accumulate(total_w.begin(), total_w.end(), 0.0);
      for (int c = 0; c < width_; ++c) {
        value[c] = total > 0.0 ? total_w[static_cast<std::size_t>(c)] / total : 0.0;
      }
      impurity = node_impurity(b.options.criterion, total_w, total);
    }

    const auto min_leaf = static_cast<std::size_t>(std::max(1, b.options.min_samples_leaf));
    if ((b.options.max_depth && task.depth >= *b.options.max_depth) ||
        n < static_cast<std::size_t>(b.options.min_samples_split) || n < 2 * min_leaf ||
        impurity <= kPure) {
      continue;
    }

    std::iota(b.features.begin(), b.features.end(), 0);
    b.rng.shuffle(b.features);
    const int max_features =
        b.options.max_features > 0 ? b.options.max_features : static_cast<int>(b.X.cols());

    Split best;
    int evaluated = 0;
    for (int f : b.features) {
      if (evaluated >= max_features && best.feature >= 0) break;
      b.scratch.clear();
      for (std::size_t k = task.begin; k < task.end; ++k) {
        b.scratch.emplace_back(b.X(b.rows[k], f), b.rows[k]);
      }
      auto [mn, mx] = std::minmax_element(b.scratch.begin(), b.scratch.end());
      const double lo = mn->first, hi = mx->first;
      if (hi <= lo) continue;  // constant in this node
      ++evaluated;

      auto score = [&](double l_imp_weighted, double r_imp_weighted) {
        return b.regression() ? impurity - l_imp_weighted - r_imp_weighted
                              : impurity * total - l_imp_weighted - r_imp_weighted;
      };

      if (b.options.random_thresholds) {
        double thr = b.rng.uniform(lo, hi);
        if (thr >= hi) thr = lo;
        std::fill(left_w.begin(), left_w.end(), 0.0);
        double ls = 0, lss = 0, lw = 0;
        std::size_t nl = 0;
        for (const auto& [x, r] : b.scratch) {
          if (x > thr) continue;
          ++nl;
          if (b.regression()) {
            const double t = b.target[static_cast<std::size_t>(r)];
            ls += t;
            lss += t * t;
          } else {
            left_w[static_cast<std::size_t>(b.y[static_cast<std::size_t>(r)])] += b.w(r);
            lw += b.w(r);
          }
        }
        const std::size_t nr = n - nl;
        if (nl < min_leaf || nr < min_leaf) continue;
        double gain;
        if (b.regression()) {
          const double rs = sum - ls, rss = sumsq - lss;
          gain = score(lss - ls * ls / static_cast<double>(nl),
                       rss - rs * rs / static_cast<double>(nr));
        } else {
          std::vector<double> right_w(total_w);
          for (int c = 0; c < width_; ++c) {
            right_w[static_cast<std::size_t>(c)] -= left_w[static_cast<std::size_t>(c)];
          }
          const double rw = total - lw;
          gain = score(lw * node_impurity(b.options.criterion, left_w, lw),
                       rw * node_impurity(b.options.criterion, right_w, rw));
        }
        if (gain > best.gain) best = {f, thr, gain, nl};
        continue;
      }

      std::sort(b.scratch.begin(), b.scratch.end());
      std::fill(left_w.begin(), left_w.end(), 0.0);
      std::vector<double> right_w(static_cast<std::size_t>(width_));
      double ls = 0, lss = 0, lw = 0;
      for (std::size_t p = 0; p + 1 < n; ++p) {
        const Eigen::Index r = b.scratch[p].second;
        if (b.regression()) {
          const double t = b.target[static_cast<std::size_t>(r)];
          ls += t;
          lss += t * t;
        } else {
          left_w[static_cast<std::size_t>(b.y[static_cast<std::size_t>(r)])] += b.w(r);
          lw += b.w(r);
        }
        const std::size_t nl = p + 1, nr = n - nl;
        if (b.scratch[p].first >= b.scratch[p + 1].first) continue;
        if (nl < min_leaf || nr < min_leaf) continue;
        double gain;
        if (b.regression()) {
          const double rs = sum - ls, rss = sumsq - lss;
          gain = score(lss - ls * ls / static_cast<double>(nl),
                       rss - rs * rs / static_cast<double>(nr));
        } else {
          for (int c = 0; c < width_; ++c) {
            right_w[static_cast<std::size_t>(c)] =
                total_w[static_cast<std::size_t>(c)] - left_w[static_cast<std::size_t>(c)];
          }
          const double rw = total - lw;
          gain = score(lw * node_impurity(b.options.criterion, left_w, lw),
                       rw * node_impurity(b.options.criterion, right_w, rw));
        }
        if (gain > best.gain) {
          double thr = 0.5 * (b.scratch[p].first + b.scratch[p + 1].first);
          if (thr >= b.scratch[p + 1].first) thr = b.scratch[p].first;
          best = {f, thr, gain, nl};
        }
      }
    }
    if (best.feature < 0 || best.gain <= kPure) continue;

    // Partition rows in place: left block x <= threshold.
    auto mid = std::stable_partition(
        b.rows.begin() + static_cast<std::ptrdiff_t>(task.begin),
        b.rows.begin() + static_cast<std::ptrdiff_t>(task.end),
        [&](Eigen::Index r) { return b.X(r, best.feature) <= best.threshold; });
    const auto split_at = static_cast<std::size_t>(mid - b.rows.begin());
    const int left = add_node();
    const int right = add_node();
    feature_[static_cast<std::size_t>(task.node)] = best.feature;
    threshold_[static_cast<std::size_t>(task.node)] = best.threshold;
    left_[static_cast<std::size_t>(task.node)] = left;
    right_[static_cast<std::size_t>(task.node)] = right;
    stack.push_back({right, split_at, task.end, task.depth + 1});
    stack.push_back({left, task.begin, split_at, task.depth + 1});
  }
}

int DecisionTree::leaf_of(const Matrix& X, Eigen::Index row) const {
  int node = 0;
  while (feature_[static_cast<std::size_t>(node)] >= 0) {
    const auto k = static_cast<std::size_t>(node);
    node = X(row, feature_[k]) <= threshold_[k] ? left_[k] : right_[k];
  }
  return node;
}

std::span<const double> DecisionTree::distribution(const Matrix& X, Eigen::Index row) const {
  const auto leaf = static_cast<std::size_t>(leaf_of(X, row));
  return {values_.data() + leaf * static_cast<std::size_t>(width_),
          static_cast<std::size_t>(width_)};
}

double DecisionTree::value(const Matrix& X, Eigen::Index row) const {
  return values_[static_cast<std::size_t>(leaf_of(X, row)) * static_cast<std::size_t>(width_)];
}

void DecisionTree::set_leaf_value(int node, double v) {
  values_[static_cast<std::size_t>(node) * static_cast<std::size_t>(width_)] = v;
}

Json DecisionTree::state() const {
  // Internal nodes carry no values; only leaves are written.
  Json leaf_values = Json::array();
  for (std::size_t k = 0; k < feature_.size(); ++k) {
    if (feature_[k] >= 0) continue;
    for (int c = 0; c < width_; ++c) {
      leaf_values.push_back(values_[k * static_cast<std::size_t>(width_) +
                                    static_cast<std::size_t>(c)]);
    }
  }
  return Json{{"width", width_},      {"feature", feature_}, {"threshold", threshold_},
              {"left", left_},        {"right", right_},     {"leaf_values", leaf_values}};
}

void DecisionTree::load_state(const Json& j) {
  width_ = j.at("width").get<int>();
  feature_ = j.at("feature").get<std::vector<int>>();
  threshold_ = j.at("threshold").get<std::vector<double>>();
  left_ = j.at("left").get<std::vector<int>>();
  right_ = j.at("right").get<std::vector<int>>();
  const auto leaf_values = j.at("leaf_values").get<std::vector<double>>();
  require(threshold_.size() == feature_.size() && left_.size() == feature_.size() &&
              right_.size() == feature_.size(),
          "tree arrays have inconsistent lengths", ErrorCode::kSchemaInvalid);
  values_.assign(feature_.size() * static_cast<std::size_t>(width_), 0.0);
  std::size_t next = 0;
  for (std::size_t k = 0; k < feature_.size(); ++k) {
    if (feature_[k] >= 0) continue;
    for (int c = 0; c < width_; ++c) {
      require(next < leaf_values.size(), "tree leaf values truncated",
              ErrorCode::kSchemaInvalid);
      values_[k * static_cast<std::size_t>(width_) + static_cast<std::size_t>(c)] =
          leaf_values[next++];
    }
  }
}

}  // namespace stackgen::learners
