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

// Classification metrics and the user-weighted combined score.
//
// Eight metrics are supported: six threshold metrics (accuracy, g-mean,
// precision, recall, f-beta, MCC), one ranking metric (ROC AUC) and one
// probability metric (log loss). Each is reported on its native scale and
// normalized to [0, 1]; only MCC ((raw + 1) / 2) and log loss
// (1 / (1 + raw)) need a transform.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "stackgen/common.hpp"

namespace stackgen {

enum class Metric : int {
  kAccuracy = 0,
  kGMean,
  kPrecision,
  kRecall,
  kFBeta,
  kMcc,
  kRocAuc,
  kLogLoss,
};

inline constexpr std::size_t kNumMetrics = 8;
inline constexpr std::array<Metric, kNumMetrics> kAllMetrics = {
    Metric::kAccuracy, Metric::kGMean, Metric::kPrecision, Metric::kRecall,
    Metric::kFBeta,    Metric::kMcc,   Metric::kRocAuc,    Metric::kLogLoss};

std::string_view metric_id(Metric m);
Metric parse_metric(std::string_view id);
// True for the four metrics that take an averaging option.
bool metric_has_averaging(Metric m);

enum class Averaging { kMicro, kMacro, kWeighted };

std::string_view averaging_id(Averaging a);
Averaging parse_averaging(std::string_view id);

template <typename T>
using PerMetric = std::array<T, kNumMetrics>;

template <typename T>
T& at(PerMetric<T>& values, Metric m) {
  return values[static_cast<std::size_t>(m)];
}
template <typename T>
const T& at(const PerMetric<T>& values, Metric m) {
  return values[static_cast<std::size_t>(m)];
}

struct MetricConfig {
  // Integer percent per metric; the API accepts 0..100 in steps of 5.
  PerMetric<double> weights{100, 100, 100, 100, 100, 100, 100, 100};
  Averaging precision_avg = Averaging::kMacro;
  Averaging recall_avg = Averaging::kMacro;
  Averaging fbeta_avg = Averaging::kMacro;
  Averaging roc_auc_avg = Averaging::kMacro;
  double beta = 1.0;
  bool detailed_feature_search = true;

  double weight(Metric m) const { return at(weights, m); }
  Averaging averaging(Metric m) const;
  void set_averaging(Metric m, Averaging a);

  // Throws on weights outside [0, 100], off the 5-step grid, or beta not in
  // {0.5, 1, 2}. Scoring itself accepts arbitrary non-negative weights.
  void validate_api() const;
  // Hash of the fields that affect scores.
  std::uint64_t hash() const;
};

struct PerClassStats {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double fbeta = 0.0;
  std::int64_t support = 0;
};

struct MetricVector {
  PerMetric<double> raw{};
  PerMetric<double> normalized{};
  std::vector<PerClassStats> per_class;

  double raw_of(Metric m) const { return at(raw, m); }
  double normalized_of(Metric m) const { return at(normalized, m); }
};

// Computes all eight metrics. `y_proba` is N x num_classes and row-stochastic;
// `num_classes` fixes the class universe and labels are indices into it.
MetricVector compute_metrics(std::span<const int> y_true,
                             std::span<const int> y_pred, const Matrix& y_proba,
                             int num_classes, const MetricConfig& config);

// Threshold metrics only (no probabilities); ROC AUC and log loss are left 0.
MetricVector compute_label_metrics(std::span<const int> y_true,
                                   std::span<const int> y_pred,
                                   int num_classes, const MetricConfig& config);

// sum_m w_m * normalized_m / sum_m w_m. Throws kNoActiveMetrics when every
// weight is zero.
double weighted_score(const MetricVector& v, const MetricConfig& config);
double weighted_score(const PerMetric<double>& normalized,
                      const PerMetric<double>& weights);

double normalize_metric(Metric m, double raw);

// Building blocks, exposed for the importance and stacking code.
Matrix confusion_matrix(std::span<const int> y_true,
                        std::span<const int> y_pred, int num_classes);
double roc_auc_binary(std::span<const double> scores,
                      std::span<const int> positive);

// The four-metric summary used for stacks.
struct StackPerformance {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  std::array<double, 4> as_array() const {
    return {accuracy, precision, recall, f1};
  }
  bool operator==(const StackPerformance&) const = default;
};

StackPerformance stack_performance(std::span<const int> y_true,
                                   std::span<const int> y_pred,
                                   int num_classes, const MetricConfig& config);

}  // namespace stackgen
