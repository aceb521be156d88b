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

#include "stackgen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace stackgen {

namespace {

constexpr double kProbClip = 1e-15;
constexpr double kRowSumTolerance = 1e-6;

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

double fbeta_of(double precision, double recall, double beta) {
  const double b2 = beta * beta;
  return safe_div((1.0 + b2) * precision * recall, b2 * precision + recall);
}

struct Counts {
  std::vector<double> tp, fp, fn, support, predicted;
  std::vector<bool> present;  // in y_true or y_pred
};

Counts count(std::span<const int> y_true, std::span<const int> y_pred,
             int num_classes) {
  Counts c;
  const auto k = static_cast<std::size_t>(num_classes);
  c.tp.assign(k, 0);
  c.fp.assign(k, 0);
  c.fn.assign(k, 0);
  c.support.assign(k, 0);
  c.predicted.assign(k, 0);
  c.present.assign(k, false);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const auto t = static_cast<std::size_t>(y_true[i]);
    const auto p = static_cast<std::size_t>(y_pred[i]);
    c.support[t] += 1;
    c.predicted[p] += 1;
    c.present[t] = c.present[p] = true;
    if (t == p) {
      c.tp[t] += 1;
    } else {
      c.fp[p] += 1;
      c.fn[t] += 1;
    }
  }
  return c;
}

// Averages a per-class quantity under macro (present classes) or weighted
// (by true support) rules.
double average(const std::vector<double>& per_class, const Counts& c,
               Averaging mode) {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < per_class.size(); ++k) {
    if (mode == Averaging::kMacro) {
      if (!c.present[k]) continue;
      num += per_class[k];
      den += 1.0;
    } else {
      num += per_class[k] * c.support[k];
      den += c.support[k];
    }
  }
  return safe_div(num, den);
}

void check_labels(std::span<const int> y_true, std::span<const int> y_pred,
                  int num_classes) {
  require(!y_true.empty(), "empty input");
  require(y_true.size() == y_pred.size(),
          "length mismatch: y_true has " + std::to_string(y_true.size()) +
              " entries, y_pred has " + std::to_string(y_pred.size()));
  require(num_classes >= 1, "num_classes must be positive");
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    require(y_true[i] >= 0 && y_true[i] < num_classes &&
                y_pred[i] >= 0 && y_pred[i] < num_classes,
            "label outside the class universe at index " + std::to_string(i));
  }
}

void fill_threshold_metrics(MetricVector& v, std::span<const int> y_true,
                            std::span<const int> y_pred, int num_classes,
                            const MetricConfig& config) {
  const Counts c = count(y_true, y_pred, num_classes);
  const auto k = static_cast<std::size_t>(num_classes);
  const double n = static_cast<double>(y_true.size());

  std::vector<double> prec(k), rec(k), fb(k);
  v.per_class.assign(k, {});
  for (std::size_t j = 0; j < k; ++j) {
    prec[j] = safe_div(c.tp[j], c.tp[j] + c.fp[j]);
    rec[j] = safe_div(c.tp[j], c.support[j]);
    fb[j] = fbeta_of(prec[j], rec[j], config.beta);
    v.per_class[j] = {prec[j], rec[j], fbeta_of(prec[j], rec[j], 1.0), fb[j],
                      static_cast<std::int64_t>(c.support[j])};
  }

  const double tp_sum = std::accumulate(c.tp.begin(), c.tp.end(), 0.0);
  const double fp_sum = std::accumulate(c.fp.begin(), c.fp.end(), 0.0);
  const double fn_sum = std::accumulate(c.fn.begin(), c.fn.end(), 0.0);
  const double micro_p = safe_div(tp_sum, tp_sum + fp_sum);
  const double micro_r = safe_div(tp_sum, tp_sum + fn_sum);

  auto averaged = [&](const std::vector<double>& per, Averaging mode,
                      double micro) {
    return mode == Averaging::kMicro ? micro : average(per, c, mode);
  };

  at(v.raw, Metric::kAccuracy) = tp_sum / n;
  at(v.raw, Metric::kPrecision) = averaged(prec, config.precision_avg, micro_p);
  at(v.raw, Metric::kRecall) = averaged(rec, config.recall_avg, micro_r);
  at(v.raw, Metric::kFBeta) = averaged(
      fb, config.fbeta_avg, fbeta_of(micro_p, micro_r, config.beta));

  // g-mean over the classes that occur in y_true.
  double log_sum = 0.0;
  int n_true_classes = 0;
  bool any_zero = false;
  for (std::size_t j = 0; j < k; ++j) {
    if (c.support[j] == 0) continue;
    ++n_true_classes;
    if (rec[j] == 0.0) {
      any_zero = true;
    } else {
      log_sum += std::log(rec[j]);
    }
  }
  at(v.raw, Metric::kGMean) =
      any_zero ? 0.0 : std::exp(log_sum / n_true_classes);

  // Multiclass MCC (Gorodkin's R_K statistic).
  double sum_pt = 0.0, sum_pp = 0.0, sum_tt = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    sum_pt += c.predicted[j] * c.support[j];
    sum_pp += c.predicted[j] * c.predicted[j];
    sum_tt += c.support[j] * c.support[j];
  }
  const double cov = tp_sum * n - sum_pt;
  const double den = std::sqrt((n * n - sum_pp) * (n * n - sum_tt));
  at(v.raw, Metric::kMcc) = den == 0.0 ? 0.0 : cov / den;
}

void finalize(MetricVector& v) {
  for (Metric m : kAllMetrics) {
    at(v.normalized, m) = normalize_metric(m, at(v.raw, m));
  }
}

}  // namespace

std::string_view metric_id(Metric m) {
  switch (m) {
    case Metric::kAccuracy: return "accuracy";
    case Metric::kGMean: return "gmean";
    case Metric::kPrecision: return "precision";
    case Metric::kRecall: return "recall";
    case Metric::kFBeta: return "fbeta";
    case Metric::kMcc: return "mcc";
    case Metric::kRocAuc: return "roc_auc";
    case Metric::kLogLoss: return "log_loss";
  }
  return "";
}

Metric parse_metric(std::string_view id) {
  for (Metric m : kAllMetrics) {
    if (metric_id(m) == id) return m;
  }
  fail(ErrorCode::kInvalidArgument, "unknown metric id '" + std::string(id) + "'");
}

bool metric_has_averaging(Metric m) {
  return m == Metric::kPrecision || m == Metric::kRecall ||
         m == Metric::kFBeta || m == Metric::kRocAuc;
}

std::string_view averaging_id(Averaging a) {
  switch (a) {
    case Averaging::kMicro: return "micro";
    case Averaging::kMacro: return "macro";
    case Averaging::kWeighted: return "weighted";
  }
  return "";
}

Averaging parse_averaging(std::string_view id) {
  if (id == "micro") return Averaging::kMicro;
  if (id == "macro") return Averaging::kMacro;
  if (id == "weighted") return Averaging::kWeighted;
  fail(ErrorCode::kInvalidArgument, "unknown averaging '" + std::string(id) + "'");
}

Averaging MetricConfig::averaging(Metric m) const {
  switch (m) {
    case Metric::kPrecision: return precision_avg;
    case Metric::kRecall: return recall_avg;
    case Metric::kFBeta: return fbeta_avg;
    case Metric::kRocAuc: return roc_auc_avg;
    default:
      fail(ErrorCode::kInvalidArgument,
           "metric '" + std::string(metric_id(m)) + "' has no averaging option");
  }
}

void MetricConfig::set_averaging(Metric m, Averaging a) {
  switch (m) {
    case Metric::kPrecision: precision_avg = a; break;
    case Metric::kRecall: recall_avg = a; break;
    case Metric::kFBeta: fbeta_avg = a; break;
    case Metric::kRocAuc: roc_auc_avg = a; break;
    default:
      fail(ErrorCode::kInvalidArgument,
           "metric '" + std::string(metric_id(m)) + "' has no averaging option");
  }
}

void MetricConfig::validate_api() const {
  for (Metric m : kAllMetrics) {
    const double w = weight(m);
    const std::string name(metric_id(m));
    require(w >= 0.0 && w <= 100.0, "weight of " + name + " outside [0, 100]");
    require(std::fmod(w, 5.0) == 0.0,
            "weight of " + name + " must be a multiple of 5");
  }
  require(beta == 0.5 || beta == 1.0 || beta == 2.0,
          "beta must be one of 0.5, 1, 2");
}

std::uint64_t MetricConfig::hash() const {
  Fnv1a h;
  for (double w : weights) h.f64(w);
  h.u64(static_cast<std::uint64_t>(precision_avg))
      .u64(static_cast<std::uint64_t>(recall_avg))
      .u64(static_cast<std::uint64_t>(fbeta_avg))
      .u64(static_cast<std::uint64_t>(roc_auc_avg))
      .f64(beta);
  return h.digest();
}

double normalize_metric(Metric m, double raw) {
  switch (m) {
    case Metric::kMcc: return (raw + 1.0) / 2.0;
    case Metric::kLogLoss: return 1.0 / (1.0 + raw);
    default: return raw;
  }
}

Matrix confusion_matrix(std::span<const int> y_true,
                        std::span<const int> y_pred, int num_classes) {
  check_labels(y_true, y_pred, num_classes);
  Matrix cm = Matrix::Zero(num_classes, num_classes);
  for (std::size_t i = 0; i < y_true.size(); ++i) cm(y_true[i], y_pred[i]) += 1;
  return cm;
}

double roc_auc_binary(std::span<const double> scores,
                      std::span<const int> positive) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  // Mann-Whitney U with mid-ranks for ties.
  double rank_sum = 0.0, n_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) {
      if (positive[order[t]]) {
        rank_sum += mid_rank;
        n_pos += 1.0;
      }
    }
    i = j + 1;
  }
  const double n_neg = static_cast<double>(n) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) return 0.0;
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

MetricVector compute_label_metrics(std::span<const int> y_true,
                                   std::span<const int> y_pred,
                                   int num_classes, const MetricConfig& config) {
  check_labels(y_true, y_pred, num_classes);
  MetricVector v;
  fill_threshold_metrics(v, y_true, y_pred, num_classes, config);
  finalize(v);
  return v;
}

MetricVector compute_metrics(std::span<const int> y_true,
                             std::span<const int> y_pred, const Matrix& y_proba,
                             int num_classes, const MetricConfig& config) {
  check_labels(y_true, y_pred, num_classes);
  const auto n = static_cast<Eigen::Index>(y_true.size());
  require(y_proba.rows() == n, "length mismatch: y_proba has " +
                                   std::to_string(y_proba.rows()) + " rows");
  require(y_proba.cols() == num_classes,
          "y_proba must have one column per class");
  for (Eigen::Index i = 0; i < n; ++i) {
    require(std::abs(y_proba.row(i).sum() - 1.0) <= kRowSumTolerance,
            "probability row " + std::to_string(i) + " does not sum to 1");
  }

  MetricVector v;
  fill_threshold_metrics(v, y_true, y_pred, num_classes, config);

  // One-vs-rest ROC AUC. Classes without positives or negatives in y_true are
  // skipped and the remaining weights renormalized.
  const auto k = static_cast<std::size_t>(num_classes);
  std::vector<int> is_pos(y_true.size());
  std::vector<double> scores(y_true.size());
  if (config.roc_auc_avg == Averaging::kMicro) {
    std::vector<double> flat_scores;
    std::vector<int> flat_pos;
    flat_scores.reserve(y_true.size() * k);
    flat_pos.reserve(y_true.size() * k);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        flat_scores.push_back(y_proba(i, static_cast<Eigen::Index>(j)));
        flat_pos.push_back(y_true[i] == static_cast<int>(j) ? 1 : 0);
      }
    }
    at(v.raw, Metric::kRocAuc) = roc_auc_binary(flat_scores, flat_pos);
  } else {
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const auto support = v.per_class[j].support;
      if (support == 0 || support == n) continue;
      for (Eigen::Index i = 0; i < n; ++i) {
        is_pos[i] = y_true[i] == static_cast<int>(j) ? 1 : 0;
        scores[i] = y_proba(i, static_cast<Eigen::Index>(j));
      }
      const double w = config.roc_auc_avg == Averaging::kWeighted
                           ? static_cast<double>(support)
                           : 1.0;
      num += w * roc_auc_binary(scores, is_pos);
      den += w;
    }
    at(v.raw, Metric::kRocAuc) = safe_div(num, den);
  }

  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p = std::clamp(y_proba(i, y_true[i]), kProbClip, 1.0 - kProbClip);
    loss -= std::log(p);
  }
  at(v.raw, Metric::kLogLoss) = loss / static_cast<double>(n);

  finalize(v);
  return v;
}

double weighted_score(const PerMetric<double>& normalized,
                      const PerMetric<double>& weights) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < kNumMetrics; ++i) {
    require(weights[i] >= 0.0, "metric weights must be non-negative");
    num += weights[i] * normalized[i];
    den += weights[i];
  }
  if (den <= 0.0) fail(ErrorCode::kNoActiveMetrics, "no active metrics");
  return num / den;
}

double weighted_score(const MetricVector& v, const MetricConfig& config) {
  return weighted_score(v.normalized, config.weights);
}

StackPerformance stack_performance(std::span<const int> y_true,
                                   std::span<const int> y_pred,
                                   int num_classes, const MetricConfig& config) {
  MetricConfig f1_config = config;
  f1_config.beta = 1.0;
  const MetricVector v =
      compute_label_metrics(y_true, y_pred, num_classes, f1_config);
  return {v.raw_of(Metric::kAccuracy), v.raw_of(Metric::kPrecision),
          v.raw_of(Metric::kRecall), v.raw_of(Metric::kFBeta)};
}

}  // namespace stackgen
