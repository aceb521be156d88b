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

// Cross-validated evaluation of the candidate pool.

#include <atomic>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "stackgen/dataset.hpp"
#include "stackgen/metrics.hpp"
#include "stackgen/model_zoo.hpp"

namespace stackgen {

// Stratified k-fold assignment: within each class the rows are shuffled and
// dealt round-robin. Throws when a class has fewer than k rows.
std::vector<int> stratified_folds(std::span<const int> y, int num_classes, int k,
                                  std::uint64_t seed);

using FeatureMask = std::vector<bool>;
using MaskMap = std::map<ModelId, FeatureMask>;

struct ModelRecord {
  ModelSpec spec;
  FeatureMask feature_mask;
  bool failed = false;
  std::string failure;
  Labels oof_pred;
  Matrix oof_proba;
  // Fold whose model produced each out-of-fold prediction.
  std::vector<int> pred_fold;
  MetricVector metrics;
  double combined = 0.0;
};

struct EvaluationRun {
  SnapshotId snapshot_id = 0;
  std::uint64_t snapshot_fingerprint = 0;
  MetricConfig config;
  std::uint64_t config_hash = 0;
  int num_folds = 5;
  std::uint64_t fold_seed = 0;
  std::vector<int> fold_assignment;
  // Row indices each fold's models were trained on.
  std::vector<std::vector<Eigen::Index>> fold_train_rows;
  std::map<ModelId, ModelRecord> records;

  const ModelRecord& record(ModelId id) const;
  bool contains(ModelId id) const { return records.count(id) > 0; }
  std::vector<ModelId> ids() const;
  std::vector<ModelId> ok_ids() const;
};

// Per-model training results that do not depend on the metric config, so a
// cache hit skips training entirely.
struct CachedResult {
  bool failed = false;
  std::string failure;
  Matrix oof_proba;
  std::vector<int> pred_fold;
};

// Keyed by (snapshot fingerprint, model content, mask, folds). Optionally
// mirrored to a directory as one JSON file per key.
class EvalCache {
 public:
  explicit EvalCache(std::string directory = {});

  static std::uint64_t key(std::uint64_t snapshot_fingerprint, const ModelSpec& spec,
                           const FeatureMask& mask, int num_folds,
                           std::uint64_t fold_seed);

  std::optional<CachedResult> get(std::uint64_t key);
  void put(std::uint64_t key, const CachedResult& value);
  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }

 private:
  std::string directory_;
  std::mutex mutex_;
  std::map<std::uint64_t, CachedResult> memory_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

struct EvalOptions {
  int num_folds = 5;
  std::uint64_t seed = 42;
  int threads = 0;  // 0 = hardware concurrency
  EvalCache* cache = nullptr;
  std::function<void(std::size_t done, std::size_t total)> progress;
};

// Runs fn(0..n-1) over `threads` workers (0 = hardware concurrency).
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

// Full-width mask for models absent from `masks`.
FeatureMask mask_for(const MaskMap& masks, ModelId id, Eigen::Index num_features);

// Trains every spec on every fold. Failures become flagged records with
// combined = 0.
EvaluationRun evaluate_pool(const DatasetSnapshot& snapshot,
                            const std::vector<ModelSpec>& pool,
                            const MetricConfig& config, const MaskMap& masks,
                            const EvalOptions& options);

// Trains one model on every fold of `run` and collects its out-of-fold
// probabilities. Training errors are reported in the result, not thrown.
CachedResult cross_validate(const DatasetSnapshot& snapshot, const ModelSpec& spec,
                            const FeatureMask& mask, const EvaluationRun& run);

// Adds (or replaces) records in `run` for the given specs, reusing its folds.
void extend_run(EvaluationRun& run, const DatasetSnapshot& snapshot,
                const std::vector<ModelSpec>& specs, const MaskMap& masks,
                const EvalOptions& options);

// Recomputes metrics and combined scores under a new config. Out-of-fold
// arrays are copied untouched.
EvaluationRun rescore(const EvaluationRun& run, const DatasetSnapshot& snapshot,
                      const MetricConfig& config);

// True when no out-of-fold prediction came from a model that saw its row.
bool verify_out_of_fold(const EvaluationRun& run);

// Five-number summary with midpoint interpolation between order statistics.
struct BoxStats {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  std::size_t count = 0;
};
BoxStats box_stats(std::vector<double> values);

struct AlgorithmDistribution {
  Algorithm algorithm;
  BoxStats stats;
};
std::vector<AlgorithmDistribution> algorithm_score_distribution(
    const EvaluationRun& run, std::vector<std::string>* notices = nullptr);

struct ClassTriple {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};
struct ClassSummary {
  ClassTriple baseline;
  std::optional<ClassTriple> selected;
};
struct AlgorithmClassSummary {
  Algorithm algorithm;
  std::vector<ClassSummary> classes;
};
std::vector<AlgorithmClassSummary> per_class_summary(const EvaluationRun& run,
                                                     const std::set<ModelId>& selected);

}  // namespace stackgen
