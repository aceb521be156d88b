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

// Feature importance per (feature, model): a univariate class-separation
// statistic, permutation drop without retraining, and drop-column
// retraining. All tables hold values in [0, 1].

#include <functional>
#include <set>
#include <string>
#include <vector>

#include "stackgen/eval_engine.hpp"

namespace stackgen {

enum class ImportanceMethod { kUnivariate, kPermutation, kAccuracy, kCombined };

std::string_view importance_method_id(ImportanceMethod m);
ImportanceMethod parse_importance_method(std::string_view id);

struct ImportanceTable {
  ImportanceMethod method = ImportanceMethod::kUnivariate;
  std::uint64_t snapshot_fingerprint = 0;
  std::vector<std::string> features;
  std::vector<ModelId> models;
  Matrix values;  // features x models
  // Cells that could not be computed (drop-column on a model's last
  // feature, or a failed retrain). Their value is 0.
  std::vector<std::vector<bool>> missing;
  std::vector<double> row_average;  // over non-missing cells
  std::set<ImportanceMethod> enabled;

  void finalize_rows();
};

// One-way ANOVA F statistic per feature. Constant features give 0; a
// feature with zero within-class spread and nonzero between-class spread
// gives +inf.
Vector anova_f(const DatasetSnapshot& snapshot);

// Min-max scaling onto [0, 1]; constant input maps to zeros. Infinite
// entries map to 1 and, being the maximum, send every finite entry to 0.
Vector min_max_normalize(const Vector& v);

Vector univariate_importance(const DatasetSnapshot& snapshot);

struct PermutationOptions {
  int repeats = 5;
  std::uint64_t seed = 7;
};

// Mean drop of the model's weighted score when one column is shuffled
// within each held-out fold; fold models are refit with the run's folds.
// Negative drops clip to 0 and the column is min-max scaled.
Vector permutation_importance(const DatasetSnapshot& snapshot, const EvaluationRun& run,
                              ModelId model, const MetricConfig& config,
                              const PermutationOptions& options = {});

struct DropColumnResult {
  Vector values;
  std::vector<bool> missing;
};

// Drop in out-of-fold accuracy when the model is retrained without each
// feature, clipped at 0 and min-max scaled over the non-missing cells.
DropColumnResult accuracy_importance(const DatasetSnapshot& snapshot, const EvaluationRun& run,
                                     ModelId model);

using ImportanceProgress = std::function<void(std::size_t done, std::size_t total)>;

ImportanceTable univariate_table(const DatasetSnapshot& snapshot,
                                 const std::vector<ModelId>& models);
// Both expensive methods require config.detailed_feature_search; they throw
// kUnavailable otherwise.
ImportanceTable permutation_table(const DatasetSnapshot& snapshot, const EvaluationRun& run,
                                  const std::vector<ModelId>& models,
                                  const MetricConfig& config,
                                  const PermutationOptions& options = {},
                                  const ImportanceProgress& progress = {});
ImportanceTable accuracy_table(const DatasetSnapshot& snapshot, const EvaluationRun& run,
                               const std::vector<ModelId>& models,
                               const MetricConfig& config,
                               const ImportanceProgress& progress = {});

// Cell-wise mean of the enabled tables. A cell missing in one table averages
// over the others.
ImportanceTable combined_importance(const std::vector<const ImportanceTable*>& tables,
                                    const std::set<ImportanceMethod>& enabled);

// Global mask AND per-model masks.
class FeatureMaskSet {
 public:
  FeatureMaskSet() = default;
  explicit FeatureMaskSet(std::size_t num_features);

  std::size_t num_features() const { return global_.size(); }
  const FeatureMask& global() const { return global_; }
  const std::map<ModelId, FeatureMask>& per_model() const { return per_model_; }

  void set_global(FeatureMask mask);
  void set_model(ModelId id, FeatureMask mask);
  void clear_model(ModelId id);

  FeatureMask effective(ModelId id) const;
  MaskMap effective_for(const std::vector<ModelId>& ids) const;
  std::uint64_t hash() const;

 private:
  void check(const FeatureMask& mask) const;

  FeatureMask global_;
  std::map<ModelId, FeatureMask> per_model_;
};

}  // namespace stackgen
