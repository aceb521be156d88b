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

// Stacking: a regularized multinomial logistic metamodel over the base
// models' out-of-fold class probabilities.

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stackgen/eval_engine.hpp"

namespace stackgen {

inline constexpr const char* kExportSchemaVersion = "stackgen.stack/1";

// The metamodel's C is picked from `c_grid` by an inner stratified CV on
// each training set: best mean accuracy, ties to the smaller C. A single
// grid value fixes C.
struct MetaOptions {
  std::vector<double> c_grid = {0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0};
  int inner_folds = 5;
  int max_iter = 500;
  std::uint64_t seed = 0x5eed;
};

double select_meta_c(const Matrix& Z, std::span<const int> y, int num_classes,
                     const MetaOptions& options, std::uint64_t salt);

// N x (B * C): block k holds model k's out-of-fold probabilities.
Matrix meta_features(const EvaluationRun& run, const std::vector<ModelId>& models);

struct ActiveStack {
  std::vector<ModelId> model_ids;
  MaskMap masks;
  SnapshotId snapshot_id = 0;
  std::uint64_t snapshot_fingerprint = 0;
  MetricConfig config;
  StackPerformance performance;
  Labels meta_oof_pred;
  Matrix meta_oof_proba;
  // Fold of each meta-level prediction and the rows its metamodel saw.
  std::vector<int> meta_pred_fold;
  std::vector<std::vector<Eigen::Index>> meta_train_rows;
  std::vector<double> meta_c;  // per fold
  std::vector<std::string> warnings;
};

// Failed models are dropped with a warning; an empty surviving set throws.
// The metamodel is evaluated with the run's folds.
ActiveStack build_stack(const DatasetSnapshot& snapshot, const EvaluationRun& run,
                        const std::vector<ModelId>& model_ids, const MetricConfig& config,
                        const MetaOptions& options = {});

bool verify_meta_out_of_fold(const ActiveStack& stack);

struct StackRecord {
  std::string id;
  std::optional<std::string> parent;
  std::vector<ModelId> model_ids;
  std::vector<ModelSpec> specs;  // aligned with model_ids
  MaskMap masks;
  SnapshotId snapshot_id = 0;
  std::uint64_t snapshot_fingerprint = 0;
  MetricConfig config;
  std::uint64_t config_hash = 0;
  StackPerformance performance;
  std::string note;

  std::vector<Algorithm> algorithms_used() const;
  Json to_json() const;
};

// Session-scoped list of stored stacks with ids S1, S2, ...
class StackStore {
 public:
  const StackRecord& store(const ActiveStack& active, std::vector<ModelSpec> specs,
                           std::string note = {});
  const StackRecord& get(const std::string& id) const;
  void activate(const std::string& id);

  const std::vector<StackRecord>& records() const { return records_; }
  const std::optional<std::string>& active_id() const { return active_; }

 private:
  std::vector<StackRecord> records_;
  std::optional<std::string> active_;
};

// Fitted pipeline for new data: every base model refit on the full snapshot,
// then the metamodel on the full out-of-fold meta-features.
class StackPredictor {
 public:
  static StackPredictor fit(const DatasetSnapshot& snapshot, const EvaluationRun& run,
                            const StackRecord& record, const MetaOptions& options = {});
  // Validates `doc` and restores the fitted state. A fingerprint mismatch
  // with `expected_fingerprint` is reported as a warning.
  static StackPredictor from_json(const Json& doc, std::vector<std::string>* warnings = nullptr,
                                  std::optional<std::uint64_t> expected_fingerprint = {});

  Json to_json() const;

  Matrix predict_proba(const Matrix& X) const;
  Labels predict(const Matrix& X) const;

  const std::vector<std::string>& feature_names() const { return feature_names_; }
  const std::vector<std::string>& class_names() const { return class_names_; }
  std::uint64_t dataset_fingerprint() const { return fingerprint_; }
  std::size_t num_models() const { return models_.size(); }

 private:
  StackRecord record_;
  std::vector<std::string> feature_names_;
  std::vector<std::string> class_names_;
  std::uint64_t fingerprint_ = 0;
  std::int64_t num_instances_ = 0;
  std::vector<std::shared_ptr<BaseModel>> models_;
  Matrix meta_coef_;
  Vector meta_intercept_;
  double meta_inverse_reg_ = 1.0;
};

// Throws kSchemaInvalid naming the first offending JSON path.
void validate_export(const Json& doc);

// Fields absent from `j` keep their value in `base`. Unknown keys throw.
MetricConfig metric_config_from_json(const Json& j, const MetricConfig& base = {});
Json metric_config_to_json(const MetricConfig& c);
Json performance_to_json(const StackPerformance& p);

}  // namespace stackgen
