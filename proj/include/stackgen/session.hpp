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

// One user's workbench state and the action dispatcher shared by the HTTP
// service and scripted workflows. Every action takes and returns JSON.

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "stackgen/history.hpp"
#include "stackgen/importance.hpp"
#include "stackgen/projections.hpp"
#include "stackgen/stacker.hpp"
#include "stackgen/wrangler.hpp"

namespace stackgen {

inline constexpr const char* kWorkflowSchemaVersion = "stackgen.workflow/1";

struct SessionOptions {
  std::uint64_t seed = 42;
  int folds = 5;
  int threads = 0;
  std::string grid_config;  // path; empty = default grids
  MetaOptions meta;
  std::shared_ptr<EvalCache> cache;  // shared evaluation cache; null = private
};

using PhaseProgress =
    std::function<void(const std::string& phase, std::size_t done, std::size_t total)>;

class Session;

// Holds a session's single mutation slot until destroyed.
class MutationClaim {
 public:
  explicit MutationClaim(Session& session);
  ~MutationClaim();
  MutationClaim(const MutationClaim&) = delete;
  MutationClaim& operator=(const MutationClaim&) = delete;

  const Session* session() const { return session_; }

 private:
  Session* session_;
};

class Session {
 public:
  Session(DatasetSnapshot data, SessionOptions options);
  // Parses `csv_text` with `label_column` (empty = last column).
  static std::unique_ptr<Session> from_csv(const std::string& csv_text,
                                           const std::string& label_column,
                                           SessionOptions options);

  static bool is_action(const std::string& action);
  static bool is_mutating(const std::string& action);
  // Actions that may train models or run iterative embeddings.
  static bool is_long(const std::string& action);
  static std::vector<std::string> actions();

  // Runs one action. Mutating actions claim the session unless `claim` is
  // given; a concurrent mutation fails with kConflict.
  Json dispatch(const std::string& action, const Json& args, const PhaseProgress& progress = {},
                MutationClaim* claim = nullptr);

  // Every applied mutating action, replayable as a workflow document.
  Json workflow() const;

  const SessionOptions& options() const { return options_; }

  // Read-only access for tests and bindings. Callers must not race with
  // dispatch.
  const WrangleHistory& wrangle() const { return wrangle_; }
  const MetricConfig& config() const { return config_; }
  const std::vector<ModelSpec>& pool() const { return pool_; }
  const std::set<ModelId>& selection() const { return selected_; }
  const FeatureMaskSet& masks() const { return masks_; }
  const std::optional<ActiveStack>& active_stack() const { return active_; }
  const StackStore& stacks() const { return store_; }
  const History& history() const { return history_; }
  const EvaluationRun* run_for(SnapshotId id) const;

 private:
  friend class MutationClaim;
  using Handler = Json (Session::*)(const Json& args, const PhaseProgress& progress);
  struct ActionInfo {
    Handler handler;
    bool mutating;
    bool long_running;
  };
  static const std::map<std::string, ActionInfo>& table();

  EvalOptions eval_options(const PhaseProgress& progress, const std::string& phase);
  EvaluationRun& run_for_active();
  EvaluationRun& ensure_run(const SnapshotPtr& snapshot);
  void ensure_evaluated(const SnapshotPtr& snapshot, const std::vector<ModelId>& ids,
                        const MaskMap& masks, const PhaseProgress& progress);
  void require_confirmed() const;
  std::vector<ModelId> selected_vector() const;
  const ModelSpec& pool_spec(ModelId id) const;
  IndexSet select_instances(const DatasetSnapshot& snapshot, const Json& args) const;
  void invalidate_active();
  std::shared_ptr<StackPredictor> predictor_for(const std::string& stack_id,
                                                const PhaseProgress& progress);
  Json model_json(const EvaluationRun& run, const ModelRecord& rec) const;

  // Reads.
  Json a_summary(const Json&, const PhaseProgress&);
  Json a_config_get(const Json&, const PhaseProgress&);
  Json a_pool_algorithms(const Json&, const PhaseProgress&);
  Json a_pool_models(const Json&, const PhaseProgress&);
  Json a_pool_distributions(const Json&, const PhaseProgress&);
  Json a_pool_per_class(const Json&, const PhaseProgress&);
  Json a_pool_coverage(const Json&, const PhaseProgress&);
  Json a_wrangle_history(const Json&, const PhaseProgress&);
  Json a_importance_get(const Json&, const PhaseProgress&);
  Json a_masks_get(const Json&, const PhaseProgress&);
  Json a_projection_data(const Json&, const PhaseProgress&);
  Json a_projection_models(const Json&, const PhaseProgress&);
  Json a_projection_predictions(const Json&, const PhaseProgress&);
  Json a_projection_histograms(const Json&, const PhaseProgress&);
  Json a_stack_active(const Json&, const PhaseProgress&);
  Json a_stack_summaries(const Json&, const PhaseProgress&);
  Json a_stack_series(const Json&, const PhaseProgress&);
  Json a_stack_export(const Json&, const PhaseProgress&);
  Json a_stack_predict(const Json&, const PhaseProgress&);
  Json a_history_provenance(const Json&, const PhaseProgress&);
  Json a_session_workflow(const Json&, const PhaseProgress&);
  // Mutations.
  Json a_config_put(const Json&, const PhaseProgress&);
  Json a_confirm(const Json&, const PhaseProgress&);
  Json a_pool_select(const Json&, const PhaseProgress&);
  Json a_wrangle_remove(const Json&, const PhaseProgress&);
  Json a_wrangle_merge(const Json&, const PhaseProgress&);
  Json a_wrangle_compose(const Json&, const PhaseProgress&);
  Json a_wrangle_restore(const Json&, const PhaseProgress&);
  Json a_importance_compute(const Json&, const PhaseProgress&);
  Json a_importance_combine(const Json&, const PhaseProgress&);
  Json a_masks_put(const Json&, const PhaseProgress&);
  Json a_stack_build(const Json&, const PhaseProgress&);
  Json a_stack_store(const Json&, const PhaseProgress&);
  Json a_stack_activate(const Json&, const PhaseProgress&);

  SessionOptions options_;
  std::string dataset_csv_;  // original upload, kept for the journal
  std::string label_column_;
  std::mutex mutex_;
  std::atomic<bool> busy_{false};

  WrangleHistory wrangle_;
  MetricConfig config_;
  ModelZoo zoo_;
  std::vector<ModelSpec> pool_;
  bool confirmed_ = false;
  std::map<SnapshotId, EvaluationRun> runs_;
  std::set<ModelId> selected_;
  FeatureMaskSet masks_;
  std::map<ImportanceMethod, ImportanceTable> importance_;
  std::optional<ActiveStack> active_;
  StackStore store_;
  std::map<std::string, FeatureMaskSet> stack_masks_;
  std::map<std::string, std::shared_ptr<StackPredictor>> predictors_;
  History history_;
  Json journal_ = Json::array();
};

// Scripted replay of a session.
struct WorkflowRow {
  std::size_t step_index = 0;
  std::string label;
  std::string stored_id;  // empty when the step was not stored
  std::string parent_id;
  std::size_t model_count = 0;
  StackPerformance performance;
};

struct WorkflowResult {
  std::vector<WorkflowRow> rows;
  Json outputs = Json::array();  // per-step action results
  std::unique_ptr<Session> session;
};

struct WorkflowOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> folds;
  std::optional<std::string> grid_config;
  std::optional<std::string> label_column;
  int threads = 0;
  std::shared_ptr<EvalCache> cache;
};

// `base_dir` resolves a relative dataset path. `log` receives one line per
// step when set.
WorkflowResult run_workflow(const Json& workflow, const std::string& base_dir,
                            const WorkflowOverrides& overrides = {},
                            const std::function<void(const std::string&)>& log = {});

// Fixed-width table, one row per stack build.
std::string format_workflow_table(const std::vector<WorkflowRow>& rows);

}  // namespace stackgen
