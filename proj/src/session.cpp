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

#include "stackgen/session.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <sstream>

namespace stackgen {

namespace {

Json bools_json(const std::vector<bool>& v) {
  Json out = Json::array();
  for (bool b : v) out.push_back(b);
  return out;
}

Json coords_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

Json box_json(const BoxStats& b) {
  return Json{{"min", b.min}, {"q1", b.q1}, {"median", b.median},
              {"q3", b.q3},   {"max", b.max}, {"count", b.count}};
}

Json triple_json(const ClassTriple& t) {
  return Json{{"precision", t.precision}, {"recall", t.recall}, {"f1", t.f1}};
}

Json table_json(const ImportanceTable& t) {
  Json values = Json::array();
  Json missing = Json::array();
  for (Eigen::Index f = 0; f < t.values.rows(); ++f) {
    Json row = Json::array();
    for (Eigen::Index m = 0; m < t.values.cols(); ++m) row.push_back(t.values(f, m));
    values.push_back(std::move(row));
    missing.push_back(bools_json(t.missing[static_cast<std::size_t>(f)]));
  }
  Json enabled = Json::array();
  for (auto m : t.enabled) enabled.push_back(importance_method_id(m));
  return Json{{"method", importance_method_id(t.method)},
              {"features", t.features},
              {"models", t.models},
              {"values", values},
              {"missing", missing},
              {"row_average", t.row_average},
              {"enabled", enabled}};
}

Json projection_json(const ProjectionResult& p) {
  Json out{{"space", space_id(p.space)},
           {"method", projection_method_id(p.method)},
           {"seed", p.seed},
           {"coords", coords_json(p.coords)},
           {"point_scalar", p.point_scalar},
           {"scalar_semantic", p.scalar_semantic},
           {"notices", p.notices}};
  out["point_class"] = p.point_class ? Json(*p.point_class) : Json(nullptr);
  if (!p.model_ids.empty()) out["model_ids"] = p.model_ids;
  return out;
}

Json snapshot_summary(const DatasetSnapshot& s) {
  Json classes = Json::object();
  const auto counts = s.class_counts();
  for (std::size_t c = 0; c < s.class_names.size(); ++c) classes[s.class_names[c]] = counts[c];
  return Json{{"snapshot_id", s.id},
              {"parent", s.parent ? Json(*s.parent) : Json(nullptr)},
              {"provenance", s.provenance},
              {"fingerprint", to_hex(s.fingerprint())},
              {"instances", s.num_instances()},
              {"features", s.num_features()},
              {"feature_names", s.feature_names},
              {"classes", classes}};
}

std::uint64_t arg_seed(const Json& args, std::uint64_t fallback) {
  return args.contains("seed") ? args.at("seed").get<std::uint64_t>() : fallback;
}

ProjectionMethod arg_method(const Json& args) {
  return parse_projection_method(args.value("method", std::string("mds")));
}

// Array of one flag per feature, or {"disable": [names]} / {"enable":
// [names]} applied to an all-enabled mask.
FeatureMask parse_mask(const Json& j, const DatasetSnapshot& s) {
  const std::size_t d = static_cast<std::size_t>(s.num_features());
  if (j.is_array()) {
    require(j.size() == d, "mask needs one flag per feature");
    FeatureMask m;
    for (const auto& b : j) {
      require(b.is_boolean(), "mask entries must be booleans");
      m.push_back(b.get<bool>());
    }
    return m;
  }
  require(j.is_object(), "mask must be an array or an object");
  FeatureMask m(d, true);
  if (j.contains("enable")) {
    m.assign(d, false);
    for (const auto& n : j.at("enable")) {
      m[static_cast<std::size_t>(s.feature_index(n.get<std::string>()))] = true;
    }
  }
  if (j.contains("disable")) {
    for (const auto& n : j.at("disable")) {
      m[static_cast<std::size_t>(s.feature_index(n.get<std::string>()))] = false;
    }
  }
  return m;
}

bool compare(double a, const std::string& op, double b) {
  if (op == "eq") return a == b;
  if (op == "ne") return a != b;
  if (op == "lt") return a < b;
  if (op == "le") return a <= b;
  if (op == "gt") return a > b;
  if (op == "ge") return a >= b;
  fail(ErrorCode::kInvalidArgument, "unknown comparison '" + op + "'");
}

}  // namespace

MutationClaim::MutationClaim(Session& session) : session_(&session) {
  bool expected = false;
  if (!session.busy_.compare_exchange_strong(expected, true)) {
    fail(ErrorCode::kConflict, "another mutation of this session is in progress");
  }
}

MutationClaim::~MutationClaim() { session_->busy_ = false; }

Session::Session(DatasetSnapshot data, SessionOptions options)
    : options_(std::move(options)),
      wrangle_(std::move(data)),
      zoo_(options_.grid_config.empty() ? ModelZoo::defaults()
                                        : ModelZoo::from_config_file(options_.grid_config)) {
  require(options_.folds >= 2, "need at least two folds");
  if (!options_.cache) options_.cache = std::make_shared<EvalCache>();
  pool_ = zoo_.enumerate_pool({}, options_.seed);
  masks_ = FeatureMaskSet(static_cast<std::size_t>(wrangle_.active()->num_features()));
}

std::unique_ptr<Session> Session::from_csv(const std::string& csv_text,
                                           const std::string& label_column,
                                           SessionOptions options) {
  DatasetSnapshot data = parse_csv(csv_text, CsvOptions{label_column});
  data.provenance = "upload";
  auto s = std::make_unique<Session>(std::move(data), std::move(options));
  s->dataset_csv_ = csv_text;
  s->label_column_ = label_column;
  return s;
}

const std::map<std::string, Session::ActionInfo>& Session::table() {
  static const std::map<std::string, ActionInfo> kTable = {
      {"summary", {&Session::a_summary, false, false}},
      {"config.get", {&Session::a_config_get, false, false}},
      {"config.put", {&Session::a_config_put, true, false}},
      {"confirm", {&Session::a_confirm, true, true}},
      {"pool.algorithms", {&Session::a_pool_algorithms, false, false}},
      {"pool.models", {&Session::a_pool_models, false, false}},
      {"pool.distributions", {&Session::a_pool_distributions, false, false}},
      {"pool.per_class", {&Session::a_pool_per_class, false, false}},
      {"pool.coverage", {&Session::a_pool_coverage, false, false}},
      {"pool.select", {&Session::a_pool_select, true, true}},
      {"wrangle.history", {&Session::a_wrangle_history, false, false}},
      {"wrangle.remove", {&Session::a_wrangle_remove, true, false}},
      {"wrangle.merge", {&Session::a_wrangle_merge, true, false}},
      {"wrangle.compose", {&Session::a_wrangle_compose, true, false}},
      {"wrangle.restore", {&Session::a_wrangle_restore, true, false}},
      {"importance.compute", {&Session::a_importance_compute, true, true}},
      {"importance.combine", {&Session::a_importance_combine, true, false}},
      {"importance.get", {&Session::a_importance_get, false, false}},
      {"masks.get", {&Session::a_masks_get, false, false}},
      {"masks.put", {&Session::a_masks_put, true, false}},
      {"projection.data", {&Session::a_projection_data, false, true}},
      {"projection.models", {&Session::a_projection_models, false, true}},
      {"projection.predictions", {&Session::a_projection_predictions, false, true}},
      {"projection.histograms", {&Session::a_projection_histograms, false, true}},
      {"stack.build", {&Session::a_stack_build, true, true}},
      {"stack.store", {&Session::a_stack_store, true, false}},
      {"stack.activate", {&Session::a_stack_activate, true, false}},
      {"stack.active", {&Session::a_stack_active, false, false}},
      {"stack.summaries", {&Session::a_stack_summaries, false, false}},
      {"stack.series", {&Session::a_stack_series, false, false}},
      {"stack.export", {&Session::a_stack_export, false, true}},
      {"stack.predict", {&Session::a_stack_predict, false, true}},
      {"history.provenance", {&Session::a_history_provenance, false, false}},
      {"session.workflow", {&Session::a_session_workflow, false, false}},
  };
  return kTable;
}

bool Session::is_action(const std::string& action) { return table().count(action) > 0; }

bool Session::is_mutating(const std::string& action) {
  auto it = table().find(action);
  return it != table().end() && it->second.mutating;
}

bool Session::is_long(const std::string& action) {
  auto it = table().find(action);
  return it != table().end() && it->second.long_running;
}

std::vector<std::string> Session::actions() {
  std::vector<std::string> out;
  for (const auto& [name, _] : table()) out.push_back(name);
  return out;
}

Json Session::dispatch(const std::string& action, const Json& args, const PhaseProgress& progress,
                       MutationClaim* claim) {
  auto it = table().find(action);
  require(it != table().end(), "unknown action '" + action + "'", ErrorCode::kNotFound);
  const Json& a = args.is_null() ? Json::object() : args;
  require(a.is_object(), "action arguments must be an object");
  std::optional<MutationClaim> own;
  if (it->second.mutating) {
    if (claim) {
      require(claim->session() == this, "claim belongs to another session");
    } else {
      own.emplace(*this);
    }
  }
  std::lock_guard lock(mutex_);
  Json result = (this->*(it->second.handler))(a, progress);
  if (it->second.mutating) journal_.push_back(Json{{"action", action}, {"args", a}});
  return result;
}

Json Session::workflow() const {
  Json dataset{{"label_column", label_column_}};
  if (!dataset_csv_.empty()) dataset["csv"] = dataset_csv_;
  return Json{{"schema_version", kWorkflowSchemaVersion},
              {"dataset", dataset},
              {"options",
               {{"seed", options_.seed},
                {"folds", options_.folds},
                {"grid_config", options_.grid_config.empty() ? Json(nullptr)
                                                             : Json(options_.grid_config)}}},
              {"steps", journal_}};
}

const EvaluationRun* Session::run_for(SnapshotId id) const {
  auto it = runs_.find(id);
  return it == runs_.end() ? nullptr : &it->second;
}

EvalOptions Session::eval_options(const PhaseProgress& progress, const std::string& phase) {
  EvalOptions o;
  o.num_folds = options_.folds;
  o.seed = options_.seed;
  o.threads = options_.threads;
  o.cache = options_.cache.get();
  if (progress) {
    o.progress = [progress, phase](std::size_t done, std::size_t total) {
      progress(phase, done, total);
    };
  }
  return o;
}

EvaluationRun& Session::ensure_run(const SnapshotPtr& snapshot) {
  auto it = runs_.find(snapshot->id);
  if (it == runs_.end()) {
    it = runs_.emplace(snapshot->id,
                       evaluate_pool(*snapshot, {}, config_, {}, eval_options({}, "")))
             .first;
  }
  return it->second;
}

EvaluationRun& Session::run_for_active() { return ensure_run(wrangle_.active()); }

void Session::ensure_evaluated(const SnapshotPtr& snapshot, const std::vector<ModelId>& ids,
                               const MaskMap& masks, const PhaseProgress& progress) {
  EvaluationRun& run = ensure_run(snapshot);
  std::vector<ModelSpec> todo;
  const Eigen::Index d = snapshot->num_features();
  for (ModelId id : ids) {
    const FeatureMask want = mask_for(masks, id, d);
    if (!run.contains(id) || run.record(id).feature_mask != want) todo.push_back(pool_spec(id));
  }
  if (!todo.empty()) extend_run(run, *snapshot, todo, masks, eval_options(progress, "evaluate"));
}

void Session::require_confirmed() const {
  require(confirmed_, "confirm the metric configuration first", ErrorCode::kConflict);
}

std::vector<ModelId> Session::selected_vector() const {
  return {selected_.begin(), selected_.end()};
}

const ModelSpec& Session::pool_spec(ModelId id) const {
  require(id >= 0 && id < static_cast<ModelId>(pool_.size()),
          "unknown model " + std::to_string(id), ErrorCode::kNotFound);
  return pool_[static_cast<std::size_t>(id)];
}

IndexSet Session::select_instances(const DatasetSnapshot& s, const Json& args) const {
  IndexSet out;
  const Eigen::Index n = s.num_instances();
  if (args.contains("indices")) {
    for (const auto& v : args.at("indices")) {
      const auto i = v.get<Eigen::Index>();
      require(i >= 0 && i < n, "instance index " + std::to_string(i) + " out of range");
      out.insert(i);
    }
  } else if (args.contains("where") || args.contains("class")) {
    std::vector<std::tuple<int, std::string, double>> conds;
    for (const auto& c : args.value("where", Json::array())) {
      conds.emplace_back(s.feature_index(c.at("feature").get<std::string>()),
                         c.value("op", std::string("eq")), c.at("value").get<double>());
    }
    int cls = -1;
    if (args.contains("class")) {
      const auto name = args.at("class").get<std::string>();
      auto it = std::find(s.class_names.begin(), s.class_names.end(), name);
      require(it != s.class_names.end(), "unknown class " + name, ErrorCode::kNotFound);
      cls = static_cast<int>(it - s.class_names.begin());
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (cls >= 0 && s.y[static_cast<std::size_t>(i)] != cls) continue;
      bool keep = true;
      for (const auto& [f, op, v] : conds) keep = keep && compare(s.X(i, f), op, v);
      if (keep) out.insert(i);
    }
  } else {
    fail(ErrorCode::kInvalidArgument, "select instances with 'indices' or 'where'");
  }
  require(!out.empty(), "no instances selected");
  return out;
}

void Session::invalidate_active() { active_.reset(); }

Json Session::model_json(const EvaluationRun& run, const ModelRecord& rec) const {
  Json metrics = Json::object();
  for (Metric m : kAllMetrics) {
    metrics[std::string(metric_id(m))] =
        Json{{"raw", rec.metrics.raw_of(m)}, {"normalized", rec.metrics.normalized_of(m)}};
  }
  Json out = rec.spec.to_json();
  out["failed"] = rec.failed;
  if (rec.failed) out["failure"] = rec.failure;
  out["combined"] = rec.combined;
  out["metrics"] = metrics;
  out["feature_mask"] = bools_json(rec.feature_mask);
  out["selected"] = selected_.count(rec.spec.id) > 0;
  out["snapshot_id"] = run.snapshot_id;
  return out;
}

// ---- reads ----

Json Session::a_summary(const Json&, const PhaseProgress&) {
  Json out = snapshot_summary(*wrangle_.active());
  out["pool_size"] = pool_.size();
  out["confirmed"] = confirmed_;
  out["selected"] = selected_.size();
  out["seed"] = options_.seed;
  out["folds"] = options_.folds;
  return out;
}

Json Session::a_config_get(const Json&, const PhaseProgress&) {
  Json out = metric_config_to_json(config_);
  out["hash"] = to_hex(config_.hash());
  return out;
}

Json Session::a_pool_algorithms(const Json&, const PhaseProgress&) {
  return Json{{"algorithms", zoo_.to_json()}, {"pool_size", pool_.size()}};
}

Json Session::a_pool_models(const Json& args, const PhaseProgress&) {
  require_confirmed();
  const EvaluationRun& run = run_for_active();
  std::optional<Algorithm> only;
  if (args.contains("algorithm")) only = parse_algorithm(args.at("algorithm").get<std::string>());
  Json models = Json::array();
  for (const auto& [id, rec] : run.records) {
    if (only && rec.spec.algorithm != *only) continue;
    if (args.value("selected_only", false) && !selected_.count(id)) continue;
    models.push_back(model_json(run, rec));
  }
  return Json{{"snapshot_id", run.snapshot_id}, {"models", models}};
}

Json Session::a_pool_distributions(const Json&, const PhaseProgress&) {
  require_confirmed();
  std::vector<std::string> notices;
  Json dist = Json::array();
  for (const auto& d : algorithm_score_distribution(run_for_active(), &notices)) {
    dist.push_back(Json{{"algo_id", algorithm_id(d.algorithm)},
                        {"color", zoo_.spec(d.algorithm).color},
                        {"box", box_json(d.stats)}});
  }
  return Json{{"distributions", dist}, {"notices", notices}};
}

Json Session::a_pool_per_class(const Json&, const PhaseProgress&) {
  require_confirmed();
  Json algos = Json::array();
  for (const auto& a : per_class_summary(run_for_active(), selected_)) {
    Json classes = Json::array();
    for (const auto& c : a.classes) {
      classes.push_back(Json{{"baseline", triple_json(c.baseline)},
                             {"selected", c.selected ? triple_json(*c.selected) : Json(nullptr)}});
    }
    algos.push_back(Json{{"algo_id", algorithm_id(a.algorithm)}, {"classes", classes}});
  }
  return Json{{"class_names", wrangle_.active()->class_names}, {"algorithms", algos}};
}

Json Session::a_pool_coverage(const Json&, const PhaseProgress&) {
  Json out = Json::array();
  for (const auto& c : algorithm_coverage(selected_, pool_)) {
    out.push_back(Json{{"algo_id", algorithm_id(c.algorithm)},
                       {"color", zoo_.spec(c.algorithm).color},
                       {"selected", c.selected_count},
                       {"total", c.total_count},
                       {"fraction", c.fraction}});
  }
  return Json{{"coverage", out}, {"selected", selected_.size()}};
}

Json Session::a_wrangle_history(const Json&, const PhaseProgress&) {
  Json snaps = Json::array();
  for (const auto& s : wrangle_.snapshots()) {
    Json j = snapshot_summary(*s);
    j.erase("feature_names");
    j["active"] = s->id == wrangle_.active()->id;
    snaps.push_back(std::move(j));
  }
  return Json{{"active", wrangle_.active()->id}, {"snapshots", snaps}};
}

Json Session::a_importance_get(const Json& args, const PhaseProgress&) {
  const auto method = parse_importance_method(args.value("method", std::string("combined")));
  auto it = importance_.find(method);
  require(it != importance_.end(),
          std::string(importance_method_id(method)) + " importance has not been computed",
          ErrorCode::kNotFound);
  return table_json(it->second);
}

Json Session::a_masks_get(const Json&, const PhaseProgress&) {
  Json per_model = Json::object();
  for (const auto& [id, m] : masks_.per_model()) per_model[std::to_string(id)] = bools_json(m);
  return Json{{"feature_names", wrangle_.active()->feature_names},
              {"global", bools_json(masks_.global())},
              {"models", per_model},
              {"hash", to_hex(masks_.hash())}};
}

Json Session::a_projection_data(const Json& args, const PhaseProgress&) {
  const SnapshotPtr snap = wrangle_.active();
  std::vector<double> difficulty(static_cast<std::size_t>(snap->num_instances()), 0.0);
  if (active_ && active_->snapshot_fingerprint == snap->fingerprint()) {
    difficulty = instance_difficulty(*snap, run_for_active(), active_->model_ids);
  }
  return projection_json(
      project_data_space(*snap, arg_method(args), difficulty, arg_seed(args, options_.seed)));
}

Json Session::a_projection_models(const Json& args, const PhaseProgress& progress) {
  require_confirmed();
  std::vector<ModelId> ids;
  if (args.value("scope", std::string("selection")) == "selection" && !selected_.empty()) {
    ids = selected_vector();
    ensure_evaluated(wrangle_.active(), ids, masks_.effective_for(ids), progress);
  } else {
    ids = run_for_active().ok_ids();
  }
  std::optional<Metric> color;
  if (args.contains("color_metric") && !args.at("color_metric").is_null()) {
    color = parse_metric(args.at("color_metric").get<std::string>());
  }
  const auto res = project_model_space(run_for_active(), ids, color, config_, arg_method(args),
                                       arg_seed(args, options_.seed));
  Json out = projection_json(res.projection);
  Json boxes = Json::object();
  for (Metric m : kAllMetrics) boxes[std::string(metric_id(m))] = box_json(at(res.metric_boxes, m));
  out["metric_boxes"] = boxes;
  return out;
}

Json Session::a_projection_predictions(const Json& args, const PhaseProgress& progress) {
  require_confirmed();
  require(!selected_.empty(), "no models selected", ErrorCode::kConflict);
  const auto ids = selected_vector();
  ensure_evaluated(wrangle_.active(), ids, masks_.effective_for(ids), progress);
  return projection_json(project_prediction_space(*wrangle_.active(), run_for_active(), ids,
                                                  arg_method(args),
                                                  arg_seed(args, options_.seed)));
}

Json Session::a_projection_histograms(const Json& args, const PhaseProgress& progress) {
  require_confirmed();
  require(!selected_.empty(), "no models selected", ErrorCode::kConflict);
  const auto ids = selected_vector();
  const SnapshotPtr snap = wrangle_.active();
  ensure_evaluated(snap, ids, masks_.effective_for(ids), progress);
  const auto h = model_score_histograms(*snap, run_for_active(), ids,
                                        select_instances(*snap, args), config_);
  return Json{{"bins", kHistogramBins},
              {"selected", h.selected},
              {"all", h.all},
              {"selected_scores", h.selected_scores},
              {"all_scores", h.all_scores},
              {"model_ids", ids}};
}

Json Session::a_stack_active(const Json&, const PhaseProgress&) {
  if (!active_) return Json{{"active", nullptr}};
  return Json{{"active",
               {{"model_ids", active_->model_ids},
                {"model_count", active_->model_ids.size()},
                {"snapshot_id", active_->snapshot_id},
                {"performance", performance_to_json(active_->performance)},
                {"warnings", active_->warnings},
                {"meta_out_of_fold", verify_meta_out_of_fold(*active_)}}},
              {"stored_active", store_.active_id() ? Json(*store_.active_id()) : Json(nullptr)}};
}

Json Session::a_stack_summaries(const Json&, const PhaseProgress&) {
  return Json{{"stacks", stack_summaries_to_json(stack_summaries(store_))},
              {"active", store_.active_id() ? Json(*store_.active_id()) : Json(nullptr)}};
}

Json Session::a_stack_series(const Json&, const PhaseProgress&) {
  return Json{{"series", comparison_series_to_json(history_.comparison_series())}};
}

std::shared_ptr<StackPredictor> Session::predictor_for(const std::string& stack_id,
                                                       const PhaseProgress& progress) {
  auto it = predictors_.find(stack_id);
  if (it != predictors_.end()) return it->second;
  const StackRecord& rec = store_.get(stack_id);
  const SnapshotPtr snap = wrangle_.get(rec.snapshot_id);
  ensure_evaluated(snap, rec.model_ids, rec.masks, progress);
  if (progress) progress("fit", 0, 1);
  auto p = std::make_shared<StackPredictor>(
      StackPredictor::fit(*snap, runs_.at(snap->id), rec, options_.meta));
  if (progress) progress("fit", 1, 1);
  predictors_[stack_id] = p;
  return p;
}

Json Session::a_stack_export(const Json& args, const PhaseProgress& progress) {
  std::string id;
  if (args.contains("stack_id")) {
    id = args.at("stack_id").get<std::string>();
  } else {
    require(store_.active_id().has_value(), "no stored stack to export", ErrorCode::kNotFound);
    id = *store_.active_id();
  }
  return predictor_for(id, progress)->to_json();
}

Json Session::a_stack_predict(const Json& args, const PhaseProgress& progress) {
  std::shared_ptr<StackPredictor> p;
  std::vector<std::string> warnings;
  if (args.contains("document")) {
    p = std::make_shared<StackPredictor>(StackPredictor::from_json(
        args.at("document"), &warnings, wrangle_.active()->fingerprint()));
  } else {
    require(args.contains("stack_id"), "give 'stack_id' or 'document'");
    p = predictor_for(args.at("stack_id").get<std::string>(), progress);
  }
  require(args.contains("csv"), "'csv' with the instances to predict is required");
  const Matrix X = parse_feature_csv(args.at("csv").get<std::string>(), p->feature_names());
  const Matrix proba = p->predict_proba(X);
  const Labels labels = argmax_rows(proba);
  Json names = Json::array();
  for (int l : labels) names.push_back(p->class_names()[static_cast<std::size_t>(l)]);
  return Json{{"class_names", p->class_names()},
              {"labels", names},
              {"label_index", labels},
              {"proba", coords_json(proba)},
              {"warnings", warnings}};
}

Json Session::a_history_provenance(const Json&, const PhaseProgress&) {
  Json snaps = Json::array();
  for (const auto& s : wrangle_.snapshots()) {
    Json j = snapshot_summary(*s);
    j.erase("feature_names");
    snaps.push_back(std::move(j));
  }
  Json stacks = Json::array();
  for (const auto& r : store_.records()) stacks.push_back(r.to_json());
  return Json{{"schema_version", "stackgen.provenance/1"},
              {"seed", options_.seed},
              {"folds", options_.folds},
              {"snapshots", snaps},
              {"stacks", stacks},
              {"history", history_.to_json()},
              {"history_valid", history_.verify_chain()},
              {"workflow", workflow()}};
}

Json Session::a_session_workflow(const Json&, const PhaseProgress&) { return workflow(); }

// ---- mutations ----

Json Session::a_config_put(const Json& args, const PhaseProgress&) {
  MetricConfig next = metric_config_from_json(args, config_);
  next.validate_api();
  config_ = next;
  for (auto& [sid, run] : runs_) run = rescore(run, *wrangle_.get(sid), config_);
  invalidate_active();
  return a_config_get({}, {});
}

Json Session::a_confirm(const Json&, const PhaseProgress& progress) {
  config_.validate_api();
  std::vector<ModelId> ids(pool_.size());
  std::iota(ids.begin(), ids.end(), ModelId{0});
  const std::size_t hits_before = options_.cache->hits();
  ensure_evaluated(wrangle_.active(), ids, masks_.effective_for(ids), progress);
  confirmed_ = true;
  const EvaluationRun& run = run_for_active();
  std::size_t failed = 0;
  for (const auto& [id, rec] : run.records) failed += rec.failed ? 1 : 0;
  return Json{{"evaluated", run.records.size()},
              {"failed", failed},
              {"cache_hits", options_.cache->hits() - hits_before},
              {"out_of_fold_ok", verify_out_of_fold(run)}};
}

Json Session::a_pool_select(const Json& args, const PhaseProgress& progress) {
  require_confirmed();
  const std::string mode = args.value("mode", std::string("replace"));
  require(mode == "replace" || mode == "add" || mode == "remove",
          "mode must be replace, add or remove");

  std::vector<ModelId> cand;
  if (args.contains("ids")) {
    for (const auto& v : args.at("ids")) cand.push_back(pool_spec(v.get<ModelId>()).id);
  } else {
    std::set<Algorithm> algos;
    for (const auto& a : args.value("algorithms", Json::array())) {
      algos.insert(parse_algorithm(a.get<std::string>()));
    }
    const PoolFilter filter = parse_pool_filter(args.value("filter", Json::object()));
    for (const auto& s : zoo_.enumerate_pool(filter, options_.seed)) {
      if (!algos.empty() && !algos.count(s.algorithm)) continue;
      if (args.value("within_selection", false) && !selected_.count(s.id)) continue;
      cand.push_back(s.id);
    }
  }

  const bool ranked = args.contains("top_k") || args.contains("min_score") ||
                      args.contains("drop_worst");
  if (ranked) {
    const SnapshotPtr snap = wrangle_.active();
    ensure_evaluated(snap, cand, masks_.effective_for(cand), progress);
    const EvaluationRun& run = run_for_active();
    std::vector<Metric> rank_metrics;
    if (args.contains("rank_by")) {
      const Json& r = args.at("rank_by");
      if (r.is_string()) {
        if (r.get<std::string>() != "combined") rank_metrics.push_back(parse_metric(r.get<std::string>()));
      } else {
        for (const auto& m : r) rank_metrics.push_back(parse_metric(m.get<std::string>()));
      }
    }
    auto score = [&](ModelId id) {
      const ModelRecord& rec = run.record(id);
      if (rec.failed) return -1.0;
      if (rank_metrics.empty()) return rec.combined;
      double s = 0.0;
      for (Metric m : rank_metrics) s += rec.metrics.normalized_of(m);
      return s / static_cast<double>(rank_metrics.size());
    };
    std::stable_sort(cand.begin(), cand.end(), [&](ModelId a, ModelId b) {
      const double sa = score(a), sb = score(b);
      return sa != sb ? sa > sb : a < b;
    });
    if (args.contains("min_score")) {
      const double t = args.at("min_score").get<double>();
      cand.erase(std::remove_if(cand.begin(), cand.end(), [&](ModelId id) { return score(id) < t; }),
                 cand.end());
    }
    if (args.contains("drop_worst")) {
      const auto n = std::min(cand.size(), args.at("drop_worst").get<std::size_t>());
      cand.resize(cand.size() - n);
    }
    if (args.contains("top_k")) {
      const auto k = args.at("top_k").get<std::size_t>();
      if (args.value("per_algorithm", false)) {
        std::map<Algorithm, std::size_t> taken;
        std::vector<ModelId> kept;
        for (ModelId id : cand) {
          if (taken[pool_spec(id).algorithm]++ < k) kept.push_back(id);
        }
        cand = std::move(kept);
      } else if (cand.size() > k) {
        cand.resize(k);
      }
    }
  }

  if (mode == "replace") selected_.clear();
  for (ModelId id : cand) {
    if (mode == "remove") {
      selected_.erase(id);
    } else {
      selected_.insert(id);
    }
  }
  invalidate_active();
  return Json{{"selected", selected_vector()},
              {"count", selected_.size()},
              {"coverage", a_pool_coverage({}, {}).at("coverage")}};
}

Json Session::a_wrangle_remove(const Json& args, const PhaseProgress&) {
  const SnapshotPtr snap = wrangle_.active();
  const IndexSet idx = select_instances(*snap, args);
  const SnapshotPtr next = wrangle_.apply(remove_instances(*snap, idx, options_.folds));
  invalidate_active();
  Json out = snapshot_summary(*next);
  out["removed"] = std::vector<Eigen::Index>(idx.begin(), idx.end());
  return out;
}

Json Session::a_wrangle_merge(const Json& args, const PhaseProgress&) {
  const SnapshotPtr snap = wrangle_.active();
  const auto mode = parse_merge_mode(args.value("mode", std::string("mean")));
  const SnapshotPtr next = wrangle_.apply(merge_instances(*snap, select_instances(*snap, args), mode));
  invalidate_active();
  return snapshot_summary(*next);
}

Json Session::a_wrangle_compose(const Json& args, const PhaseProgress&) {
  const SnapshotPtr snap = wrangle_.active();
  const auto mode = parse_merge_mode(args.value("mode", std::string("mean")));
  const SnapshotPtr next =
      wrangle_.apply(compose_instance(*snap, select_instances(*snap, args), mode));
  invalidate_active();
  return snapshot_summary(*next);
}

Json Session::a_wrangle_restore(const Json& args, const PhaseProgress&) {
  wrangle_.restore(args.at("snapshot_id").get<SnapshotId>());
  invalidate_active();
  return snapshot_summary(*wrangle_.active());
}

Json Session::a_importance_compute(const Json& args, const PhaseProgress& progress) {
  require_confirmed();
  const auto method = parse_importance_method(args.value("method", std::string("univariate")));
  require(method != ImportanceMethod::kCombined, "use importance.combine for the combination");
  std::vector<ModelId> ids;
  if (args.contains("models")) {
    for (const auto& v : args.at("models")) ids.push_back(pool_spec(v.get<ModelId>()).id);
  } else {
    ids = selected_vector();
  }
  require(!ids.empty(), "no models to compute importance for", ErrorCode::kConflict);
  const SnapshotPtr snap = wrangle_.active();
  ensure_evaluated(snap, ids, masks_.effective_for(ids), progress);
  const EvaluationRun& run = run_for_active();
  const std::string phase(importance_method_id(method));
  ImportanceProgress ip;
  if (progress) ip = [&](std::size_t d, std::size_t t) { progress(phase, d, t); };
  ImportanceTable t;
  switch (method) {
    case ImportanceMethod::kUnivariate:
      t = univariate_table(*snap, ids);
      break;
    case ImportanceMethod::kPermutation: {
      PermutationOptions po;
      po.repeats = args.value("repeats", po.repeats);
      po.seed = arg_seed(args, po.seed);
      t = permutation_table(*snap, run, ids, config_, po, ip);
      break;
    }
    default:
      t = accuracy_table(*snap, run, ids, config_, ip);
      break;
  }
  importance_[method] = t;
  return table_json(t);
}

Json Session::a_importance_combine(const Json& args, const PhaseProgress&) {
  std::set<ImportanceMethod> enabled;
  for (const auto& m : args.value("enabled", Json::array())) {
    enabled.insert(parse_importance_method(m.get<std::string>()));
  }
  if (enabled.empty()) {
    for (const auto& [m, _] : importance_) {
      if (m != ImportanceMethod::kCombined) enabled.insert(m);
    }
  }
  std::vector<const ImportanceTable*> tables;
  for (auto m : enabled) {
    auto it = importance_.find(m);
    require(it != importance_.end(),
            std::string(importance_method_id(m)) + " importance has not been computed",
            ErrorCode::kNotFound);
    tables.push_back(&it->second);
  }
  ImportanceTable c = combined_importance(tables, enabled);
  importance_[ImportanceMethod::kCombined] = c;
  return table_json(c);
}

Json Session::a_masks_put(const Json& args, const PhaseProgress&) {
  const SnapshotPtr snap = wrangle_.active();
  FeatureMaskSet next = masks_;
  if (args.contains("global")) next.set_global(parse_mask(args.at("global"), *snap));
  if (args.contains("models")) {
    for (const auto& [key, m] : args.at("models").items()) {
      const ModelId id = pool_spec(std::stoll(key)).id;
      if (m.is_null()) {
        next.clear_model(id);
      } else {
        next.set_model(id, parse_mask(m, *snap));
      }
    }
  }
  masks_ = std::move(next);
  invalidate_active();
  return a_masks_get({}, {});
}

Json Session::a_stack_build(const Json& args, const PhaseProgress& progress) {
  require_confirmed();
  require(!selected_.empty(), "no models selected", ErrorCode::kConflict);
  const SnapshotPtr snap = wrangle_.active();
  const auto ids = selected_vector();
  ensure_evaluated(snap, ids, masks_.effective_for(ids), progress);
  if (progress) progress("stack", 0, 1);
  active_ = build_stack(*snap, run_for_active(), ids, config_, options_.meta);
  if (progress) progress("stack", 1, 1);
  const std::string label =
      args.value("label", "Step " + std::to_string(history_.num_steps() + 1));
  const std::size_t step =
      history_.record_step(label, active_->performance, active_->model_ids.size());
  Json out = a_stack_active({}, {});
  out["step_index"] = step;
  out["label"] = label;
  return out;
}

Json Session::a_stack_store(const Json& args, const PhaseProgress&) {
  require(active_.has_value(), "build the active stack before storing it", ErrorCode::kConflict);
  std::vector<ModelSpec> specs;
  for (ModelId id : active_->model_ids) specs.push_back(pool_spec(id));
  const StackRecord& rec = store_.store(*active_, std::move(specs), args.value("note", std::string()));
  stack_masks_[rec.id] = masks_;
  history_.record_store(rec);
  return rec.to_json();
}

Json Session::a_stack_activate(const Json& args, const PhaseProgress&) {
  const std::string id = args.at("stack_id").get<std::string>();
  const StackRecord& rec = store_.get(id);
  store_.activate(id);
  wrangle_.restore(rec.snapshot_id);
  selected_ = std::set<ModelId>(rec.model_ids.begin(), rec.model_ids.end());
  masks_ = stack_masks_.at(id);
  if (config_.hash() != rec.config.hash()) {
    config_ = rec.config;
    for (auto& [sid, run] : runs_) run = rescore(run, *wrangle_.get(sid), config_);
  }
  invalidate_active();
  return Json{{"stack_id", id},
              {"snapshot_id", rec.snapshot_id},
              {"model_count", rec.model_ids.size()},
              {"performance", performance_to_json(rec.performance)}};
}

// ---- workflows ----

WorkflowResult run_workflow(const Json& workflow, const std::string& base_dir,
                            const WorkflowOverrides& overrides,
                            const std::function<void(const std::string&)>& log) {
  require(workflow.is_object(), "workflow must be an object", ErrorCode::kSchemaInvalid);
  require(workflow.value("schema_version", std::string()) == kWorkflowSchemaVersion,
          "/schema_version: unsupported workflow version", ErrorCode::kSchemaInvalid);
  require(workflow.contains("dataset") && workflow.at("dataset").is_object(),
          "/dataset: missing", ErrorCode::kSchemaInvalid);
  require(workflow.contains("steps") && workflow.at("steps").is_array(), "/steps: missing",
          ErrorCode::kSchemaInvalid);

  namespace fs = std::filesystem;
  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return (path.is_relative() && !base_dir.empty() ? fs::path(base_dir) / path : path).string();
  };

  const Json& ds = workflow.at("dataset");
  std::string csv;
  if (ds.contains("csv")) {
    csv = ds.at("csv").get<std::string>();
  } else {
    require(ds.contains("path"), "/dataset: give 'path' or 'csv'", ErrorCode::kSchemaInvalid);
    csv = read_file(resolve(ds.at("path").get<std::string>()));
  }
  const std::string label =
      overrides.label_column.value_or(ds.value("label_column", std::string()));

  const Json opts = workflow.value("options", Json::object());
  SessionOptions so;
  so.seed = overrides.seed.value_or(opts.value("seed", std::uint64_t{42}));
  so.folds = overrides.folds.value_or(opts.value("folds", 5));
  if (overrides.grid_config) {
    so.grid_config = *overrides.grid_config;
  } else if (opts.contains("grid_config") && opts.at("grid_config").is_string()) {
    so.grid_config = resolve(opts.at("grid_config").get<std::string>());
  }
  so.threads = overrides.threads;
  so.cache = overrides.cache;

  WorkflowResult result;
  result.session = Session::from_csv(csv, label, so);
  Session& s = *result.session;
  const Json& steps = workflow.at("steps");
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const Json& step = steps[k];
    const std::string path = "/steps/" + std::to_string(k);
    require(step.is_object() && step.contains("action"), path + ": missing action",
            ErrorCode::kSchemaInvalid);
    const std::string action = step.at("action").get<std::string>();
    const Json args = step.value("args", Json::object());
    Json out;
    const auto started = std::chrono::steady_clock::now();
    try {
      out = s.dispatch(action, args);
    } catch (const Error& e) {
      throw Error(e.code(), path + " (" + action + "): " + e.what());
    }
    if (action == "stack.build") {
      WorkflowRow row;
      row.step_index = out.at("step_index").get<std::size_t>();
      row.label = out.at("label").get<std::string>();
      row.model_count = s.active_stack()->model_ids.size();
      row.performance = s.active_stack()->performance;
      result.rows.push_back(std::move(row));
    } else if (action == "stack.store" && !result.rows.empty()) {
      result.rows.back().stored_id = out.at("stack_id").get<std::string>();
      result.rows.back().parent_id = out.at("parent").is_null() ? "" : out.at("parent").get<std::string>();
    }
    if (log) {
      std::string line = "[" + std::to_string(k + 1) + "/" + std::to_string(steps.size()) + "] " + action;
      if (action == "stack.build") {
        char buf[128];
        const auto& p = s.active_stack()->performance;
        std::snprintf(buf, sizeof buf, " models=%zu acc=%.4f prec=%.4f rec=%.4f f1=%.4f",
                      s.active_stack()->model_ids.size(), p.accuracy, p.precision, p.recall, p.f1);
        line += buf;
      } else if (out.contains("count")) {
        line += " count=" + out.at("count").dump();
      }
      const std::chrono::duration<double> took = std::chrono::steady_clock::now() - started;
      char tbuf[32];
      std::snprintf(tbuf, sizeof tbuf, " (%.1fs)", took.count());
      log(line + tbuf);
    }
    result.outputs.push_back(std::move(out));
  }
  return result;
}

std::string format_workflow_table(const std::vector<WorkflowRow>& rows) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-4s  %-28s  %-5s  %-6s  %6s  %9s  %9s  %9s  %9s\n", "step",
                "label", "stack", "parent", "models", "accuracy", "precision", "recall", "f1");
  os << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-4zu  %-28.28s  %-5s  %-6s  %6zu  %9.6f  %9.6f  %9.6f  %9.6f\n",
                  r.step_index, r.label.c_str(), r.stored_id.empty() ? "-" : r.stored_id.c_str(),
                  r.parent_id.empty() ? "-" : r.parent_id.c_str(), r.model_count,
                  r.performance.accuracy, r.performance.precision, r.performance.recall,
                  r.performance.f1);
    os << buf;
  }
  return os.str();
}

}  // namespace stackgen
