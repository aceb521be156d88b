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

#include "stackgen/stacker.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "learners/internal.hpp"

namespace stackgen {

namespace {

std::uint64_t parse_hex64(const std::string& s, const std::string& path) {
  require(!s.empty() && s.size() <= 16 &&
              s.find_first_not_of("0123456789abcdef") == std::string::npos,
          path + ": expected a hex fingerprint", ErrorCode::kSchemaInvalid);
  return std::stoull(s, nullptr, 16);
}

bool proba_usable(const ModelRecord& rec, Eigen::Index n, int num_classes) {
  if (rec.oof_proba.rows() != n || rec.oof_proba.cols() != num_classes) return false;
  if (!rec.oof_proba.allFinite()) return false;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(rec.oof_proba.row(i).sum() - 1.0) > 1e-6) return false;
  }
  return true;
}

Json mask_json(const FeatureMask& mask) {
  Json out = Json::array();
  for (bool b : mask) out.push_back(b);
  return out;
}

// Metamodel weights are exported as plain row arrays.
Json rows_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

Matrix rows_from_json(const Json& j) {
  const Eigen::Index r = static_cast<Eigen::Index>(j.size());
  const Eigen::Index c = r == 0 ? 0 : static_cast<Eigen::Index>(j[0].size());
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index k = 0; k < c; ++k) {
      m(i, k) = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)].get<double>();
    }
  }
  return m;
}

Matrix take_rows(const Matrix& Z, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), Z.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = Z.row(rows[r]);
  return out;
}

}  // namespace

double select_meta_c(const Matrix& Z, std::span<const int> y, int num_classes,
                     const MetaOptions& options, std::uint64_t salt) {
  require(!options.c_grid.empty(), "metamodel C grid is empty");
  std::vector<double> grid = options.c_grid;
  std::sort(grid.begin(), grid.end());
  if (grid.size() == 1) return grid.front();

  std::vector<int> counts(static_cast<std::size_t>(num_classes), 0);
  for (int label : y) ++counts[static_cast<std::size_t>(label)];
  int smallest = static_cast<int>(y.size());
  for (int c : counts) {
    if (c > 0) smallest = std::min(smallest, c);
  }
  const int k = std::min(options.inner_folds, smallest);
  if (k < 2) return grid[grid.size() / 2];

  const std::vector<int> folds = stratified_folds(y, num_classes, k, mix_seed(options.seed, salt));
  std::vector<std::size_t> correct(grid.size(), 0);
  for (int f = 0; f < k; ++f) {
    std::vector<Eigen::Index> train, test;
    for (std::size_t i = 0; i < y.size(); ++i) {
      (folds[i] == f ? test : train).push_back(static_cast<Eigen::Index>(i));
    }
    const Matrix Zt = take_rows(Z, train);
    const Matrix Zv = take_rows(Z, test);
    Labels yt;
    for (Eigen::Index r : train) yt.push_back(y[static_cast<std::size_t>(r)]);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const auto fit = learners::fit_logistic(Zt, yt, num_classes, grid[g], options.max_iter);
      const Labels pred = argmax_rows(learners::logistic_proba(fit, Zv));
      for (std::size_t r = 0; r < test.size(); ++r) {
        correct[g] += pred[r] == y[static_cast<std::size_t>(test[r])] ? 1 : 0;
      }
    }
  }
  const auto best = std::max_element(correct.begin(), correct.end());
  return grid[static_cast<std::size_t>(best - correct.begin())];
}

Matrix meta_features(const EvaluationRun& run, const std::vector<ModelId>& models) {
  require(!models.empty(), "a stack needs at least one model");
  const Matrix& first = run.record(models.front()).oof_proba;
  const Eigen::Index n = first.rows();
  const Eigen::Index c = first.cols();
  Matrix Z(n, c * static_cast<Eigen::Index>(models.size()));
  for (std::size_t k = 0; k < models.size(); ++k) {
    const Matrix& p = run.record(models[k]).oof_proba;
    require(p.rows() == n && p.cols() == c, "out-of-fold matrices disagree in shape");
    Z.middleCols(static_cast<Eigen::Index>(k) * c, c) = p;
  }
  return Z;
}

ActiveStack build_stack(const DatasetSnapshot& snapshot, const EvaluationRun& run,
                        const std::vector<ModelId>& model_ids, const MetricConfig& config,
                        const MetaOptions& options) {
  require(snapshot.fingerprint() == run.snapshot_fingerprint,
          "evaluation run belongs to a different snapshot", ErrorCode::kConflict);
  require(!model_ids.empty(), "a stack needs at least one model");

  const Eigen::Index n = snapshot.X.rows();
  const int num_classes = static_cast<int>(snapshot.class_names.size());

  ActiveStack out;
  out.snapshot_id = snapshot.id;
  out.snapshot_fingerprint = run.snapshot_fingerprint;
  out.config = config;

  std::set<ModelId> seen;
  for (ModelId id : model_ids) {
    require(run.contains(id), "model " + std::to_string(id) + " has not been evaluated",
            ErrorCode::kNotFound);
    if (!seen.insert(id).second) continue;
    const ModelRecord& rec = run.record(id);
    if (rec.failed) {
      out.warnings.push_back("model " + std::to_string(id) + " failed training and was excluded");
      continue;
    }
    if (!proba_usable(rec, n, num_classes)) {
      out.warnings.push_back("model " + std::to_string(id) +
                             " has no usable probabilities and was excluded");
      continue;
    }
    out.model_ids.push_back(id);
    out.masks[id] = rec.feature_mask;
  }
  require(!out.model_ids.empty(), "no base model survived", ErrorCode::kTrainingFailed);

  const Matrix Z = meta_features(run, out.model_ids);
  out.meta_oof_proba = Matrix::Zero(n, num_classes);
  out.meta_pred_fold.assign(static_cast<std::size_t>(n), -1);
  out.meta_train_rows.resize(static_cast<std::size_t>(run.num_folds));
  out.meta_c.assign(static_cast<std::size_t>(run.num_folds), 0.0);

  for (int f = 0; f < run.num_folds; ++f) {
    std::vector<Eigen::Index> train, test;
    for (Eigen::Index i = 0; i < n; ++i) {
      (run.fold_assignment[static_cast<std::size_t>(i)] == f ? test : train).push_back(i);
    }
    if (test.empty()) continue;
    const Matrix Zt = take_rows(Z, train);
    Labels yt(train.size());
    for (std::size_t r = 0; r < train.size(); ++r) yt[r] = snapshot.y[static_cast<std::size_t>(train[r])];
    const double c = select_meta_c(Zt, yt, num_classes, options, static_cast<std::uint64_t>(f));
    out.meta_c[static_cast<std::size_t>(f)] = c;
    const learners::LogisticFit fit = learners::fit_logistic(Zt, yt, num_classes, c, options.max_iter);
    const Matrix p = learners::logistic_proba(fit, take_rows(Z, test));
    for (std::size_t r = 0; r < test.size(); ++r) {
      out.meta_oof_proba.row(test[r]) = p.row(static_cast<Eigen::Index>(r));
      out.meta_pred_fold[static_cast<std::size_t>(test[r])] = f;
    }
    out.meta_train_rows[static_cast<std::size_t>(f)] = std::move(train);
  }

  out.meta_oof_pred = argmax_rows(out.meta_oof_proba);
  out.performance = stack_performance(snapshot.y, out.meta_oof_pred, num_classes, config);
  return out;
}

bool verify_meta_out_of_fold(const ActiveStack& stack) {
  for (std::size_t i = 0; i < stack.meta_pred_fold.size(); ++i) {
    const int f = stack.meta_pred_fold[i];
    if (f < 0 || f >= static_cast<int>(stack.meta_train_rows.size())) return false;
    const auto& rows = stack.meta_train_rows[static_cast<std::size_t>(f)];
    if (std::binary_search(rows.begin(), rows.end(), static_cast<Eigen::Index>(i))) return false;
  }
  return true;
}

std::vector<Algorithm> StackRecord::algorithms_used() const {
  std::set<Algorithm> algos;
  for (const auto& s : specs) algos.insert(s.algorithm);
  return {algos.begin(), algos.end()};
}

Json StackRecord::to_json() const {
  Json models = Json::array();
  for (const auto& s : specs) {
    Json m = s.to_json();
    auto it = masks.find(s.id);
    if (it != masks.end()) m["feature_mask"] = mask_json(it->second);
    models.push_back(std::move(m));
  }
  Json algos = Json::array();
  for (Algorithm a : algorithms_used()) algos.push_back(algorithm_id(a));
  return Json{{"stack_id", id},
              {"parent", parent ? Json(*parent) : Json(nullptr)},
              {"model_ids", model_ids},
              {"models", models},
              {"snapshot_id", snapshot_id},
              {"snapshot_fingerprint", to_hex(snapshot_fingerprint)},
              {"metric_config", metric_config_to_json(config)},
              {"metric_config_hash", to_hex(config_hash)},
              {"performance", performance_to_json(performance)},
              {"model_count", model_ids.size()},
              {"algorithms_used", algos},
              {"note", note}};
}

const StackRecord& StackStore::store(const ActiveStack& active, std::vector<ModelSpec> specs,
                                     std::string note) {
  require(specs.size() == active.model_ids.size(), "specs do not match the stack models");
  StackRecord rec;
  rec.id = "S" + std::to_string(records_.size() + 1);
  rec.parent = active_;
  rec.model_ids = active.model_ids;
  rec.specs = std::move(specs);
  rec.masks = active.masks;
  rec.snapshot_id = active.snapshot_id;
  rec.snapshot_fingerprint = active.snapshot_fingerprint;
  rec.config = active.config;
  rec.config_hash = active.config.hash();
  rec.performance = active.performance;
  rec.note = std::move(note);
  records_.push_back(std::move(rec));
  active_ = records_.back().id;
  return records_.back();
}

const StackRecord& StackStore::get(const std::string& id) const {
  for (const auto& r : records_) {
    if (r.id == id) return r;
  }
  fail(ErrorCode::kNotFound, "unknown stack " + id);
}

void StackStore::activate(const std::string& id) {
  get(id);
  active_ = id;
}

StackPredictor StackPredictor::fit(const DatasetSnapshot& snapshot, const EvaluationRun& run,
                                   const StackRecord& record, const MetaOptions& options) {
  require(snapshot.fingerprint() == record.snapshot_fingerprint,
          "stack was built on a different snapshot", ErrorCode::kConflict);
  const int num_classes = static_cast<int>(snapshot.class_names.size());

  StackPredictor p;
  p.record_ = record;
  p.feature_names_ = snapshot.feature_names;
  p.class_names_ = snapshot.class_names;
  p.fingerprint_ = record.snapshot_fingerprint;
  p.num_instances_ = snapshot.X.rows();

  for (const auto& spec : record.specs) {
    auto model = std::make_shared<BaseModel>(
        spec.algorithm, spec.params, spec.seed,
        mask_for(record.masks, spec.id, snapshot.X.cols()));
    model->fit(snapshot.X, snapshot.y, num_classes);
    p.models_.push_back(std::move(model));
  }
  const Matrix Z = meta_features(run, record.model_ids);
  p.meta_inverse_reg_ = select_meta_c(Z, snapshot.y, num_classes, options, 0xfull);
  const learners::LogisticFit fit =
      learners::fit_logistic(Z, snapshot.y, num_classes, p.meta_inverse_reg_, options.max_iter);
  p.meta_coef_ = fit.coef;
  p.meta_intercept_ = fit.intercept;
  return p;
}

Json StackPredictor::to_json() const {
  Json models = Json::array();
  for (std::size_t k = 0; k < models_.size(); ++k) {
    const ModelSpec& s = record_.specs[k];
    models.push_back(Json{{"model_id", s.id},
                          {"algo_id", algorithm_id(s.algorithm)},
                          {"params", s.params},
                          {"seed", s.seed},
                          {"feature_mask", mask_json(models_[k]->feature_mask())},
                          {"fitted", models_[k]->save()}});
  }
  return Json{
      {"schema_version", kExportSchemaVersion},
      {"stack_id", record_.id},
      {"parent", record_.parent ? Json(*record_.parent) : Json(nullptr)},
      {"dataset",
       {{"fingerprint", to_hex(fingerprint_)},
        {"num_instances", num_instances_},
        {"feature_names", feature_names_},
        {"class_names", class_names_}}},
      {"metric_config", metric_config_to_json(record_.config)},
      {"performance", performance_to_json(record_.performance)},
      {"models", models},
      {"metamodel",
       {{"family", "logistic_l2"},
        {"C", meta_inverse_reg_},
        {"coef", rows_json(meta_coef_)},
        {"intercept", learners::vector_to_json(meta_intercept_)}}}};
}

void validate_export(const Json& doc) {
  auto bad = [](const std::string& path, const std::string& what) {
    fail(ErrorCode::kSchemaInvalid, path + ": " + what);
  };
  auto need = [&](const Json& parent, const std::string& base, const char* field) -> const Json& {
    if (!parent.is_object() || !parent.contains(field)) bad(base + "/" + field, "missing");
    return parent.at(field);
  };
  auto string_array = [&](const Json& j, const std::string& path) {
    if (!j.is_array()) bad(path, "expected an array");
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (!j[i].is_string()) bad(path + "/" + std::to_string(i), "expected a string");
    }
  };

  if (!doc.is_object()) bad("", "expected an object");
  const Json& version = need(doc, "", "schema_version");
  if (version != kExportSchemaVersion) bad("/schema_version", "unsupported version");

  const Json& dataset = need(doc, "", "dataset");
  if (!dataset.is_object()) bad("/dataset", "expected an object");
  const Json& fp = need(dataset, "/dataset", "fingerprint");
  if (!fp.is_string()) bad("/dataset/fingerprint", "expected a string");
  parse_hex64(fp.get<std::string>(), "/dataset/fingerprint");
  const Json& features = need(dataset, "/dataset", "feature_names");
  string_array(features, "/dataset/feature_names");
  const Json& classes = need(dataset, "/dataset", "class_names");
  string_array(classes, "/dataset/class_names");
  if (classes.size() < 2) bad("/dataset/class_names", "need at least two classes");

  const Json& config = need(doc, "", "metric_config");
  if (!config.is_object()) bad("/metric_config", "expected an object");

  const Json& models = need(doc, "", "models");
  if (!models.is_array() || models.empty()) bad("/models", "expected a nonempty array");
  for (std::size_t k = 0; k < models.size(); ++k) {
    const std::string base = "/models/" + std::to_string(k);
    const Json& m = models[k];
    if (!m.is_object()) bad(base, "expected an object");
    if (!need(m, base, "model_id").is_number_integer()) bad(base + "/model_id", "expected an integer");
    const Json& algo = need(m, base, "algo_id");
    if (!algo.is_string()) bad(base + "/algo_id", "expected a string");
    if (!need(m, base, "params").is_object()) bad(base + "/params", "expected an object");
    if (!need(m, base, "seed").is_number_unsigned()) bad(base + "/seed", "expected an unsigned integer");
    const Json& mask = need(m, base, "feature_mask");
    if (!mask.is_array() || mask.size() != features.size()) {
      bad(base + "/feature_mask", "expected one flag per feature");
    }
    for (const auto& b : mask) {
      if (!b.is_boolean()) bad(base + "/feature_mask", "expected booleans");
    }
    const Json& fitted = need(m, base, "fitted");
    if (!fitted.is_object()) bad(base + "/fitted", "expected an object");
    if (fitted.value("algo_id", Json()) != algo) bad(base + "/fitted/algo_id", "does not match algo_id");
    if (fitted.value("feature_mask", Json()) != mask) {
      bad(base + "/fitted/feature_mask", "does not match feature_mask");
    }
  }

  const Json& meta = need(doc, "", "metamodel");
  if (!meta.is_object()) bad("/metamodel", "expected an object");
  if (!need(meta, "/metamodel", "C").is_number()) bad("/metamodel/C", "expected a number");
  const Json& coef = need(meta, "/metamodel", "coef");
  const Json& intercept = need(meta, "/metamodel", "intercept");
  const std::size_t c = classes.size();
  const std::size_t width = c * models.size();
  if (!coef.is_array() || coef.size() != c) bad("/metamodel/coef", "expected one row per class");
  for (std::size_t r = 0; r < c; ++r) {
    const Json& row = coef[r];
    const std::string path = "/metamodel/coef/" + std::to_string(r);
    if (!row.is_array() || row.size() != width) bad(path, "expected one weight per meta-feature");
    for (const auto& v : row) {
      if (!v.is_number()) bad(path, "expected numbers");
    }
  }
  if (!intercept.is_array() || intercept.size() != c) {
    bad("/metamodel/intercept", "expected one value per class");
  }
  for (const auto& v : intercept) {
    if (!v.is_number()) bad("/metamodel/intercept", "expected numbers");
  }
}

StackPredictor StackPredictor::from_json(const Json& doc, std::vector<std::string>* warnings,
                                         std::optional<std::uint64_t> expected_fingerprint) {
  validate_export(doc);
  StackPredictor p;
  const Json& dataset = doc.at("dataset");
  p.feature_names_ = dataset.at("feature_names").get<std::vector<std::string>>();
  p.class_names_ = dataset.at("class_names").get<std::vector<std::string>>();
  p.fingerprint_ = parse_hex64(dataset.at("fingerprint").get<std::string>(), "/dataset/fingerprint");
  p.num_instances_ = dataset.value("num_instances", std::int64_t{0});
  if (expected_fingerprint && *expected_fingerprint != p.fingerprint_ && warnings) {
    warnings->push_back("dataset fingerprint " + to_hex(*expected_fingerprint) +
                        " differs from the exported " + to_hex(p.fingerprint_));
  }

  p.record_.id = doc.value("stack_id", std::string());
  if (doc.contains("parent") && doc.at("parent").is_string()) {
    p.record_.parent = doc.at("parent").get<std::string>();
  }
  p.record_.snapshot_fingerprint = p.fingerprint_;
  p.record_.config = metric_config_from_json(doc.at("metric_config"));
  p.record_.config_hash = p.record_.config.hash();
  if (doc.contains("performance")) {
    const Json& perf = doc.at("performance");
    p.record_.performance = {perf.value("accuracy", 0.0), perf.value("precision", 0.0),
                             perf.value("recall", 0.0), perf.value("f1", 0.0)};
  }

  const int num_classes = static_cast<int>(p.class_names_.size());
  for (std::size_t k = 0; k < doc.at("models").size(); ++k) {
    const Json& m = doc.at("models")[k];
    const std::string base = "/models/" + std::to_string(k);
    ModelSpec spec;
    spec.id = m.at("model_id").get<ModelId>();
    try {
      spec.algorithm = parse_algorithm(m.at("algo_id").get<std::string>());
    } catch (const Error& e) {
      fail(ErrorCode::kSchemaInvalid, base + "/algo_id: " + e.what());
    }
    spec.params = m.at("params");
    spec.seed = m.at("seed").get<std::uint64_t>();
    std::shared_ptr<BaseModel> model;
    try {
      model = std::make_shared<BaseModel>(BaseModel::load(m.at("fitted")));
    } catch (const Json::exception& e) {
      fail(ErrorCode::kSchemaInvalid, base + "/fitted: " + e.what());
    } catch (const Error& e) {
      fail(ErrorCode::kSchemaInvalid, base + "/fitted: " + e.what());
    }
    if (model->num_classes() != num_classes) {
      fail(ErrorCode::kSchemaInvalid, base + "/fitted/num_classes: does not match class_names");
    }
    p.record_.model_ids.push_back(spec.id);
    p.record_.masks[spec.id] = model->feature_mask();
    p.record_.specs.push_back(std::move(spec));
    p.models_.push_back(std::move(model));
  }

  const Json& meta = doc.at("metamodel");
  p.meta_inverse_reg_ = meta.at("C").get<double>();
  p.meta_coef_ = rows_from_json(meta.at("coef"));
  p.meta_intercept_ = learners::vector_from_json(meta.at("intercept"));
  return p;
}

Matrix StackPredictor::predict_proba(const Matrix& X) const {
  require(X.cols() == static_cast<Eigen::Index>(feature_names_.size()),
          "expected " + std::to_string(feature_names_.size()) + " feature columns");
  const Eigen::Index c = static_cast<Eigen::Index>(class_names_.size());
  Matrix Z(X.rows(), c * static_cast<Eigen::Index>(models_.size()));
  for (std::size_t k = 0; k < models_.size(); ++k) {
    Z.middleCols(static_cast<Eigen::Index>(k) * c, c) = models_[k]->predict_proba(X);
  }
  learners::LogisticFit fit{meta_coef_, meta_intercept_};
  return learners::logistic_proba(fit, Z);
}

Labels StackPredictor::predict(const Matrix& X) const { return argmax_rows(predict_proba(X)); }

Json metric_config_to_json(const MetricConfig& c) {
  Json weights = Json::object();
  for (Metric m : kAllMetrics) weights[std::string(metric_id(m))] = c.weight(m);
  Json averaging = Json::object();
  for (Metric m : kAllMetrics) {
    if (metric_has_averaging(m)) averaging[std::string(metric_id(m))] = averaging_id(c.averaging(m));
  }
  return Json{{"weights", weights},
              {"averaging", averaging},
              {"beta", c.beta},
              {"detailed_feature_search", c.detailed_feature_search}};
}

MetricConfig metric_config_from_json(const Json& j, const MetricConfig& base) {
  require(j.is_object(), "metric config must be an object");
  MetricConfig c = base;
  for (const auto& [key, value] : j.items()) {
    if (key == "weights") {
      require(value.is_object(), "weights must be an object");
      for (const auto& [mid, w] : value.items()) {
        require(w.is_number(), "weight of " + mid + " must be a number");
        at(c.weights, parse_metric(mid)) = w.get<double>();
      }
    } else if (key == "averaging") {
      require(value.is_object(), "averaging must be an object");
      for (const auto& [mid, a] : value.items()) {
        const Metric m = parse_metric(mid);
        require(metric_has_averaging(m), mid + " takes no averaging option");
        require(a.is_string(), "averaging of " + mid + " must be a string");
        c.set_averaging(m, parse_averaging(a.get<std::string>()));
      }
    } else if (key == "beta") {
      require(value.is_number(), "beta must be a number");
      c.beta = value.get<double>();
    } else if (key == "detailed_feature_search") {
      require(value.is_boolean(), "detailed_feature_search must be a boolean");
      c.detailed_feature_search = value.get<bool>();
    } else {
      fail(ErrorCode::kInvalidArgument, "unknown metric config field " + key);
    }
  }
  return c;
}

Json performance_to_json(const StackPerformance& p) {
  return Json{{"accuracy", p.accuracy}, {"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}};
}

}  // namespace stackgen
