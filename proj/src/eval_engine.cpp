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

#include "stackgen/eval_engine.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <thread>

namespace stackgen {

std::vector<int> stratified_folds(std::span<const int> y, int num_classes, int k,
                                  std::uint64_t seed) {
  require(k >= 2, "fold count must be at least 2");
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < y.size(); ++i) {
    require(y[i] >= 0 && y[i] < num_classes, "label out of range");
    by_class[static_cast<std::size_t>(y[i])].push_back(i);
  }
  std::vector<int> folds(y.size(), -1);
  Rng rng(mix_seed(seed, 0xf01d));
  int offset = 0;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& rows = by_class[c];
    if (rows.empty()) continue;
    require(static_cast<int>(rows.size()) >= k,
            "class " + std::to_string(c) + " has " + std::to_string(rows.size()) +
                " instances, fewer than the " + std::to_string(k) + " folds");
    rng.shuffle(rows);
    // Continue dealing where the previous class stopped so fold sizes stay
    // within one of each other.
    for (std::size_t j = 0; j < rows.size(); ++j) {
      folds[rows[j]] = static_cast<int>((static_cast<std::size_t>(offset) + j) %
                                        static_cast<std::size_t>(k));
    }
    offset = static_cast<int>((static_cast<std::size_t>(offset) + rows.size()) %
                              static_cast<std::size_t>(k));
  }
  return folds;
}

const ModelRecord& EvaluationRun::record(ModelId id) const {
  const auto it = records.find(id);
  require(it != records.end(), "model " + std::to_string(id) + " is not in the evaluation run",
          ErrorCode::kNotFound);
  return it->second;
}

std::vector<ModelId> EvaluationRun::ids() const {
  std::vector<ModelId> out;
  for (const auto& [id, _] : records) out.push_back(id);
  return out;
}

std::vector<ModelId> EvaluationRun::ok_ids() const {
  std::vector<ModelId> out;
  for (const auto& [id, rec] : records) {
    if (!rec.failed) out.push_back(id);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cache

EvalCache::EvalCache(std::string directory) : directory_(std::move(directory)) {
  if (!directory_.empty()) std::filesystem::create_directories(directory_);
}

std::uint64_t EvalCache::key(std::uint64_t snapshot_fingerprint, const ModelSpec& spec,
                             const FeatureMask& mask, int num_folds,
                             std::uint64_t fold_seed) {
  Fnv1a h;
  h.u64(snapshot_fingerprint).u64(spec.content_hash()).u64(static_cast<std::uint64_t>(num_folds));
  h.u64(fold_seed);
  for (bool b : mask) h.u64(b ? 1 : 0);
  return h.digest();
}

std::optional<CachedResult> EvalCache::get(std::uint64_t key) {
  std::lock_guard lock(mutex_);
  if (const auto it = memory_.find(key); it != memory_.end()) {
    ++hits_;
    return it->second;
  }
  if (!directory_.empty()) {
    const auto path = std::filesystem::path(directory_) / (to_hex(key) + ".json");
    if (std::filesystem::exists(path)) {
      try {
        const Json j = Json::parse(read_file(path.string()));
        CachedResult r;
        r.failed = j.at("failed").get<bool>();
        r.failure = j.at("failure").get<std::string>();
        r.pred_fold = j.at("pred_fold").get<std::vector<int>>();
        const auto rows = j.at("rows").get<Eigen::Index>();
        const auto cols = j.at("cols").get<Eigen::Index>();
        const auto data = j.at("data").get<std::vector<double>>();
        require(static_cast<Eigen::Index>(data.size()) == rows * cols, "cache entry truncated",
                ErrorCode::kIo);
        r.oof_proba = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                     Eigen::RowMajor>>(data.data(), rows, cols);
        memory_.emplace(key, r);
        ++hits_;
        return r;
      } catch (const std::exception&) {
        // Unreadable entries are treated as misses and overwritten.
      }
    }
  }
  ++misses_;
  return std::nullopt;
}

void EvalCache::put(std::uint64_t key, const CachedResult& value) {
  std::lock_guard lock(mutex_);
  memory_[key] = value;
  if (directory_.empty()) return;
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(value.oof_proba.size()));
  for (Eigen::Index i = 0; i < value.oof_proba.rows(); ++i) {
    for (Eigen::Index j = 0; j < value.oof_proba.cols(); ++j) data.push_back(value.oof_proba(i, j));
  }
  const Json j{{"failed", value.failed}, {"failure", value.failure},
               {"pred_fold", value.pred_fold}, {"rows", value.oof_proba.rows()}, {"cols", value.oof_proba.cols()},
               {"data", data}};
  const auto path = std::filesystem::path(directory_) / (to_hex(key) + ".json");
  const auto tmp = path.string() + ".tmp";
  write_file(tmp, j.dump());
  std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Evaluation

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  unsigned workers = threads > 0 ? static_cast<unsigned>(threads)
                                 : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(1, n)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < workers; ++t) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

FeatureMask mask_for(const MaskMap& masks, ModelId id, Eigen::Index num_features) {
  const auto it = masks.find(id);
  if (it == masks.end()) return FeatureMask(static_cast<std::size_t>(num_features), true);
  require(static_cast<Eigen::Index>(it->second.size()) == num_features,
          "feature mask of model " + std::to_string(id) + " has the wrong length");
  return it->second;
}

namespace {

Matrix rows_of(const Matrix& X, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = X.row(rows[k]);
  return out;
}

}  // namespace

CachedResult cross_validate(const DatasetSnapshot& snapshot, const ModelSpec& spec,
                            const FeatureMask& mask, const EvaluationRun& run) {
  CachedResult out;
  const Eigen::Index n = snapshot.num_instances();
  const int c = snapshot.num_classes();
  out.oof_proba = Matrix::Zero(n, c);
  out.pred_fold.assign(static_cast<std::size_t>(n), -1);
  try {
    for (int f = 0; f < run.num_folds; ++f) {
      const auto& train = run.fold_train_rows[static_cast<std::size_t>(f)];
      std::vector<Eigen::Index> test;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (run.fold_assignment[static_cast<std::size_t>(i)] == f) test.push_back(i);
      }
      Labels y_train;
      y_train.reserve(train.size());
      for (Eigen::Index r : train) y_train.push_back(snapshot.y[static_cast<std::size_t>(r)]);
      BaseModel model(spec.algorithm, spec.params, spec.seed, mask);
      model.fit(rows_of(snapshot.X, train), y_train, c);
      const Matrix p = model.predict_proba(rows_of(snapshot.X, test));
      for (std::size_t k = 0; k < test.size(); ++k) {
        const auto row = p.row(static_cast<Eigen::Index>(k));
        if (!row.allFinite() || std::abs(row.sum() - 1.0) > 1e-6) {
          fail(ErrorCode::kTrainingFailed, "non-normalized probabilities");
        }
        out.oof_proba.row(test[k]) = row;
        out.pred_fold[static_cast<std::size_t>(test[k])] = f;
      }
    }
  } catch (const std::exception& e) {
    out.failed = true;
    out.failure = e.what();
    out.oof_proba = Matrix::Zero(n, c);
  }
  return out;
}

namespace {

void score_record(ModelRecord& rec, const DatasetSnapshot& snapshot, const MetricConfig& config) {
  if (rec.failed) {
    rec.metrics = MetricVector{};
    rec.combined = 0.0;
    return;
  }
  rec.oof_pred = argmax_rows(rec.oof_proba);
  rec.metrics = compute_metrics(snapshot.y, rec.oof_pred, rec.oof_proba,
                                snapshot.num_classes(), config);
  rec.combined = weighted_score(rec.metrics, config);
}

void prepare_folds(EvaluationRun& run, const DatasetSnapshot& snapshot, const EvalOptions& opt) {
  snapshot.validate();
  run.num_folds = opt.num_folds;
  run.fold_seed = opt.seed;
  run.fold_assignment = stratified_folds(snapshot.y, snapshot.num_classes(), opt.num_folds, opt.seed);
  run.fold_train_rows.assign(static_cast<std::size_t>(opt.num_folds), {});
  for (int f = 0; f < opt.num_folds; ++f) {
    std::set<int> classes;
    for (Eigen::Index i = 0; i < snapshot.num_instances(); ++i) {
      if (run.fold_assignment[static_cast<std::size_t>(i)] != f) {
        run.fold_train_rows[static_cast<std::size_t>(f)].push_back(i);
        classes.insert(snapshot.y[static_cast<std::size_t>(i)]);
      }
    }
    require(classes.size() >= 2, "training fold " + std::to_string(f) + " has a single class");
  }
}

}  // namespace

void extend_run(EvaluationRun& run, const DatasetSnapshot& snapshot,
                const std::vector<ModelSpec>& specs, const MaskMap& masks,
                const EvalOptions& options) {
  require(run.snapshot_fingerprint == snapshot.fingerprint(),
          "evaluation run belongs to a different snapshot", ErrorCode::kConflict);
  const Eigen::Index d = snapshot.num_features();
  std::vector<FeatureMask> mask_list;
  for (const auto& s : specs) {
    FeatureMask m = mask_for(masks, s.id, d);
    require(std::count(m.begin(), m.end(), true) >= 1,
            "feature mask of model " + std::to_string(s.id) + " keeps no features");
    mask_list.push_back(std::move(m));
  }

  std::vector<CachedResult> results(specs.size());
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;
  parallel_for(specs.size(), options.threads, [&](std::size_t k) {
    std::optional<CachedResult> hit;
    std::uint64_t key = 0;
    if (options.cache) {
      key = EvalCache::key(run.snapshot_fingerprint, specs[k], mask_list[k], run.num_folds,
                           run.fold_seed);
      hit = options.cache->get(key);
    }
    if (hit) {
      results[k] = std::move(*hit);
    } else {
      results[k] = cross_validate(snapshot, specs[k], mask_list[k], run);
      if (options.cache) options.cache->put(key, results[k]);
    }
    const std::size_t finished = done.fetch_add(1) + 1;
    if (options.progress) {
      std::lock_guard lock(progress_mutex);
      options.progress(finished, specs.size());
    }
  });

  for (std::size_t k = 0; k < specs.size(); ++k) {
    ModelRecord rec;
    rec.spec = specs[k];
    rec.feature_mask = mask_list[k];
    rec.failed = results[k].failed;
    rec.failure = results[k].failure;
    rec.oof_proba = std::move(results[k].oof_proba);
    rec.pred_fold = std::move(results[k].pred_fold);
    score_record(rec, snapshot, run.config);
    if (rec.failed) rec.oof_pred.assign(static_cast<std::size_t>(snapshot.num_instances()), 0);
    run.records[specs[k].id] = std::move(rec);
  }
}

EvaluationRun evaluate_pool(const DatasetSnapshot& snapshot, const std::vector<ModelSpec>& pool,
                            const MetricConfig& config, const MaskMap& masks,
                            const EvalOptions& options) {
  EvaluationRun run;
  run.snapshot_id = snapshot.id;
  run.snapshot_fingerprint = snapshot.fingerprint();
  run.config = config;
  run.config_hash = config.hash();
  prepare_folds(run, snapshot, options);
  extend_run(run, snapshot, pool, masks, options);
  return run;
}

EvaluationRun rescore(const EvaluationRun& run, const DatasetSnapshot& snapshot,
                      const MetricConfig& config) {
  require(run.snapshot_fingerprint == snapshot.fingerprint(),
          "evaluation run belongs to a different snapshot", ErrorCode::kConflict);
  EvaluationRun out = run;
  out.config = config;
  out.config_hash = config.hash();
  for (auto& [id, rec] : out.records) score_record(rec, snapshot, config);
  return out;
}

bool verify_out_of_fold(const EvaluationRun& run) {
  std::vector<std::vector<bool>> seen(run.fold_train_rows.size());
  for (std::size_t f = 0; f < run.fold_train_rows.size(); ++f) {
    seen[f].assign(run.fold_assignment.size(), false);
    for (Eigen::Index r : run.fold_train_rows[f]) seen[f][static_cast<std::size_t>(r)] = true;
  }
  for (const auto& [id, rec] : run.records) {
    if (rec.pred_fold.size() != run.fold_assignment.size()) return false;
    for (std::size_t i = 0; i < rec.pred_fold.size(); ++i) {
      const int f = rec.pred_fold[i];
      if (f < 0 || static_cast<std::size_t>(f) >= seen.size()) return false;
      if (seen[static_cast<std::size_t>(f)][i]) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Summaries

BoxStats box_stats(std::vector<double> values) {
  require(!values.empty(), "box statistics need at least one value");
  std::sort(values.begin(), values.end());
  const auto quantile = [&](double q) {
    const double h = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = static_cast<std::size_t>(std::ceil(h));
    return lo == hi ? values[lo] : 0.5 * (values[lo] + values[hi]);
  };
  return BoxStats{values.front(), quantile(0.25), quantile(0.5), quantile(0.75),
                  values.back(), values.size()};
}

std::vector<AlgorithmDistribution> algorithm_score_distribution(const EvaluationRun& run,
                                                                std::vector<std::string>* notices) {
  require(!run.records.empty(), "evaluation run is empty");
  std::array<std::vector<double>, kNumAlgorithms> scores;
  std::array<bool, kNumAlgorithms> present{};
  for (const auto& [id, rec] : run.records) {
    const auto a = static_cast<std::size_t>(rec.spec.algorithm);
    present[a] = true;
    if (!rec.failed) scores[a].push_back(rec.combined);
  }
  std::vector<AlgorithmDistribution> out;
  for (Algorithm a : kAllAlgorithms) {
    const auto k = static_cast<std::size_t>(a);
    if (!present[k]) continue;
    if (scores[k].empty()) {
      if (notices) {
        notices->push_back("all " + std::string(algorithm_id(a)) + " models failed to train");
      }
      continue;
    }
    out.push_back({a, box_stats(scores[k])});
  }
  return out;
}

std::vector<AlgorithmClassSummary> per_class_summary(const EvaluationRun& run,
                                                     const std::set<ModelId>& selected) {
  for (ModelId id : selected) {
    require(run.contains(id), "model " + std::to_string(id) + " is not in the evaluation run",
            ErrorCode::kNotFound);
  }
  std::vector<AlgorithmClassSummary> out;
  for (Algorithm a : kAllAlgorithms) {
    std::vector<ClassTriple> all_sum, sel_sum;
    std::size_t n_all = 0, n_sel = 0;
    for (const auto& [id, rec] : run.records) {
      if (rec.spec.algorithm != a || rec.failed) continue;
      const auto& pc = rec.metrics.per_class;
      if (all_sum.empty()) {
        all_sum.resize(pc.size());
        sel_sum.resize(pc.size());
      }
      const bool is_sel = selected.count(id) > 0;
      for (std::size_t c = 0; c < pc.size(); ++c) {
        all_sum[c].precision += pc[c].precision;
        all_sum[c].recall += pc[c].recall;
        all_sum[c].f1 += pc[c].f1;
        if (is_sel) {
          sel_sum[c].precision += pc[c].precision;
          sel_sum[c].recall += pc[c].recall;
          sel_sum[c].f1 += pc[c].f1;
        }
      }
      ++n_all;
      if (is_sel) ++n_sel;
    }
    if (n_all == 0) continue;
    AlgorithmClassSummary s{a, {}};
    for (std::size_t c = 0; c < all_sum.size(); ++c) {
      ClassSummary cs;
      const double na = static_cast<double>(n_all);
      cs.baseline = {all_sum[c].precision / na, all_sum[c].recall / na, all_sum[c].f1 / na};
      if (n_sel > 0) {
        const double ns = static_cast<double>(n_sel);
        cs.selected = ClassTriple{sel_sum[c].precision / ns, sel_sum[c].recall / ns,
                                  sel_sum[c].f1 / ns};
      }
      s.classes.push_back(cs);
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace stackgen
