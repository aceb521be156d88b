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

#include "stackgen/importance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stackgen {

std::string_view importance_method_id(ImportanceMethod m) {
  switch (m) {
    case ImportanceMethod::kUnivariate: return "univariate";
    case ImportanceMethod::kPermutation: return "permutation";
    case ImportanceMethod::kAccuracy: return "accuracy";
    case ImportanceMethod::kCombined: return "combined";
  }
  return "";
}

ImportanceMethod parse_importance_method(std::string_view id) {
  for (auto m : {ImportanceMethod::kUnivariate, ImportanceMethod::kPermutation,
                 ImportanceMethod::kAccuracy, ImportanceMethod::kCombined}) {
    if (importance_method_id(m) == id) return m;
  }
  fail(ErrorCode::kInvalidArgument, "unknown importance method '" + std::string(id) + "'");
}

void ImportanceTable::finalize_rows() {
  row_average.assign(static_cast<std::size_t>(values.rows()), 0.0);
  for (Eigen::Index f = 0; f < values.rows(); ++f) {
    double sum = 0.0;
    int n = 0;
    for (Eigen::Index m = 0; m < values.cols(); ++m) {
      if (!missing.empty() && missing[static_cast<std::size_t>(f)][static_cast<std::size_t>(m)]) {
        continue;
      }
      sum += values(f, m);
      ++n;
    }
    row_average[static_cast<std::size_t>(f)] = n > 0 ? sum / n : 0.0;
  }
}

Vector anova_f(const DatasetSnapshot& s) {
  const Eigen::Index n = s.num_instances(), d = s.num_features();
  const int k = s.num_classes();
  const auto counts = s.class_counts();
  int present = 0;
  for (auto c : counts) present += c > 0 ? 1 : 0;
  require(present >= 2, "univariate importance needs at least two classes");
  Vector out(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    std::vector<double> sum(static_cast<std::size_t>(k), 0.0);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      sum[static_cast<std::size_t>(s.y[static_cast<std::size_t>(i)])] += s.X(i, j);
      total += s.X(i, j);
    }
    const double grand = total / static_cast<double>(n);
    double between = 0.0, within = 0.0;
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] == 0) continue;
      const double mean = sum[static_cast<std::size_t>(c)] / static_cast<double>(counts[static_cast<std::size_t>(c)]);
      between += static_cast<double>(counts[static_cast<std::size_t>(c)]) * (mean - grand) * (mean - grand);
      sum[static_cast<std::size_t>(c)] = mean;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const double diff = s.X(i, j) - sum[static_cast<std::size_t>(s.y[static_cast<std::size_t>(i)])];
      within += diff * diff;
    }
    const double df_between = present - 1;
    const double df_within = static_cast<double>(n) - present;
    // Relative guards keep round-off in constant columns from producing a
    // spurious statistic.
    const double scale = std::max(1.0, grand * grand) * static_cast<double>(n);
    if (between <= 1e-12 * scale) {
      out(j) = 0.0;
    } else if (within <= 1e-12 * scale || df_within <= 0) {
      out(j) = std::numeric_limits<double>::infinity();
    } else {
      out(j) = (between / df_between) / (within / df_within);
    }
  }
  return out;
}

Vector min_max_normalize(const Vector& v) {
  Vector out = Vector::Zero(v.size());
  if (v.size() == 0) return out;
  bool any_inf = false;
  for (Eigen::Index i = 0; i < v.size(); ++i) any_inf |= std::isinf(v(i)) && v(i) > 0;
  if (any_inf) {
    for (Eigen::Index i = 0; i < v.size(); ++i) out(i) = std::isinf(v(i)) && v(i) > 0 ? 1.0 : 0.0;
    return out;
  }
  const double lo = v.minCoeff(), hi = v.maxCoeff();
  if (hi - lo <= 0.0) return out;
  return ((v.array() - lo) / (hi - lo)).matrix();
}

Vector univariate_importance(const DatasetSnapshot& snapshot) {
  return min_max_normalize(anova_f(snapshot));
}

namespace {

Matrix take_rows(const Matrix& X, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = X.row(rows[k]);
  return out;
}

const ModelRecord& usable_record(const EvaluationRun& run, const DatasetSnapshot& snapshot,
                                 ModelId model) {
  require(run.snapshot_fingerprint == snapshot.fingerprint(),
          "evaluation run belongs to a different snapshot", ErrorCode::kConflict);
  const ModelRecord& rec = run.record(model);
  require(!rec.failed, "model " + std::to_string(model) + " failed to train");
  return rec;
}

void require_detailed(const MetricConfig& config) {
  require(config.detailed_feature_search,
          "detailed feature search is disabled; permutation and accuracy importance are "
          "unavailable",
          ErrorCode::kUnavailable);
}

}  // namespace

Vector permutation_importance(const DatasetSnapshot& snapshot, const EvaluationRun& run,
                              ModelId model, const MetricConfig& config,
                              const PermutationOptions& options) {
  require_detailed(config);
  require(options.repeats >= 1, "permutation repeats must be positive");
  const ModelRecord& rec = usable_record(run, snapshot, model);
  const Eigen::Index n = snapshot.num_instances(), d = snapshot.num_features();
  const int c = snapshot.num_classes();
  const auto R = static_cast<std::size_t>(options.repeats);

  Matrix base = Matrix::Zero(n, c);
  // permuted[j * R + r] is the out-of-fold probability matrix with column j
  // shuffled under repeat r.
  std::vector<Matrix> permuted(static_cast<std::size_t>(d) * R);
  for (Eigen::Index j = 0; j < d; ++j) {
    if (!rec.feature_mask[static_cast<std::size_t>(j)]) continue;
    for (std::size_t r = 0; r < R; ++r) permuted[static_cast<std::size_t>(j) * R + r] = Matrix::Zero(n, c);
  }

  for (int f = 0; f < run.num_folds; ++f) {
    const auto& train = run.fold_train_rows[static_cast<std::size_t>(f)];
    std::vector<Eigen::Index> test;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (run.fold_assignment[static_cast<std::size_t>(i)] == f) test.push_back(i);
    }
    Labels y_train;
    for (Eigen::Index r : train) y_train.push_back(snapshot.y[static_cast<std::size_t>(r)]);
    BaseModel bm(rec.spec.algorithm, rec.spec.params, rec.spec.seed, rec.feature_mask);
    bm.fit(take_rows(snapshot.X, train), y_train, c);
    const Matrix X_test = take_rows(snapshot.X, test);
    const Matrix p = bm.predict_proba(X_test);
    for (std::size_t k = 0; k < test.size(); ++k) base.row(test[k]) = p.row(static_cast<Eigen::Index>(k));

    for (Eigen::Index j = 0; j < d; ++j) {
      if (!rec.feature_mask[static_cast<std::size_t>(j)]) continue;
      for (std::size_t r = 0; r < R; ++r) {
        Rng rng(mix_seed(mix_seed(options.seed, static_cast<std::uint64_t>(j)),
                         static_cast<std::uint64_t>(r) * 1000 + static_cast<std::uint64_t>(f)));
        std::vector<Eigen::Index> order(test.size());
        for (std::size_t k = 0; k < order.size(); ++k) order[k] = static_cast<Eigen::Index>(k);
        rng.shuffle(order);
        Matrix Xp = X_test;
        for (std::size_t k = 0; k < order.size(); ++k) {
          Xp(static_cast<Eigen::Index>(k), j) = X_test(order[k], j);
        }
        const Matrix pp = bm.predict_proba(Xp);
        Matrix& dst = permuted[static_cast<std::size_t>(j) * R + r];
        for (std::size_t k = 0; k < test.size(); ++k) dst.row(test[k]) = pp.row(static_cast<Eigen::Index>(k));
      }
    }
  }

  auto score_of = [&](const Matrix& proba) {
    const Labels pred = argmax_rows(proba);
    return weighted_score(compute_metrics(snapshot.y, pred, proba, c, config), config);
  };
  const double base_score = score_of(base);
  Vector drops = Vector::Zero(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    if (!rec.feature_mask[static_cast<std::size_t>(j)]) continue;
    double sum = 0.0;
    for (std::size_t r = 0; r < R; ++r) sum += base_score - score_of(permuted[static_cast<std::size_t>(j) * R + r]);
    drops(j) = std::max(0.0, sum / static_cast<double>(R));
  }
  return min_max_normalize(drops);
}

DropColumnResult accuracy_importance(const DatasetSnapshot& snapshot, const EvaluationRun& run,
                                     ModelId model) {
  const ModelRecord& rec = usable_record(run, snapshot, model);
  const Eigen::Index d = snapshot.num_features();
  const auto used = std::count(rec.feature_mask.begin(), rec.feature_mask.end(), true);
  const double base_acc = rec.metrics.raw_of(Metric::kAccuracy);

  DropColumnResult out{Vector::Zero(d), std::vector<bool>(static_cast<std::size_t>(d), false)};
  for (Eigen::Index j = 0; j < d; ++j) {
    if (!rec.feature_mask[static_cast<std::size_t>(j)]) continue;
    if (used <= 1) {
      out.missing[static_cast<std::size_t>(j)] = true;
      continue;
    }
    FeatureMask reduced = rec.feature_mask;
    reduced[static_cast<std::size_t>(j)] = false;
    const CachedResult cv = cross_validate(snapshot, rec.spec, reduced, run);
    if (cv.failed) {
      out.missing[static_cast<std::size_t>(j)] = true;
      continue;
    }
    const Labels pred = argmax_rows(cv.oof_proba);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == snapshot.y[i] ? 1 : 0;
    const double acc = static_cast<double>(correct) / static_cast<double>(pred.size());
    out.values(j) = std::max(0.0, base_acc - acc);
  }

  // Scale over the cells that exist.
  std::vector<Eigen::Index> present;
  for (Eigen::Index j = 0; j < d; ++j) {
    if (!out.missing[static_cast<std::size_t>(j)]) present.push_back(j);
  }
  Vector sub(static_cast<Eigen::Index>(present.size()));
  for (std::size_t k = 0; k < present.size(); ++k) sub(static_cast<Eigen::Index>(k)) = out.values(present[k]);
  const Vector scaled = min_max_normalize(sub);
  out.values.setZero();
  for (std::size_t k = 0; k < present.size(); ++k) out.values(present[k]) = scaled(static_cast<Eigen::Index>(k));
  return out;
}

namespace {

ImportanceTable empty_table(ImportanceMethod method, const DatasetSnapshot& snapshot,
                            const std::vector<ModelId>& models) {
  ImportanceTable t;
  t.method = method;
  t.snapshot_fingerprint = snapshot.fingerprint();
  t.features = snapshot.feature_names;
  t.models = models;
  t.values = Matrix::Zero(snapshot.num_features(), static_cast<Eigen::Index>(models.size()));
  t.missing.assign(static_cast<std::size_t>(snapshot.num_features()),
                   std::vector<bool>(models.size(), false));
  t.enabled = {method};
  return t;
}

}  // namespace

ImportanceTable univariate_table(const DatasetSnapshot& snapshot,
                                 const std::vector<ModelId>& models) {
  ImportanceTable t = empty_table(ImportanceMethod::kUnivariate, snapshot, models);
  const Vector u = univariate_importance(snapshot);
  for (Eigen::Index m = 0; m < t.values.cols(); ++m) t.values.col(m) = u;
  t.finalize_rows();
  return t;
}

ImportanceTable permutation_table(const DatasetSnapshot& snapshot, const EvaluationRun& run,
                                  const std::vector<ModelId>& models, const MetricConfig& config,
                                  const PermutationOptions& options,
                                  const ImportanceProgress& progress) {
  require_detailed(config);
  ImportanceTable t = empty_table(ImportanceMethod::kPermutation, snapshot, models);
  std::atomic<std::size_t> done{0};
  std::mutex mutex;
  parallel_for(models.size(), 0, [&](std::size_t m) {
    const Vector v = permutation_importance(snapshot, run, models[m], config, options);
    std::lock_guard lock(mutex);
    t.values.col(static_cast<Eigen::Index>(m)) = v;
    if (progress) progress(++done, models.size());
  });
  t.finalize_rows();
  return t;
}

ImportanceTable accuracy_table(const DatasetSnapshot& snapshot, const EvaluationRun& run,
                               const std::vector<ModelId>& models, const MetricConfig& config,
                               const ImportanceProgress& progress) {
  require_detailed(config);
  ImportanceTable t = empty_table(ImportanceMethod::kAccuracy, snapshot, models);
  std::atomic<std::size_t> done{0};
  std::mutex mutex;
  parallel_for(models.size(), 0, [&](std::size_t m) {
    const DropColumnResult r = accuracy_importance(snapshot, run, models[m]);
    std::lock_guard lock(mutex);
    t.values.col(static_cast<Eigen::Index>(m)) = r.values;
    for (std::size_t f = 0; f < r.missing.size(); ++f) t.missing[f][m] = r.missing[f];
    if (progress) progress(++done, models.size());
  });
  t.finalize_rows();
  return t;
}

ImportanceTable combined_importance(const std::vector<const ImportanceTable*>& tables,
                                    const std::set<ImportanceMethod>& enabled) {
  require(!enabled.empty(), "no importance methods enabled");
  std::vector<const ImportanceTable*> use;
  for (ImportanceMethod m : enabled) {
    require(m != ImportanceMethod::kCombined, "combined is not an input method");
    const auto it = std::find_if(tables.begin(), tables.end(),
                                 [&](const ImportanceTable* t) { return t && t->method == m; });
    require(it != tables.end(),
            "importance table '" + std::string(importance_method_id(m)) + "' has not been computed",
            ErrorCode::kNotFound);
    use.push_back(*it);
  }
  const ImportanceTable& first = *use.front();
  for (const ImportanceTable* t : use) {
    require(t->snapshot_fingerprint == first.snapshot_fingerprint && t->models == first.models &&
                t->features == first.features,
            "importance tables come from different snapshots or model sets",
            ErrorCode::kConflict);
  }
  ImportanceTable out;
  out.method = ImportanceMethod::kCombined;
  out.snapshot_fingerprint = first.snapshot_fingerprint;
  out.features = first.features;
  out.models = first.models;
  out.enabled = enabled;
  out.values = Matrix::Zero(first.values.rows(), first.values.cols());
  out.missing.assign(static_cast<std::size_t>(first.values.rows()),
                     std::vector<bool>(static_cast<std::size_t>(first.values.cols()), false));
  for (Eigen::Index f = 0; f < out.values.rows(); ++f) {
    for (Eigen::Index m = 0; m < out.values.cols(); ++m) {
      double sum = 0.0;
      int n = 0;
      for (const ImportanceTable* t : use) {
        if (!t->missing.empty() && t->missing[static_cast<std::size_t>(f)][static_cast<std::size_t>(m)]) continue;
        sum += t->values(f, m);
        ++n;
      }
      if (n == 0) {
        out.missing[static_cast<std::size_t>(f)][static_cast<std::size_t>(m)] = true;
      } else {
        out.values(f, m) = sum / n;
      }
    }
  }
  out.finalize_rows();
  return out;
}

// ---------------------------------------------------------------------------

FeatureMaskSet::FeatureMaskSet(std::size_t num_features) : global_(num_features, true) {}

void FeatureMaskSet::check(const FeatureMask& mask) const {
  require(mask.size() == global_.size(), "feature mask has the wrong length");
}

void FeatureMaskSet::set_global(FeatureMask mask) {
  check(mask);
  require(std::count(mask.begin(), mask.end(), true) >= 1, "global mask keeps no features");
  for (const auto& [id, m] : per_model_) {
    bool any = false;
    for (std::size_t j = 0; j < m.size(); ++j) any |= m[j] && mask[j];
    require(any, "global mask would leave model " + std::to_string(id) + " without features");
  }
  global_ = std::move(mask);
}

void FeatureMaskSet::set_model(ModelId id, FeatureMask mask) {
  check(mask);
  bool any = false;
  for (std::size_t j = 0; j < mask.size(); ++j) any |= mask[j] && global_[j];
  require(any, "mask would leave model " + std::to_string(id) + " without features");
  per_model_[id] = std::move(mask);
}

void FeatureMaskSet::clear_model(ModelId id) { per_model_.erase(id); }

FeatureMask FeatureMaskSet::effective(ModelId id) const {
  FeatureMask out = global_;
  if (const auto it = per_model_.find(id); it != per_model_.end()) {
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = out[j] && it->second[j];
  }
  return out;
}

MaskMap FeatureMaskSet::effective_for(const std::vector<ModelId>& ids) const {
  MaskMap out;
  for (ModelId id : ids) out[id] = effective(id);
  return out;
}

std::uint64_t FeatureMaskSet::hash() const {
  Fnv1a h;
  for (bool b : global_) h.u64(b);
  for (const auto& [id, m] : per_model_) {
    h.u64(static_cast<std::uint64_t>(id));
    for (bool b : m) h.u64(b);
  }
  return h.digest();
}

}  // namespace stackgen
