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


#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "stackgen/importance.hpp"

using namespace stackgen;

namespace {

ModelSpec spec(ModelId id, Algorithm a, Json params) {
  ModelSpec s;
  s.id = id;
  s.algorithm = a;
  s.params = std::move(params);
  s.seed = 3;
  return s;
}

EvaluationRun evaluate(const DatasetSnapshot& s, const std::vector<ModelSpec>& pool,
                       const MaskMap& masks = {}) {
  EvalOptions o;
  o.seed = 42;
  return evaluate_pool(s, pool, MetricConfig{}, masks, o);
}

const std::vector<ModelSpec> kTreeFamily = {
    spec(0, Algorithm::kRf, {{"n_estimators", 30}}),
    spec(1, Algorithm::kExtraT, {{"n_estimators", 30}}),
    spec(2, Algorithm::kAdaB, {{"n_estimators", 30}}),
    spec(3, Algorithm::kGradB, {{"n_estimators", 30}})};

// Textbook one-way ANOVA F, two passes per feature.
double anova_oracle(const DatasetSnapshot& s, Eigen::Index j) {
  const int k = s.num_classes();
  std::vector<double> sum(static_cast<std::size_t>(k), 0), cnt(static_cast<std::size_t>(k), 0);
  double grand = 0;
  for (Eigen::Index i = 0; i < s.num_instances(); ++i) {
    sum[static_cast<std::size_t>(s.y[static_cast<std::size_t>(i)])] += s.X(i, j);
    cnt[static_cast<std::size_t>(s.y[static_cast<std::size_t>(i)])] += 1;
    grand += s.X(i, j);
  }
  grand /= static_cast<double>(s.num_instances());
  double ssb = 0, ssw = 0;
  for (int c = 0; c < k; ++c) {
    const double mu = sum[static_cast<std::size_t>(c)] / cnt[static_cast<std::size_t>(c)];
    ssb += cnt[static_cast<std::size_t>(c)] * (mu - grand) * (mu - grand);
  }
  for (Eigen::Index i = 0; i < s.num_instances(); ++i) {
    const int c = s.y[static_cast<std::size_t>(i)];
    const double mu = sum[static_cast<std::size_t>(c)] / cnt[static_cast<std::size_t>(c)];
    ssw += (s.X(i, j) - mu) * (s.X(i, j) - mu);
  }
  return (ssb / (k - 1)) / (ssw / (static_cast<double>(s.num_instances()) - k));
}

double cv_accuracy(const DatasetSnapshot& s, const EvaluationRun& run, const ModelSpec& m,
                   const FeatureMask& mask) {
  const CachedResult r = cross_validate(s, m, mask, run);
  REQUIRE_FALSE(r.failed);
  const Labels pred = argmax_rows(r.oof_proba);
  double ok = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) ok += pred[i] == s.y[i];
  return ok / static_cast<double>(pred.size());
}

Eigen::Index argmax(const Vector& v) {
  Eigen::Index best;
  v.maxCoeff(&best);
  return best;
}

}  // namespace

TEST_CASE("anova statistic matches the textbook formula") {
  const auto s = stackgen::testing::blobs(90, 3, 4, 1.5, 12);
  const Vector f = anova_f(s);
  for (Eigen::Index j = 0; j < 4; ++j) CHECK(f(j) == doctest::Approx(anova_oracle(s, j)).epsilon(1e-10));
  const auto heart = stackgen::testing::heart();
  const Vector fh = anova_f(heart);
  for (Eigen::Index j = 0; j < heart.num_features(); ++j)
    CHECK(fh(j) == doctest::Approx(anova_oracle(heart, j)).epsilon(1e-10));
}

TEST_CASE("univariate importance") {
  auto s = stackgen::testing::label_copy_fixture(80, 1);
  const Vector u = univariate_importance(s);
  CHECK(u(0) == 1.0);
  CHECK(u(1) < 0.1);
  CHECK(u(3) < 0.1);

  // Without the perfect separator the scale is set by finite statistics.
  const auto b = stackgen::testing::twin_fixture(200, 2);
  const Vector ub = univariate_importance(b);
  CHECK(ub(0) == ub(1));
  CHECK(ub(3) < 0.1);
  CHECK(ub.maxCoeff() == 1.0);

  Matrix X(4, 2);
  X << 1, 0, 1, 1, 1, 2, 1, 3;
  const auto constant = stackgen::testing::make_snapshot(X, {0, 0, 1, 1}, 2);
  CHECK(anova_f(constant)(0) == 0.0);

  const auto table = univariate_table(s, {4, 8, 15});
  for (Eigen::Index m = 1; m < 3; ++m) CHECK(table.values.col(m) == table.values.col(0));
}

TEST_CASE("min-max normalization") {
  Vector v(3);
  v << 2, 4, 3;
  const Vector n = min_max_normalize(v);
  CHECK(n(0) == 0.0);
  CHECK(n(1) == 1.0);
  CHECK(n(2) == 0.5);
  CHECK(min_max_normalize(Vector::Constant(4, 7.0)) == Vector::Zero(4));
}

TEST_CASE("label copy ranks first for tree models under all three methods") {
  const auto s = stackgen::testing::label_copy_fixture(100, 4);
  const auto run = evaluate(s, kTreeFamily);
  const MetricConfig cfg;
  const Vector uni = univariate_importance(s);
  CHECK(argmax(uni) == 0);
  for (const auto& m : kTreeFamily) {
    INFO(algorithm_id(m.algorithm));
    const Vector perm = permutation_importance(s, run, m.id, cfg);
    const auto acc = accuracy_importance(s, run, m.id);
    CHECK(argmax(perm) == 0);
    CHECK(perm(0) == 1.0);
    CHECK(argmax(acc.values) == 0);
    CHECK(acc.values(0) == 1.0);
    // Pure noise stays near the bottom.
    for (Eigen::Index j : {1, 3}) {
      CHECK(perm(j) < 0.1);
      CHECK(acc.values(j) < 0.1);
      CHECK(uni(j) < 0.1);
    }
    for (Eigen::Index j = 0; j < perm.size(); ++j) {
      CHECK(perm(j) >= 0.0);
      CHECK(perm(j) <= 1.0);
    }
  }
}

TEST_CASE("permutation importance verified by direct re-prediction") {
  const auto s = stackgen::testing::label_copy_fixture(60, 5);
  const auto run = evaluate(s, {kTreeFamily[0]});
  // Reproduce the label-copy drop by hand for one fold with one shuffle.
  const auto& train = run.fold_train_rows[0];
  Matrix Xtr(static_cast<Eigen::Index>(train.size()), s.num_features());
  Labels ytr;
  for (std::size_t k = 0; k < train.size(); ++k) {
    Xtr.row(static_cast<Eigen::Index>(k)) = s.X.row(train[k]);
    ytr.push_back(s.y[static_cast<std::size_t>(train[k])]);
  }
  BaseModel bm(Algorithm::kRf, kTreeFamily[0].params, kTreeFamily[0].seed, {true, true, true, true});
  bm.fit(Xtr, ytr, 2);
  std::vector<Eigen::Index> test;
  for (Eigen::Index i = 0; i < s.num_instances(); ++i)
    if (run.fold_assignment[static_cast<std::size_t>(i)] == 0) test.push_back(i);
  Matrix Xte(static_cast<Eigen::Index>(test.size()), s.num_features());
  for (std::size_t k = 0; k < test.size(); ++k) Xte.row(static_cast<Eigen::Index>(k)) = s.X.row(test[k]);
  // Flip the label copy column: the trees' best split now points the wrong way.
  Matrix flipped = Xte;
  flipped.col(0) = (1.0 - Xte.col(0).array()).matrix();
  const Labels base = argmax_rows(bm.predict_proba(Xte));
  const Labels after = argmax_rows(bm.predict_proba(flipped));
  double base_ok = 0, after_ok = 0;
  for (std::size_t k = 0; k < test.size(); ++k) {
    base_ok += base[k] == s.y[static_cast<std::size_t>(test[k])];
    after_ok += after[k] == s.y[static_cast<std::size_t>(test[k])];
  }
  CHECK(base_ok / static_cast<double>(test.size()) == 1.0);
  CHECK(after_ok < base_ok);
}

TEST_CASE("permutation importance of masked-out features is exactly zero") {
  const auto s = stackgen::testing::label_copy_fixture(80, 6);
  const FeatureMask mask{false, true, true, false};
  const std::vector<ModelSpec> pool = {spec(0, Algorithm::kRf, {{"n_estimators", 20}}),
                                       spec(1, Algorithm::kKnn, {{"n_neighbors", 5}}),
                                       spec(2, Algorithm::kLr, Json::object())};
  const auto run = evaluate(s, pool, {{0, mask}, {1, mask}, {2, mask}});
  for (const auto& m : pool) {
    const Vector perm = permutation_importance(s, run, m.id, MetricConfig{});
    CHECK(perm(0) == 0.0);
    CHECK(perm(3) == 0.0);
    const auto acc = accuracy_importance(s, run, m.id);
    CHECK(acc.values(0) == 0.0);
    CHECK(acc.values(3) == 0.0);
  }
}

TEST_CASE("permutation importance is reproducible") {
  const auto s = stackgen::testing::twin_fixture(80, 7);
  const auto run = evaluate(s, {spec(0, Algorithm::kKnn, {{"n_neighbors", 7}})});
  const Vector a = permutation_importance(s, run, 0, MetricConfig{});
  const Vector b = permutation_importance(s, run, 0, MetricConfig{});
  CHECK(a == b);
  PermutationOptions other;
  other.seed = 99;
  CHECK(permutation_importance(s, run, 0, MetricConfig{}, other).size() == a.size());
}

TEST_CASE("duplicated informative columns compensate each other under drop-column") {
  const auto s = stackgen::testing::twin_fixture(300, 8);
  const std::vector<ModelSpec> pool = {spec(0, Algorithm::kLr, Json::object()),
                                       spec(1, Algorithm::kRf, {{"n_estimators", 60}, {"max_depth", 3}}),
                                       spec(2, Algorithm::kGradB, {{"n_estimators", 30}, {"max_depth", 1}})};
  const auto run = evaluate(s, pool);
  for (const auto& m : pool) {
    INFO(algorithm_id(m.algorithm));
    const auto acc = accuracy_importance(s, run, m.id);
    const double full = cv_accuracy(s, run, m, {true, true, true, true});
    const double no_a = cv_accuracy(s, run, m, {false, true, true, true});
    const double no_b = cv_accuracy(s, run, m, {true, false, true, true});
    const double no_twins = cv_accuracy(s, run, m, {false, false, true, true});
    const double no_other = cv_accuracy(s, run, m, {true, true, false, true});
    // Oracle: each twin's removal barely moves accuracy, while losing the
    // signal they share costs clearly more.
    CHECK(full - no_a <= 0.02);
    CHECK(full - no_b <= 0.02);
    CHECK(full - no_twins > 0.02);
    CHECK(full - no_other > 0.02);
    // Library cells agree with the oracle drops.
    CHECK(acc.values(2) == 1.0);
    CHECK(acc.values(0) < 0.25);
    CHECK(acc.values(1) < 0.25);
    CHECK(acc.values(3) < 0.25);
  }
}

TEST_CASE("drop-column on a single-feature model is missing") {
  const auto s = stackgen::testing::label_copy_fixture(50, 9);
  const auto run = evaluate(s, {spec(0, Algorithm::kLr, Json::object())},
                            {{0, {false, false, true, false}}});
  const auto acc = accuracy_importance(s, run, 0);
  CHECK(acc.missing[2]);
  CHECK_FALSE(acc.missing[0]);
  CHECK(acc.values(2) == 0.0);

  const auto table = accuracy_table(s, run, {0}, MetricConfig{});
  CHECK(table.missing[2][0]);
}

TEST_CASE("expensive methods need detailed feature search") {
  const auto s = stackgen::testing::label_copy_fixture(50, 10);
  const auto run = evaluate(s, {spec(0, Algorithm::kLr, Json::object())});
  MetricConfig cfg;
  cfg.detailed_feature_search = false;
  for (auto call : {0, 1}) {
    try {
      if (call == 0) {
        permutation_table(s, run, {0}, cfg);
      } else {
        accuracy_table(s, run, {0}, cfg);
      }
      FAIL("expected the method to be unavailable");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kUnavailable);
    }
  }
  CHECK_NOTHROW(univariate_table(s, {0}));
}

TEST_CASE("combined importance is the cell-wise mean of enabled methods") {
  ImportanceTable a, b, c;
  for (auto* t : {&a, &b, &c}) {
    t->features = {"x", "y"};
    t->models = {0};
    t->values = Matrix::Zero(2, 1);
    t->missing.assign(2, std::vector<bool>(1, false));
    t->snapshot_fingerprint = 5;
  }
  a.method = ImportanceMethod::kUnivariate;
  b.method = ImportanceMethod::kPermutation;
  c.method = ImportanceMethod::kAccuracy;
  a.values << 0.2, 1.0;
  b.values << 0.4, 0.0;
  c.values << 0.9, 0.5;
  c.missing[1][0] = true;
  for (auto* t : {&a, &b, &c}) t->finalize_rows();

  const auto all = combined_importance({&a, &b, &c}, {ImportanceMethod::kUnivariate,
                                                      ImportanceMethod::kPermutation,
                                                      ImportanceMethod::kAccuracy});
  CHECK(all.method == ImportanceMethod::kCombined);
  CHECK(all.values(0, 0) == doctest::Approx(0.5));
  CHECK(all.values(1, 0) == doctest::Approx(0.5));  // missing accuracy cell skipped
  CHECK(all.row_average[0] == doctest::Approx(0.5));

  const auto only = combined_importance({&a, &b, &c}, {ImportanceMethod::kPermutation});
  CHECK(only.values == b.values);
  CHECK_THROWS_AS(combined_importance({&a}, {ImportanceMethod::kAccuracy}), Error);
  CHECK_THROWS_AS(combined_importance({&a}, {}), Error);
  b.snapshot_fingerprint = 6;
  CHECK_THROWS_AS(combined_importance({&a, &b}, {ImportanceMethod::kUnivariate,
                                                 ImportanceMethod::kPermutation}),
                  Error);
}

TEST_CASE("feature masks combine global and per-model masks") {
  FeatureMaskSet m(3);
  m.set_global({true, true, false});
  m.set_model(7, {false, true, true});
  CHECK(m.effective(7) == FeatureMask{false, true, false});
  CHECK(m.effective(8) == FeatureMask{true, true, false});
  const auto h = m.hash();
  CHECK_THROWS_AS(m.set_model(7, {false, false, true}), Error);  // empty effective mask
  CHECK_THROWS_AS(m.set_global({false, false, false}), Error);
  CHECK_THROWS_AS(m.set_model(1, {true}), Error);
  CHECK(m.hash() == h);
  m.clear_model(7);
  CHECK(m.effective(7) == FeatureMask{true, true, false});
  CHECK(m.hash() != h);
}
