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
#include <cstring>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "stackgen/projections.hpp"

using namespace stackgen;

namespace {

double dist2d(const Matrix& c, Eigen::Index i, Eigen::Index j) { return (c.row(i) - c.row(j)).norm(); }

bool same_bytes(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

EvaluationRun toy_run(const std::vector<PerMetric<double>>& normalized) {
  EvaluationRun run;
  for (std::size_t k = 0; k < normalized.size(); ++k) {
    ModelRecord r;
    r.spec.id = static_cast<ModelId>(k);
    r.metrics.normalized = normalized[k];
    r.metrics.raw = normalized[k];
    run.records[r.spec.id] = r;
  }
  return run;
}

EvaluationRun evaluated(const DatasetSnapshot& s) {
  std::vector<ModelSpec> pool;
  for (int k : {1, 3, 7, 15}) {
    ModelSpec m;
    m.id = static_cast<ModelId>(pool.size());
    m.algorithm = Algorithm::kKnn;
    m.params = {{"n_neighbors", k}};
    pool.push_back(m);
  }
  for (Algorithm a : {Algorithm::kLr, Algorithm::kGauNb, Algorithm::kLda}) {
    ModelSpec m;
    m.id = static_cast<ModelId>(pool.size());
    m.algorithm = a;
    pool.push_back(m);
  }
  EvalOptions o;
  return evaluate_pool(s, pool, MetricConfig{}, {}, o);
}

}  // namespace

TEST_CASE("classical mds reconstructs small planar configurations") {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const int m = 2 + static_cast<int>(rng.below(5));  // 2..6 points
    Matrix P(m, 2);
    for (Eigen::Index i = 0; i < P.size(); ++i) P.data()[i] = rng.uniform(-5, 5);
    const Matrix D = pairwise_euclidean(P);
    const Matrix C = classical_mds(D, 2);
    REQUIRE(C.rows() == m);
    REQUIRE(C.cols() == 2);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) CHECK(dist2d(C, i, j) == doctest::Approx(D(i, j)).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("mds places duplicate rows together") {
  Matrix X(5, 3);
  X << 1, 2, 3, 1, 2, 3, 4, 0, 1, -2, 5, 2, 0, 0, 0;
  const Matrix C = classical_mds(pairwise_euclidean(X), 2);
  CHECK(dist2d(C, 0, 1) < 1e-6);
}

TEST_CASE("hamming fraction is a metric") {
  Rng rng(2);
  Eigen::MatrixXi codes(40, 6);
  for (Eigen::Index i = 0; i < codes.size(); ++i) codes.data()[i] = static_cast<int>(rng.below(3));
  codes.row(7) = codes.row(3);
  const Matrix D = pairwise_hamming(codes);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto a = static_cast<Eigen::Index>(rng.below(40));
    const auto b = static_cast<Eigen::Index>(rng.below(40));
    const auto c = static_cast<Eigen::Index>(rng.below(40));
    CHECK(D(a, b) == D(b, a));
    CHECK((D(a, b) == 0.0) == (codes.row(a) == codes.row(b)));
    CHECK(D(a, c) <= D(a, b) + D(b, c) + 1e-15);
    CHECK(D(a, b) >= 0.0);
    CHECK(D(a, b) <= 1.0);
  }
  CHECK(D(3, 7) == 0.0);
  Eigen::MatrixXi four(2, 4);
  four << 0, 1, 1, 0, 0, 1, 0, 0;
  CHECK(pairwise_hamming(four)(0, 1) == 0.25);
}

TEST_CASE("data space separates far-apart blobs") {
  // Centers 8 units apart along every axis, unit spread.
  Rng rng(3);
  Matrix X(60, 4);
  Labels y(60);
  for (int i = 0; i < 60; ++i) {
    y[static_cast<std::size_t>(i)] = i % 2;
    for (int j = 0; j < 4; ++j) X(i, j) = rng.normal() + 8.0 * (i % 2);
  }
  const auto s = stackgen::testing::make_snapshot(X, y, 2);
  const std::vector<double> difficulty(60, 0.0);
  for (ProjectionMethod method : {ProjectionMethod::kMds, ProjectionMethod::kTsne, ProjectionMethod::kUmap}) {
    INFO(projection_method_id(method));
    const auto r = project_data_space(s, method, difficulty, 7);
    CHECK(r.method == method);
    REQUIRE(r.coords.rows() == 60);
    CHECK(r.coords.allFinite());
    REQUIRE(r.point_class.has_value());
    CHECK(*r.point_class == s.y);
    double within = 0;
    int nwithin = 0;
    for (int i = 0; i < 60; ++i)
      for (int j = i + 1; j < 60; ++j)
        if (s.y[static_cast<std::size_t>(i)] == s.y[static_cast<std::size_t>(j)]) within += dist2d(r.coords, i, j), ++nwithin;
    within /= nwithin;
    int cross = 0, far = 0;
    for (int i = 0; i < 60; ++i)
      for (int j = i + 1; j < 60; ++j)
        if (s.y[static_cast<std::size_t>(i)] != s.y[static_cast<std::size_t>(j)]) {
          ++cross;
          far += dist2d(r.coords, i, j) > within;
        }
    CHECK(static_cast<double>(far) / cross >= 0.95);

    const auto again = project_data_space(s, method, difficulty, 7);
    CHECK(same_bytes(again.coords, r.coords));
  }
}

TEST_CASE("iterative methods fall back to mds on tiny inputs") {
  Matrix X(3, 2);
  X << 0, 0, 1, 0, 0, 1;
  const auto s = stackgen::testing::make_snapshot(X, {0, 1, 1}, 2);
  for (ProjectionMethod method : {ProjectionMethod::kTsne, ProjectionMethod::kUmap}) {
    const auto r = project_data_space(s, method, {0.0, 0.5, 1.0}, 1);
    CHECK(r.method == ProjectionMethod::kMds);
    CHECK_FALSE(r.notices.empty());
    CHECK(r.point_scalar == std::vector<double>{0.0, 0.5, 1.0});
  }
}

TEST_CASE("model space recoloring leaves coordinates byte identical") {
  const auto s = stackgen::testing::blobs(60, 2, 2, 1.2, 4);
  const auto run = evaluated(s);
  const auto ids = run.ids();
  MetricConfig cfg;
  cfg.beta = 2.0;
  for (ProjectionMethod method : {ProjectionMethod::kMds, ProjectionMethod::kTsne}) {
    const auto f2 = project_model_space(run, ids, Metric::kFBeta, cfg, method, 5);
    const auto mcc = project_model_space(run, ids, Metric::kMcc, cfg, method, 5);
    const auto combined = project_model_space(run, ids, std::nullopt, cfg, method, 5);
    CHECK(same_bytes(f2.projection.coords, mcc.projection.coords));
    CHECK(same_bytes(f2.projection.coords, combined.projection.coords));
    CHECK(f2.projection.point_scalar != mcc.projection.point_scalar);
    CHECK(f2.projection.scalar_semantic == "fbeta");
    CHECK(combined.projection.scalar_semantic == "combined");
    for (std::size_t k = 0; k < ids.size(); ++k) {
      CHECK(mcc.projection.point_scalar[k] == run.record(ids[k]).metrics.normalized_of(Metric::kMcc));
      CHECK(combined.projection.point_scalar[k] >= 0.0);
      CHECK(combined.projection.point_scalar[k] <= 1.0);
    }
    CHECK(f2.metric_boxes[static_cast<std::size_t>(Metric::kAccuracy)].count == ids.size());
  }
  CHECK_THROWS_AS(project_model_space(run, {ids[0]}, std::nullopt, cfg, ProjectionMethod::kMds, 5),
                  Error);
}

TEST_CASE("model space vectors are weighted normalized metrics") {
  // Three toy models; only accuracy and mcc carry weight.
  PerMetric<double> a{}, b{}, c{};
  a[0] = 0.9, a[5] = 0.8, a[7] = 0.1;
  b[0] = 0.6, b[5] = 0.8, b[7] = 0.9;
  c[0] = 0.6, c[5] = 0.4, c[7] = 0.5;
  const auto run = toy_run({a, b, c});
  MetricConfig cfg;
  cfg.weights.fill(0);
  cfg.weights[0] = 50;
  cfg.weights[5] = 100;
  const Matrix V = model_space_vectors(run, {0, 1, 2}, cfg);
  CHECK(V(0, 0) == doctest::Approx(0.45));
  CHECK(V(0, 5) == doctest::Approx(0.8));
  CHECK(V(0, 7) == 0.0);  // zero weight, zero dimension

  // Hand distances: d(a,b) = 0.15, d(b,c) = 0.4, d(a,c) = sqrt(0.15^2 + 0.4^2).
  auto check_embedding = [&](const MetricConfig& config, double ab, double bc, double ac) {
    const auto r = project_model_space(run, {0, 1, 2}, std::nullopt, config, ProjectionMethod::kMds, 1);
    CHECK(dist2d(r.projection.coords, 0, 1) == doctest::Approx(ab).epsilon(1e-9));
    CHECK(dist2d(r.projection.coords, 1, 2) == doctest::Approx(bc).epsilon(1e-9));
    CHECK(dist2d(r.projection.coords, 0, 2) == doctest::Approx(ac).epsilon(1e-9));
  };
  check_embedding(cfg, 0.15, 0.4, std::hypot(0.15, 0.4));
  cfg.weights[0] = 100;  // doubling accuracy's weight doubles its axis
  check_embedding(cfg, 0.3, 0.4, std::hypot(0.3, 0.4));
}

TEST_CASE("prediction space") {
  const auto s = stackgen::testing::blobs(40, 2, 2, 1.0, 5);
  EvaluationRun run;
  run.snapshot_fingerprint = s.fingerprint();
  // Four unanimous models.
  for (ModelId id = 0; id < 4; ++id) {
    ModelRecord r;
    r.spec.id = id;
    r.oof_pred = Labels(40);
    for (int i = 0; i < 40; ++i) r.oof_pred[static_cast<std::size_t>(i)] = (i * 7 % 5) < 2 ? 0 : 1;
    run.records[id] = r;
  }
  const auto r = project_prediction_space(s, run, {0, 1, 2, 3}, ProjectionMethod::kMds, 1);
  std::set<std::pair<long, long>> spots;
  for (Eigen::Index i = 0; i < r.coords.rows(); ++i)
    spots.insert({std::lround(r.coords(i, 0) * 1e6), std::lround(r.coords(i, 1) * 1e6)});
  CHECK(spots.size() <= 2);
  REQUIRE(r.point_scalar.size() == 40);
  for (double d : r.point_scalar) {
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
  }
  CHECK_THROWS_AS(project_prediction_space(s, run, {}, ProjectionMethod::kMds, 1), Error);
}

TEST_CASE("score histograms") {
  CHECK(score_bin(0.87) == 17);
  CHECK(score_bin(0.85) == 17);
  CHECK(score_bin(0.0) == 0);
  CHECK(score_bin(1.0) == 19);
  CHECK(score_bin(0.8999999) == 17);

  const auto s = stackgen::testing::blobs(60, 2, 2, 1.5, 6);
  const auto run = evaluated(s);
  const auto ids = run.ids();
  IndexSet all;
  for (Eigen::Index i = 0; i < 60; ++i) all.insert(i);
  const auto h = model_score_histograms(s, run, ids, all, MetricConfig{});
  CHECK(h.selected == h.all);
  CHECK(h.selected_scores == h.all_scores);
  int total = 0;
  for (int c : h.all) total += c;
  CHECK(total == static_cast<int>(ids.size()));

  // A single-class subset degrades gracefully.
  IndexSet one_class;
  for (Eigen::Index i = 0; i < 60; i += 2) one_class.insert(i);
  const auto h2 = model_score_histograms(s, run, ids, one_class, MetricConfig{});
  int sel = 0;
  for (int c : h2.selected) sel += c;
  CHECK(sel == static_cast<int>(ids.size()));
  for (std::size_t k = 0; k < ids.size(); ++k) {
    CHECK(h2.all_scores[k] == doctest::Approx(run.record(ids[k]).combined));
  }
}
