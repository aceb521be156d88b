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


#include <cmath>
#include <set>

#include "doctest.h"
#include "metric_oracle.hpp"
#include "stackgen/metrics.hpp"

using namespace stackgen;
using stackgen::testing::Case;
using stackgen::testing::Oracle;
using stackgen::testing::random_case;

TEST_CASE("binary worked example") {
  const std::vector<int> t{1, 1, 0, 0}, p{1, 0, 0, 0};
  MetricConfig cfg;
  cfg.beta = 2.0;
  const auto v = compute_label_metrics(t, p, 2, cfg);
  CHECK(v.per_class[1].precision == doctest::Approx(1.0));
  CHECK(v.per_class[1].recall == doctest::Approx(0.5));
  CHECK(v.per_class[1].fbeta == doctest::Approx(0.5556).epsilon(1e-4));
  CHECK(v.raw_of(Metric::kAccuracy) == doctest::Approx(0.75));
  CHECK(v.raw_of(Metric::kGMean) == doctest::Approx(0.7071).epsilon(1e-4));
  CHECK(v.raw_of(Metric::kMcc) == doctest::Approx(0.5774).epsilon(1e-4));
}

TEST_CASE("perfect classifier") {
  const std::vector<int> y{0, 1, 2, 1, 0};
  Matrix proba = Matrix::Zero(5, 3);
  for (int i = 0; i < 5; ++i) proba(i, y[static_cast<std::size_t>(i)]) = 1.0;
  const auto v = compute_metrics(y, y, proba, 3, MetricConfig{});
  for (Metric m : kAllMetrics) {
    if (m == Metric::kLogLoss) continue;
    CHECK_MESSAGE(v.raw_of(m) == doctest::Approx(1.0), metric_id(m));
  }
  CHECK(v.raw_of(Metric::kLogLoss) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(v.normalized_of(Metric::kLogLoss) == doctest::Approx(1.0));
}

TEST_CASE("uniform probabilities give log loss ln C") {
  for (int k = 2; k <= 5; ++k) {
    std::vector<int> y;
    for (int i = 0; i < 10; ++i) y.push_back(i % k);
    const Matrix proba = Matrix::Constant(10, k, 1.0 / k);
    const auto v = compute_metrics(y, y, proba, k, MetricConfig{});
    CHECK(v.raw_of(Metric::kLogLoss) == doctest::Approx(std::log(k)).epsilon(1e-12));
  }
}

TEST_CASE("all eight metrics match the brute-force oracle") {
  Rng rng(2024);
  int checked = 0;
  for (int trial = 0; trial < 1500; ++trial) {
    const Case c = random_case(rng);
    const Oracle o{c.t, c.p, c.proba, c.k};
    for (Averaging mode : {Averaging::kMicro, Averaging::kMacro, Averaging::kWeighted}) {
      for (double beta : {0.5, 1.0, 2.0}) {
        MetricConfig cfg;
        cfg.precision_avg = cfg.recall_avg = cfg.fbeta_avg = cfg.roc_auc_avg = mode;
        cfg.beta = beta;
        const auto v = compute_metrics(c.t, c.p, c.proba, c.k, cfg);
        const std::string where = "trial " + std::to_string(trial) + " mode " +
                                  std::string(averaging_id(mode));
        INFO(where);
        CHECK(v.raw_of(Metric::kAccuracy) == doctest::Approx(o.accuracy()).epsilon(1e-9));
        CHECK(v.raw_of(Metric::kGMean) == doctest::Approx(o.gmean()).epsilon(1e-9));
        CHECK(v.raw_of(Metric::kPrecision) == doctest::Approx(o.precision(mode)).epsilon(1e-9));
        CHECK(v.raw_of(Metric::kRecall) == doctest::Approx(o.recall(mode)).epsilon(1e-9));
        CHECK(v.raw_of(Metric::kFBeta) == doctest::Approx(o.fbeta(mode, beta)).epsilon(1e-9));
        CHECK(v.raw_of(Metric::kMcc) == doctest::Approx(o.mcc()).epsilon(1e-9));
        CHECK(v.raw_of(Metric::kRocAuc) == doctest::Approx(o.roc_auc(mode)).epsilon(1e-9));
        CHECK(v.raw_of(Metric::kLogLoss) == doctest::Approx(o.log_loss()).epsilon(1e-9));
        for (Metric m : kAllMetrics) {
          CHECK(v.normalized_of(m) >= 0.0);
          CHECK(v.normalized_of(m) <= 1.0);
        }
        // g-mean never exceeds the arithmetic mean of the per-class recalls.
        double mean_rec = 0;
        int present = 0;
        for (int k = 0; k < c.k; ++k) {
          if (o.support(k) == 0) continue;
          mean_rec += o.rec(k);
          ++present;
        }
        CHECK(v.raw_of(Metric::kGMean) <= mean_rec / present + 1e-12);
        ++checked;
      }
    }
  }
  CHECK(checked >= 1000);
}

TEST_CASE("normalization transforms") {
  CHECK(normalize_metric(Metric::kMcc, -1.0) == 0.0);
  CHECK(normalize_metric(Metric::kMcc, 1.0) == 1.0);
  CHECK(normalize_metric(Metric::kLogLoss, 0.0) == 1.0);
  CHECK(normalize_metric(Metric::kLogLoss, 1.0) == 0.5);
  CHECK(normalize_metric(Metric::kAccuracy, 0.42) == 0.42);
}

TEST_CASE("g-mean is zero when a class is never recalled") {
  const std::vector<int> t{0, 0, 1, 1, 2}, p{0, 0, 1, 1, 0};
  const auto v = compute_label_metrics(t, p, 3, MetricConfig{});
  CHECK(v.raw_of(Metric::kGMean) == 0.0);
}

TEST_CASE("input validation") {
  const std::vector<int> a{0, 1}, b{0};
  CHECK_THROWS_AS(compute_label_metrics(a, b, 2, MetricConfig{}), Error);
  CHECK_THROWS_AS(compute_label_metrics(std::vector<int>{}, std::vector<int>{}, 2, MetricConfig{}),
                  Error);
  Matrix bad(2, 2);
  bad << 0.5, 0.6, 0.5, 0.5;
  CHECK_THROWS_AS(compute_metrics(a, a, bad, 2, MetricConfig{}), Error);
  // A class absent from y_true under weighted averaging is defined, not an error.
  MetricConfig w;
  w.precision_avg = w.recall_avg = w.fbeta_avg = w.roc_auc_avg = Averaging::kWeighted;
  Matrix ok(2, 3);
  ok << 0.7, 0.2, 0.1, 0.1, 0.8, 0.1;
  CHECK_NOTHROW(compute_metrics(a, std::vector<int>{0, 2}, ok, 3, w));
}

TEST_CASE("weighted score examples") {
  MetricVector v;
  at(v.normalized, Metric::kAccuracy) = 0.83;
  MetricConfig cfg;
  cfg.weights.fill(0);
  at(cfg.weights, Metric::kAccuracy) = 100;
  CHECK(weighted_score(v, cfg) == doctest::Approx(0.83));

  cfg.weights.fill(0);
  at(cfg.weights, Metric::kAccuracy) = 50;
  at(cfg.weights, Metric::kMcc) = 50;
  at(v.normalized, Metric::kMcc) = 0.8;
  at(v.normalized, Metric::kAccuracy) = 0.6;
  CHECK(weighted_score(v, cfg) == doctest::Approx(0.7));

  v.normalized.fill(1.0);
  cfg.weights = {5, 10, 0, 100, 35, 0, 60, 80};
  CHECK(weighted_score(v, cfg) == doctest::Approx(1.0));

  cfg.weights.fill(0);
  try {
    weighted_score(v, cfg);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNoActiveMetrics);
  }
}

TEST_CASE("weighted score properties over a weight grid") {
  Rng rng(11);
  const std::array<double, 3> levels{0, 50, 100};
  PerMetric<double> norm;
  for (double& x : norm) x = rng.uniform();
  std::size_t combos = 0;
  for (int code = 1; code < 6561; ++code) {
    PerMetric<double> w;
    int rest = code;
    for (std::size_t m = 0; m < kNumMetrics; ++m) {
      w[m] = levels[static_cast<std::size_t>(rest % 3)];
      rest /= 3;
    }
    const double base = weighted_score(norm, w);
    CHECK(base >= 0.0);
    CHECK(base <= 1.0);
    for (double c : {0.05, 0.37, 2.0, 17.5}) {
      PerMetric<double> scaled = w;
      for (double& x : scaled) x *= c;
      CHECK(weighted_score(norm, scaled) == doctest::Approx(base).epsilon(1e-12));
    }
    for (std::size_t m = 0; m < kNumMetrics; ++m) {
      if (w[m] <= 0) continue;
      PerMetric<double> up = norm;
      up[m] = std::min(1.0, up[m] + 0.1);
      CHECK(weighted_score(up, w) >= base);
    }
    ++combos;
  }
  CHECK(combos == 6560);

  // Single active weight passes its metric straight through.
  for (std::size_t m = 0; m < kNumMetrics; ++m) {
    for (double level = 5; level <= 100; level += 5) {
      PerMetric<double> w{};
      w[m] = level;
      CHECK(weighted_score(norm, w) == doctest::Approx(norm[m]).epsilon(1e-15));
    }
  }
}

TEST_CASE("api weight validation") {
  MetricConfig cfg;
  CHECK_NOTHROW(cfg.validate_api());
  at(cfg.weights, Metric::kPrecision) = 82;
  CHECK_THROWS_AS(cfg.validate_api(), Error);
  at(cfg.weights, Metric::kPrecision) = 105;
  CHECK_THROWS_AS(cfg.validate_api(), Error);
  at(cfg.weights, Metric::kPrecision) = 80;
  cfg.beta = 3;
  CHECK_THROWS_AS(cfg.validate_api(), Error);
}

TEST_CASE("roc auc handles ties with mid ranks") {
  const std::vector<double> s{0.5, 0.5, 0.5, 0.5};
  const std::vector<int> pos{1, 0, 1, 0};
  CHECK(roc_auc_binary(s, pos) == doctest::Approx(0.5));
  const std::vector<double> s2{0.1, 0.4, 0.35, 0.8};
  const std::vector<int> pos2{0, 0, 1, 1};
  CHECK(roc_auc_binary(s2, pos2) == doctest::Approx(0.75));
}
