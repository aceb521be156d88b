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


// Acceptance run: one PASS/FAIL line per criterion. The heart-disease
// workflow is replayed twice through the command-line tool with fresh
// caches; everything else runs in-process.

#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <sstream>

#include "CLI11.hpp"
#include "fixtures.hpp"
#include "metric_oracle.hpp"
#include "stackgen/history.hpp"
#include "stackgen/importance.hpp"
#include "stackgen/projections.hpp"
#include "stackgen/session.hpp"
#include "stackgen/stacker.hpp"
#include "stackgen/wrangler.hpp"

using namespace stackgen;
namespace fs = std::filesystem;
namespace t = stackgen::testing;

namespace {

// Collects failed expectations for one criterion.
class Tally {
 public:
  void expect(bool ok, const std::string& what) {
    ++checks_;
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    failed_ += ok ? 0 : 1;
  }
  void note(const std::string& s) { notes_.push_back(s); }
  bool ok() const { return failed_ == 0; }
  std::string detail() const {
    std::string out = std::to_string(checks_ - failed_) + "/" + std::to_string(checks_) + " checks";
    for (const auto& n : notes_) out += "; " + n;
    for (const auto& f : failures_) out += "; FAILED " + f;
    return out;
  }

 private:
  std::size_t checks_ = 0;
  std::size_t failed_ = 0;
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

ModelSpec spec(ModelId id, Algorithm a, Json params, std::uint64_t seed = 3) {
  ModelSpec s;
  s.id = id;
  s.algorithm = a;
  s.params = std::move(params);
  s.seed = seed;
  return s;
}

EvaluationRun evaluate(const DatasetSnapshot& s, const std::vector<ModelSpec>& pool,
                       const MaskMap& masks = {}) {
  EvalOptions o;
  o.seed = 42;
  return evaluate_pool(s, pool, MetricConfig{}, masks, o);
}

bool same_bytes(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

// ---- heart workflow through the CLI ----

struct HeartRun {
  bool ok = false;
  double seconds = 0.0;
  std::string table;
  Json doc;
  std::string error;
};

HeartRun run_heart(const fs::path& work, const std::string& tag) {
  HeartRun r;
  const fs::path json = work / (tag + ".json");
  const fs::path log = work / (tag + ".log");
  fs::remove(json);
  const std::string cmd = std::string("'") + STACKGEN_CLI + "' run-workflow '" +
                          t::data_path("heart_usecase.json") + "' --json-out '" + json.string() +
                          "' 2>'" + log.string() + "'";
  const auto start = std::chrono::steady_clock::now();
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) {
    r.error = "could not start the CLI";
    return r;
  }
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.table.append(buf.data(), n);
  const int st = pclose(p);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!WIFEXITED(st) || WEXITSTATUS(st) != 0) {
    r.error = "CLI exited with status " + std::to_string(st) + ", see " + log.string();
    return r;
  }
  write_file((work / (tag + ".txt")).string(), r.table);
  r.doc = Json::parse(read_file(json.string()));
  r.ok = true;
  return r;
}

const Json* find_stack(const Json& doc, const std::string& id) {
  for (const auto& s : doc.at("stacks")) {
    if (s.at("stack_id") == id) return &s;
  }
  return nullptr;
}

Tally heart_end_to_end(const HeartRun& run) {
  Tally tl;
  tl.expect(run.ok, "workflow run: " + run.error);
  if (!run.ok) return tl;
  const Json* s6 = find_stack(run.doc, "S6");
  tl.expect(s6 != nullptr, "S6 stored");
  if (!s6) return tl;
  const double acc = s6->at("performance").at("accuracy").get<double>();
  tl.note("S6 accuracy " + fmt("%.4f", acc) + " (need >= 0.85)");
  tl.note("wall " + fmt("%.0f", run.seconds) + " s (need < 600)");
  tl.expect(acc >= 0.85, "final metamodel accuracy >= 0.85");
  tl.expect(run.seconds < 600.0, "end-to-end under 10 minutes");
  tl.expect(s6->at("model_count") == 174, "S6 has 174 models");
  return tl;
}

Tally determinism(const HeartRun& a, const HeartRun& b) {
  Tally tl;
  tl.expect(a.ok && b.ok, "both runs completed");
  if (!a.ok || !b.ok) return tl;
  // JSON numbers round-trip doubles exactly, so equality here is bitwise.
  tl.expect(a.doc.at("stacks").size() == b.doc.at("stacks").size(), "same number of stacks");
  for (std::size_t i = 0; i < std::min(a.doc.at("stacks").size(), b.doc.at("stacks").size()); ++i) {
    const Json& x = a.doc.at("stacks")[i];
    const Json& y = b.doc.at("stacks")[i];
    for (const char* k : {"accuracy", "precision", "recall", "f1"}) {
      const double u = x.at("performance").at(k).get<double>();
      const double v = y.at("performance").at(k).get<double>();
      tl.expect(std::memcmp(&u, &v, sizeof u) == 0, x.at("stack_id").get<std::string>() + " " + k);
    }
    tl.expect(x == y, x.at("stack_id").get<std::string>() + " record identical");
  }
  tl.expect(a.doc.at("rows") == b.doc.at("rows"), "step rows identical");
  tl.expect(a.table == b.table, "printed tables identical");
  tl.note(std::to_string(a.doc.at("stacks").size()) + " stored stacks compared");
  return tl;
}

// ---- in-process criteria ----

Tally metric_oracle() {
  Tally tl;
  Rng rng(20240);
  double worst = 0.0;
  int instances = 0;
  for (int trial = 0; trial < 1200; ++trial) {
    const t::Case c = t::random_case(rng);
    const t::Oracle o{c.t, c.p, c.proba, c.k};
    ++instances;
    for (Averaging mode : {Averaging::kMicro, Averaging::kMacro, Averaging::kWeighted}) {
      for (double beta : {0.5, 1.0, 2.0}) {
        MetricConfig cfg;
        cfg.precision_avg = cfg.recall_avg = cfg.fbeta_avg = cfg.roc_auc_avg = mode;
        cfg.beta = beta;
        const auto v = compute_metrics(c.t, c.p, c.proba, c.k, cfg);
        const std::array<std::pair<Metric, double>, 8> expected{{
            {Metric::kAccuracy, o.accuracy()},
            {Metric::kGMean, o.gmean()},
            {Metric::kPrecision, o.precision(mode)},
            {Metric::kRecall, o.recall(mode)},
            {Metric::kFBeta, o.fbeta(mode, beta)},
            {Metric::kMcc, o.mcc()},
            {Metric::kRocAuc, o.roc_auc(mode)},
            {Metric::kLogLoss, o.log_loss()},
        }};
        for (const auto& [m, want] : expected) {
          const double err = std::abs(v.raw_of(m) - want);
          worst = std::max(worst, err);
          tl.expect(err <= 1e-9, "trial " + std::to_string(trial) + " " + std::string(metric_id(m)) +
                                     " " + std::string(averaging_id(mode)));
        }
      }
    }
  }
  tl.expect(instances >= 1000, "at least 1000 instances");
  tl.note(std::to_string(instances) + " instances x 3 averaging modes x 3 betas, max |err| " +
          fmt("%.2e", worst));
  return tl;
}

Tally weighted_score_properties() {
  Tally tl;
  Rng rng(17);
  const std::array<double, 3> levels{0, 50, 100};
  int combos = 0;
  for (int draw = 0; draw < 3; ++draw) {
    PerMetric<double> norm;
    for (double& x : norm) x = rng.uniform();
    for (int code = 1; code < 6561; ++code) {
      PerMetric<double> w;
      int rest = code;
      for (std::size_t m = 0; m < kNumMetrics; ++m) {
        w[m] = levels[static_cast<std::size_t>(rest % 3)];
        rest /= 3;
      }
      const double base = weighted_score(norm, w);
      for (double c : {0.05, 0.37, 2.0, 17.5}) {
        PerMetric<double> scaled = w;
        for (double& x : scaled) x *= c;
        tl.expect(std::abs(weighted_score(norm, scaled) - base) <= 1e-12, "rescale invariance");
      }
      for (std::size_t m = 0; m < kNumMetrics; ++m) {
        if (w[m] <= 0) continue;
        PerMetric<double> up = norm;
        up[m] = std::min(1.0, up[m] + 0.1);
        tl.expect(weighted_score(up, w) >= base, "monotone in an active metric");
      }
      ++combos;
    }
    for (std::size_t m = 0; m < kNumMetrics; ++m) {
      for (double level = 5; level <= 100; level += 5) {
        PerMetric<double> w{};
        w[m] = level;
        tl.expect(std::abs(weighted_score(norm, w) - norm[m]) <= 1e-15, "single-weight passthrough");
      }
    }
  }
  tl.note(std::to_string(combos) + " weight vectors over {0,50,100}^8");
  return tl;
}

double cv_accuracy(const DatasetSnapshot& s, const EvaluationRun& run, const ModelSpec& m,
                   const FeatureMask& mask) {
  const CachedResult r = cross_validate(s, m, mask, run);
  if (r.failed) return 0.0;
  const Labels pred = argmax_rows(r.oof_proba);
  double ok = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) ok += pred[i] == s.y[i];
  return ok / static_cast<double>(pred.size());
}

Tally importance_properties() {
  Tally tl;
  auto argmax = [](const Vector& v) {
    Eigen::Index best;
    v.maxCoeff(&best);
    return best;
  };
  const std::vector<ModelSpec> trees = {spec(0, Algorithm::kRf, {{"n_estimators", 30}}),
                                        spec(1, Algorithm::kExtraT, {{"n_estimators", 30}}),
                                        spec(2, Algorithm::kAdaB, {{"n_estimators", 30}}),
                                        spec(3, Algorithm::kGradB, {{"n_estimators", 30}})};
  const auto lc = t::label_copy_fixture(100, 4);
  const auto run = evaluate(lc, trees);
  const Vector uni = univariate_importance(lc);
  tl.expect(argmax(uni) == 0, "univariate ranks the label copy first");
  double noise_max = std::max(uni(1), uni(3));
  for (const auto& m : trees) {
    const std::string a(algorithm_id(m.algorithm));
    const Vector perm = permutation_importance(lc, run, m.id, MetricConfig{});
    const auto acc = accuracy_importance(lc, run, m.id);
    tl.expect(argmax(perm) == 0, a + " permutation ranks the label copy first");
    tl.expect(argmax(acc.values) == 0, a + " drop-column ranks the label copy first");
    for (Eigen::Index j : {1, 3}) {
      tl.expect(perm(j) < 0.1, a + " permutation noise < 0.1");
      tl.expect(acc.values(j) < 0.1, a + " drop-column noise < 0.1");
      noise_max = std::max({noise_max, perm(j), acc.values(j)});
    }
  }
  for (Eigen::Index j : {1, 3}) tl.expect(uni(j) < 0.1, "univariate noise < 0.1");
  tl.note("max noise score " + fmt("%.3f", noise_max));

  const auto mk = t::label_copy_fixture(80, 6);
  const FeatureMask mask{false, true, true, false};
  const std::vector<ModelSpec> masked = {spec(0, Algorithm::kRf, {{"n_estimators", 20}}),
                                         spec(1, Algorithm::kKnn, {{"n_neighbors", 5}}),
                                         spec(2, Algorithm::kLr, Json::object())};
  const auto mrun = evaluate(mk, masked, {{0, mask}, {1, mask}, {2, mask}});
  for (const auto& m : masked) {
    const Vector perm = permutation_importance(mk, mrun, m.id, MetricConfig{});
    tl.expect(perm(0) == 0.0 && perm(3) == 0.0,
              std::string(algorithm_id(m.algorithm)) + " masked-out permutation importance is 0");
  }

  // Twins: removing either copy alone costs (almost) nothing.
  const auto tw = t::twin_fixture(300, 8);
  const std::vector<ModelSpec> pool = {spec(0, Algorithm::kLr, Json::object()),
                                       spec(1, Algorithm::kRf, {{"n_estimators", 60}, {"max_depth", 3}}),
                                       spec(2, Algorithm::kGradB, {{"n_estimators", 30}, {"max_depth", 1}})};
  const auto trun = evaluate(tw, pool);
  double worst_drop = 0.0, worst_cell = 0.0;
  for (const auto& m : pool) {
    const std::string a(algorithm_id(m.algorithm));
    const double full = cv_accuracy(tw, trun, m, {true, true, true, true});
    const double drop_a = full - cv_accuracy(tw, trun, m, {false, true, true, true});
    const double drop_b = full - cv_accuracy(tw, trun, m, {true, false, true, true});
    const auto acc = accuracy_importance(tw, trun, m.id);
    tl.expect(drop_a <= 0.02 && drop_b <= 0.02, a + " twin drop <= 0.02 accuracy");
    tl.expect(acc.values(0) < 0.25 && acc.values(1) < 0.25, a + " twin cells < 0.25 of the top");
    worst_drop = std::max({worst_drop, drop_a, drop_b});
    worst_cell = std::max({worst_cell, acc.values(0), acc.values(1)});
  }
  tl.note("twin drop max " + fmt("%.3f", worst_drop) + ", twin cell max " + fmt("%.3f", worst_cell));
  return tl;
}

Tally stacking_sanity() {
  Tally tl;
  const auto sep = t::separable(120, 5);
  const std::vector<ModelSpec> lin = {spec(0, Algorithm::kLr, {{"C", 10.0}}),
                                      spec(1, Algorithm::kGauNb, Json::object())};
  const auto srun = evaluate(sep, lin);
  for (const std::vector<ModelId>& ids : {std::vector<ModelId>{0}, std::vector<ModelId>{0, 1}}) {
    const auto a = build_stack(sep, srun, ids, MetricConfig{});
    tl.expect(a.performance.accuracy == 1.0, "separable stack accuracy 1.0");
    tl.expect(verify_meta_out_of_fold(a), "separable meta out-of-fold");
  }

  const auto h = t::heart();
  DatasetSnapshot train;
  train.X = h.X.topRows(273);
  train.y.assign(h.y.begin(), h.y.begin() + 273);
  train.feature_names = h.feature_names;
  train.class_names = h.class_names;
  const Matrix held = h.X.bottomRows(30);
  const std::vector<ModelSpec> pool = {spec(0, Algorithm::kKnn, {{"n_neighbors", 15}}),
                                       spec(1, Algorithm::kLr, {{"C", 1.0}}),
                                       spec(2, Algorithm::kRf, {{"n_estimators", 20}, {"max_depth", 5}}),
                                       spec(3, Algorithm::kGauNb, Json::object())};
  const auto run = evaluate(train, pool);
  tl.expect(verify_out_of_fold(run), "base-level fold bookkeeping");
  const auto a = build_stack(train, run, {0, 1, 2, 3}, MetricConfig{});
  tl.expect(verify_meta_out_of_fold(a), "meta-level fold bookkeeping");
  StackStore store;
  const auto& rec = store.store(a, pool);
  const auto original = StackPredictor::fit(train, run, rec);
  const auto restored = StackPredictor::from_json(Json::parse(original.to_json().dump()));
  const Labels before = original.predict(held);
  tl.expect(before.size() == 30, "30 held instances");
  tl.expect(restored.predict(held) == before, "export/import labels identical");
  tl.expect(restored.predict_proba(held) == original.predict_proba(held),
            "export/import probabilities identical");
  tl.note("heart 4-model stack accuracy " + fmt("%.4f", a.performance.accuracy));
  return tl;
}

Tally projection_oracles() {
  Tally tl;
  Rng rng(5);
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const int m = 2 + static_cast<int>(rng.below(5));
    Matrix P(m, 2);
    for (Eigen::Index i = 0; i < P.size(); ++i) P.data()[i] = rng.uniform(-5, 5);
    const Matrix D = pairwise_euclidean(P);
    const Matrix C = classical_mds(D, 2);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        const double err = std::abs((C.row(i) - C.row(j)).norm() - D(i, j));
        worst = std::max(worst, err);
        tl.expect(err <= 1e-6, "mds distance preserved");
      }
    }
  }
  tl.note("mds max |err| " + fmt("%.1e", worst));

  Eigen::MatrixXi codes(40, 8);
  for (Eigen::Index i = 0; i < codes.size(); ++i) codes.data()[i] = static_cast<int>(rng.below(3));
  codes.row(9) = codes.row(2);
  const Matrix H = pairwise_hamming(codes);
  for (int trial = 0; trial < 5000; ++trial) {
    const auto a = static_cast<Eigen::Index>(rng.below(40));
    const auto b = static_cast<Eigen::Index>(rng.below(40));
    const auto c = static_cast<Eigen::Index>(rng.below(40));
    tl.expect(H(a, b) == H(b, a), "hamming symmetry");
    tl.expect((H(a, b) == 0.0) == (codes.row(a) == codes.row(b)), "hamming identity");
    tl.expect(H(a, b) >= 0.0, "hamming non-negative");
    tl.expect(H(a, c) <= H(a, b) + H(b, c) + 1e-15, "hamming triangle inequality");
  }

  const auto s = t::blobs(60, 2, 2, 1.2, 4);
  std::vector<ModelSpec> pool;
  for (int k : {1, 3, 7, 15}) pool.push_back(spec(static_cast<ModelId>(pool.size()), Algorithm::kKnn, {{"n_neighbors", k}}));
  for (Algorithm a : {Algorithm::kLr, Algorithm::kGauNb, Algorithm::kLda}) {
    pool.push_back(spec(static_cast<ModelId>(pool.size()), a, Json::object()));
  }
  const auto run = evaluate(s, pool);
  const auto ids = run.ids();
  for (ProjectionMethod method : {ProjectionMethod::kMds, ProjectionMethod::kTsne, ProjectionMethod::kUmap}) {
    const auto base = project_model_space(run, ids, std::nullopt, MetricConfig{}, method, 5);
    for (Metric m : kAllMetrics) {
      const auto other = project_model_space(run, ids, m, MetricConfig{}, method, 5);
      tl.expect(same_bytes(base.projection.coords, other.projection.coords),
                std::string(projection_method_id(method)) + " recolor by " + std::string(metric_id(m)));
    }
  }
  return tl;
}

Tally history_provenance(const HeartRun& heart) {
  Tally tl;
  // Ten rebuilds in one session; every earlier event must survive untouched.
  SessionOptions o;
  o.seed = 7;
  o.grid_config = t::data_path("small_grids.json");
  auto s = Session::from_csv(read_file(t::data_path("small.csv")), "kind", o);
  s->dispatch("confirm", Json::object());
  std::vector<HistoryEvent> seen;
  const std::vector<std::vector<std::string>> algos = {
      {"knn"}, {"lr"}, {"rf"}, {"knn", "lr"}, {"gradb"}, {"extrat"}, {"rf", "gradb"},
      {"svc"}, {"lda", "qda"}, {"knn", "rf", "lr"}};
  for (std::size_t k = 0; k < algos.size(); ++k) {
    s->dispatch("pool.select", Json{{"algorithms", algos[k]}});
    s->dispatch("stack.build", Json{{"label", "Step " + std::to_string(k + 1)}});
    if (k % 3 == 0) s->dispatch("stack.store", Json::object());
    const auto& ev = s->history().events();
    bool prefix = ev.size() >= seen.size();
    for (std::size_t i = 0; prefix && i < seen.size(); ++i) {
      prefix = ev[i].hash == seen[i].hash && ev[i].to_json() == seen[i].to_json();
    }
    tl.expect(prefix, "append-only after step " + std::to_string(k + 1));
    tl.expect(s->history().verify_chain(), "chain valid after step " + std::to_string(k + 1));
    seen = ev;
  }
  tl.expect(s->history().num_steps() == 10, "ten steps recorded");
  auto forged = seen;
  forged[3].performance.accuracy = 1.0;
  tl.expect(!History::from_events(forged).verify_chain(), "edited event detected");
  forged = seen;
  forged.erase(forged.begin() + 5);
  tl.expect(!History::from_events(forged).verify_chain(), "dropped event detected");
  tl.note(std::to_string(seen.size()) + " events, head " + to_hex(s->history().head_hash()));

  // Lineage from the heart replay.
  tl.expect(heart.ok, "heart workflow available");
  if (heart.ok) {
    const Json* s6 = find_stack(heart.doc, "S6");
    const Json* s1 = find_stack(heart.doc, "S1");
    tl.expect(s1 && s1->at("parent").is_null(), "S1 has no parent");
    tl.expect(s6 && s6->at("parent") == "S3", "S6 parent is S3");
    tl.expect(s6 && s6->at("model_count") == 174, "S6 has 174 models");
    tl.expect(s6 && s6->at("algorithms_used").size() == 6, "S6 spans six algorithms");
    const Json* s3 = find_stack(heart.doc, "S3");
    tl.expect(s3 && s3->at("model_count") == 204, "S3 has 204 models");
  }

  // Byte-exact wrangle restore on heart.
  const auto h = t::heart();
  WrangleHistory wh(h);
  const auto initial = wh.active();
  const Matrix copy = initial->X;
  wh.apply(remove_instances(*wh.active(), {190}, 5));
  IndexSet pair;
  for (std::size_t i = 0; i < wh.active()->y.size() && pair.size() < 2; ++i) {
    if (wh.active()->y[i] == 1) pair.insert(static_cast<Eigen::Index>(i));
  }
  wh.apply(merge_instances(*wh.active(), pair, MergeMode::kMedian));
  wh.restore(initial->id);
  tl.expect(same_bytes(wh.active()->X, copy), "restored features byte-exact");
  tl.expect(wh.active()->y == h.y, "restored labels identical");
  tl.expect(wh.active()->fingerprint() == h.fingerprint(), "restored fingerprint identical");
  tl.expect(wh.snapshots().size() == 3, "restore keeps every snapshot");
  return tl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string work_dir = (fs::temp_directory_path() / "stackgen_acceptance").string();
  app.add_option("--work-dir", work_dir, "Scratch directory for the workflow outputs");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work_dir);

  std::fprintf(stderr, "replaying the heart workflow (run 1) ...\n");
  const HeartRun first = run_heart(work_dir, "run1");
  std::fprintf(stderr, "replaying the heart workflow (run 2) ...\n");
  const HeartRun second = run_heart(work_dir, "run2");

  const std::vector<std::pair<std::string, std::function<Tally()>>> criteria = {
      {"heart-disease end-to-end", [&] { return heart_end_to_end(first); }},
      {"metric oracle suite", metric_oracle},
      {"weighted-score properties", weighted_score_properties},
      {"importance properties", importance_properties},
      {"stacking sanity", stacking_sanity},
      {"projection oracles", projection_oracles},
      {"determinism", [&] { return determinism(first, second); }},
      {"history/provenance", [&] { return history_provenance(first); }},
  };

  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Tally tl;
    try {
      tl = fn();
    } catch (const std::exception& e) {
      tl.expect(false, std::string("exception: ") + e.what());
    }
    failed += tl.ok() ? 0 : 1;
    std::printf("%s  %-28s %s\n", tl.ok() ? "PASS" : "FAIL", name.c_str(), tl.detail().c_str());
    std::fflush(stdout);
  }
  if (first.ok) std::printf("\nheart workflow table (run 1):\n%s", first.table.c_str());
  std::printf("\n%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
