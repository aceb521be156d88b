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

// stackgen serve | run-workflow | predict

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "stackgen/service.hpp"

namespace {

using stackgen::Json;

stackgen::Service* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

struct Common {
  std::optional<std::uint64_t> seed;
  std::optional<int> folds;
  std::optional<std::string> grid_config;
  std::optional<std::string> label_column;
  int threads = 0;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--seed", c.seed, "Global seed for folds and models");
  app->add_option("--folds", c.folds, "Cross-validation fold count");
  app->add_option("--grid-config", c.grid_config, "JSON file with hyperparameter grids");
  app->add_option("--label-column", c.label_column, "Name of the label column");
  app->add_option("--threads", c.threads, "Worker threads for training (0 = all cores)");
}

std::string proba_csv(const stackgen::StackPredictor& p, const stackgen::Matrix& proba) {
  std::ostringstream os;
  os.precision(17);
  os << "label";
  for (const auto& c : p.class_names()) os << ",p_" << c;
  os << "\n";
  const auto labels = stackgen::argmax_rows(proba);
  for (Eigen::Index i = 0; i < proba.rows(); ++i) {
    os << p.class_names()[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
    for (Eigen::Index c = 0; c < proba.cols(); ++c) os << "," << proba(i, c);
    os << "\n";
  }
  return os.str();
}

int run_serve(const Common& c, const std::string& host, int port, const std::string& data_dir,
              int workers) {
  stackgen::ServiceOptions o;
  o.host = host;
  o.port = port;
  o.data_dir = data_dir;
  o.workers = workers;
  if (c.seed) o.session.seed = *c.seed;
  if (c.folds) o.session.folds = *c.folds;
  if (c.grid_config) o.session.grid_config = *c.grid_config;
  o.session.threads = c.threads;
  stackgen::Service service(o);
  const int bound = service.bind();
  std::printf("listening on http://%s:%d\nport %d\n", host.c_str(), bound, bound);
  std::fflush(stdout);
  g_service = &service;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  service.serve();
  g_service = nullptr;
  return 0;
}

int run_workflow_cmd(const Common& c, const std::string& path, const std::string& json_out,
                     const std::string& export_dir, const std::string& cache_dir, bool quiet) {
  namespace fs = std::filesystem;
  const Json doc = Json::parse(stackgen::read_file(path));
  stackgen::WorkflowOverrides o;
  o.seed = c.seed;
  o.folds = c.folds;
  o.grid_config = c.grid_config;
  o.label_column = c.label_column;
  o.threads = c.threads;
  if (!cache_dir.empty()) o.cache = std::make_shared<stackgen::EvalCache>(cache_dir);
  auto log = [quiet](const std::string& line) {
    if (!quiet) std::fprintf(stderr, "%s\n", line.c_str());
  };
  auto result = stackgen::run_workflow(doc, fs::path(path).parent_path().string(), o, log);
  std::cout << stackgen::format_workflow_table(result.rows) << std::flush;

  if (!json_out.empty()) {
    Json rows = Json::array();
    for (const auto& r : result.rows) {
      rows.push_back(Json{{"step_index", r.step_index},
                          {"label", r.label},
                          {"stack_id", r.stored_id},
                          {"parent", r.parent_id},
                          {"model_count", r.model_count},
                          {"performance", stackgen::performance_to_json(r.performance)}});
    }
    Json stored = Json::array();
    for (const auto& rec : result.session->stacks().records()) stored.push_back(rec.to_json());
    stackgen::write_file(json_out, Json{{"rows", rows}, {"stacks", stored}}.dump(2) + "\n");
  }
  if (!export_dir.empty()) {
    fs::create_directories(export_dir);
    for (const auto& rec : result.session->stacks().records()) {
      const Json exported = result.session->dispatch("stack.export", Json{{"stack_id", rec.id}});
      stackgen::write_file((fs::path(export_dir) / (rec.id + ".json")).string(), exported.dump());
    }
  }
  return 0;
}

int run_predict(const std::string& stack_path, const std::string& data_path,
                const std::string& out_path) {
  std::vector<std::string> warnings;
  const auto p = stackgen::StackPredictor::from_json(
      Json::parse(stackgen::read_file(stack_path)), &warnings);
  for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  const auto X = stackgen::parse_feature_csv(stackgen::read_file(data_path), p.feature_names());
  const std::string csv = proba_csv(p, p.predict_proba(X));
  if (out_path.empty() || out_path == "-") {
    std::cout << csv;
  } else {
    stackgen::write_file(out_path, csv);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stacking-ensemble workbench"};
  app.require_subcommand(1);

  Common serve_opts;
  std::string host = "127.0.0.1", data_dir;
  int port = 8080, workers = 2;
  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  add_common(serve, serve_opts);
  serve->add_option("--host", host, "Interface to bind");
  serve->add_option("--port", port, "Port (0 = ephemeral)");
  serve->add_option("--data-dir", data_dir, "Directory for the evaluation cache and journals");
  serve->add_option("--workers", workers, "Job worker threads");

  Common wf_opts;
  std::string workflow_path, json_out, export_dir, cache_dir;
  bool quiet = false;
  auto* wf = app.add_subcommand("run-workflow", "Replay a workflow document");
  add_common(wf, wf_opts);
  wf->add_option("workflow", workflow_path, "Workflow JSON")->required()->check(CLI::ExistingFile);
  wf->add_option("--json-out", json_out, "Write the step table and stored stacks as JSON");
  wf->add_option("--export-dir", export_dir, "Write every stored stack's export document here");
  wf->add_option("--cache-dir", cache_dir, "Persistent evaluation cache");
  wf->add_flag("-q,--quiet", quiet, "No per-step log on stderr");

  std::string stack_path, data_path, out_path;
  auto* predict = app.add_subcommand("predict", "Apply an exported stack to new data");
  predict->add_option("--stack", stack_path, "Exported stack JSON")->required()->check(CLI::ExistingFile);
  predict->add_option("--data", data_path, "CSV with the feature columns")->required()->check(CLI::ExistingFile);
  predict->add_option("--out", out_path, "Output CSV (default stdout)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*serve) return run_serve(serve_opts, host, port, data_dir, workers);
    if (*wf) return run_workflow_cmd(wf_opts, workflow_path, json_out, export_dir, cache_dir, quiet);
    if (*predict) return run_predict(stack_path, data_path, out_path);
  } catch (const stackgen::Error& e) {
    std::fprintf(stderr, "error (%s): %s\n", std::string(stackgen::error_code_name(e.code())).c_str(),
                 e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
