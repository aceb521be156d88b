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


#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "httplib.h"
#include "stackgen/common.hpp"
#include "stackgen/dataset.hpp"
#include "stackgen/learners.hpp"

using stackgen::Json;
using stackgen::read_file;
using stackgen::write_file;
using stackgen::testing::data_path;
namespace fs = std::filesystem;

namespace {

struct Output {
  int status = -1;
  std::string text;
};

// Runs the CLI through the shell; stderr is dropped unless `merge_stderr`.
Output cli(const std::string& args, bool merge_stderr = false) {
  const std::string cmd =
      std::string("'") + STACKGEN_CLI + "' " + args + (merge_stderr ? " 2>&1" : " 2>/dev/null");
  Output out;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) out.text.append(buf.data(), n);
  const int st = pclose(p);
  out.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return out;
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("stackgen_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_CASE("run-workflow twice gives identical tables") {
  const fs::path d = scratch("twice");
  const std::string wf = q(data_path("small_workflow.json"));
  const Output a = cli("run-workflow -q " + wf + " --json-out " + q(d / "a.json"));
  const Output b = cli("run-workflow " + wf + " --json-out " + q(d / "b.json") + " --cache-dir " +
                       q(d / "cache"));
  REQUIRE(a.status == 0);
  REQUIRE(b.status == 0);
  CHECK(a.text == b.text);
  CHECK(a.text.rfind("step", 0) == 0);

  const Json ja = Json::parse(read_file((d / "a.json").string()));
  const Json jb = Json::parse(read_file((d / "b.json").string()));
  CHECK(ja == jb);
  REQUIRE(ja["rows"].size() == 4);
  CHECK(ja["rows"][3]["stack_id"] == "S4");
  CHECK(ja["rows"][3]["parent"] == "S2");
  CHECK(ja["stacks"].size() == 4);

  // A warm cache changes nothing.
  const Output c = cli("run-workflow -q " + wf + " --cache-dir " + q(d / "cache"));
  CHECK(c.text == a.text);
  CHECK_FALSE(fs::is_empty(d / "cache"));

  const Output seeded = cli("run-workflow -q --seed 3 " + wf);
  CHECK(seeded.status == 0);
  CHECK(seeded.text != a.text);
  fs::remove_all(d);
}

TEST_CASE("exported stacks predict from the command line") {
  const fs::path d = scratch("predict");
  const Output run = cli("run-workflow -q " + q(data_path("small_workflow.json")) +
                         " --export-dir " + q(d / "stacks"));
  REQUIRE(run.status == 0);
  for (const char* id : {"S1", "S2", "S3", "S4"}) {
    CHECK(fs::exists(d / "stacks" / (std::string(id) + ".json")));
  }

  std::istringstream in(read_file(data_path("small.csv")));
  std::string line, held;
  for (int i = 0; i <= 5 && std::getline(in, line); ++i) held += line + "\n";
  write_file((d / "held.csv").string(), held);

  const Output to_file = cli("predict --stack " + q(d / "stacks" / "S4.json") + " --data " +
                             q(d / "held.csv") + " --out " + q(d / "preds.csv"));
  REQUIRE(to_file.status == 0);
  const std::string preds = read_file((d / "preds.csv").string());
  std::istringstream rows(preds);
  std::getline(rows, line);
  CHECK(line == "label,p_setosa_like,p_versi_like,p_virgi_like");
  int count = 0;
  while (std::getline(rows, line)) {
    ++count;
    std::istringstream cells(line);
    std::string label, cell;
    std::getline(cells, label, ',');
    CHECK((label == "setosa_like" || label == "versi_like" || label == "virgi_like"));
    double sum = 0.0;
    int k = 0;
    while (std::getline(cells, cell, ',')) {
      sum += std::stod(cell);
      ++k;
    }
    CHECK(k == 3);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
  CHECK(count == 5);

  const Output to_stdout =
      cli("predict --stack " + q(d / "stacks" / "S4.json") + " --data " + q(d / "held.csv"));
  CHECK(to_stdout.text == preds);

  Json doc = Json::parse(read_file((d / "stacks" / "S4.json").string()));
  doc.erase("metamodel");
  write_file((d / "broken.json").string(), doc.dump());
  const Output broken = cli(
      "predict --stack " + q(d / "broken.json") + " --data " + q(d / "held.csv"), true);
  CHECK(broken.status == 2);
  CHECK(broken.text.find("schema_invalid") != std::string::npos);
  CHECK(broken.text.find("/metamodel") != std::string::npos);
  fs::remove_all(d);
}

TEST_CASE("command-line errors exit nonzero") {
  const fs::path d = scratch("errors");
  CHECK(cli("").status != 0);
  CHECK(cli("run-workflow " + q(d / "missing.json")).status != 0);
  write_file((d / "bad.json").string(), R"({"schema_version": "x", "dataset": {}, "steps": []})");
  const Output bad = cli("run-workflow " + q(d / "bad.json"), true);
  CHECK(bad.status == 2);
  CHECK(bad.text.find("schema_invalid") != std::string::npos);
  fs::remove_all(d);
}

TEST_CASE("serve --port 0 prints the bound port") {
  int pipefd[2];
  REQUIRE(pipe(pipefd) == 0);
  const pid_t pid = fork();
  REQUIRE(pid >= 0);
  if (pid == 0) {
    dup2(pipefd[1], STDOUT_FILENO);
    close(pipefd[0]);
    close(pipefd[1]);
    execl(STACKGEN_CLI, STACKGEN_CLI, "serve", "--port", "0", static_cast<char*>(nullptr));
    _exit(127);
  }
  close(pipefd[1]);
  FILE* out = fdopen(pipefd[0], "r");
  REQUIRE(out != nullptr);
  std::array<char, 256> line{};
  int port = 0;
  while (port == 0 && fgets(line.data(), static_cast<int>(line.size()), out)) {
    std::sscanf(line.data(), "port %d", &port);
  }
  CHECK(port > 0);
  if (port > 0) {
    httplib::Client c("127.0.0.1", port);
    const auto r = c.Get("/api/health");
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(Json::parse(r->body)["status"] == "ok");
  }
  kill(pid, SIGTERM);
  int status = 0;
  waitpid(pid, &status, 0);
  CHECK(WIFEXITED(status));
  CHECK(WEXITSTATUS(status) == 0);
  fclose(out);
}
