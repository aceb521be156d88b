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


#include <chrono>
#include <filesystem>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "fixtures.hpp"
#include "httplib.h"
#include "stackgen/service.hpp"

using namespace stackgen;
using stackgen::testing::data_path;
namespace fs = std::filesystem;

namespace {

// Runs a service on an ephemeral port for the lifetime of the object.
struct Running {
  explicit Running(ServiceOptions o) : service(std::move(o)) {
    port = service.bind();
    thread = std::thread([this] { service.serve(); });
    httplib::Client probe("127.0.0.1", port);
    for (int i = 0; i < 200 && !probe.Get("/api/health"); ++i) {
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
  }
  ~Running() {
    service.stop();
    thread.join();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(120, 0);
    return c;
  }

  Service service;
  int port = 0;
  std::thread thread;
};

struct Reply {
  int status = 0;
  Json body;
};

Reply reply(const httplib::Result& r) {
  REQUIRE(r);
  return {r->status, r->body.empty() ? Json() : Json::parse(r->body)};
}

Reply get(httplib::Client& c, const std::string& path) { return reply(c.Get(path)); }
Reply post(httplib::Client& c, const std::string& path, const Json& body = Json::object()) {
  return reply(c.Post(path, body.dump(), "application/json"));
}
Reply put(httplib::Client& c, const std::string& path, const Json& body) {
  return reply(c.Put(path, body.dump(), "application/json"));
}

Json create_body(const std::string& csv_name, const std::string& label) {
  return Json{{"csv", read_file(data_path(csv_name))},
              {"label_column", label},
              {"grid_config", data_path("small_grids.json")}};
}

std::string new_session(httplib::Client& c, const std::string& csv = "small.csv",
                        const std::string& label = "kind") {
  const Reply r = post(c, "/api/sessions", create_body(csv, label));
  REQUIRE(r.status == 201);
  return r.body["session_id"].get<std::string>();
}

Json wait_job(httplib::Client& c, const Json& accepted) {
  const std::string path = "/api/jobs/" + accepted["job_id"].get<std::string>();
  for (int i = 0; i < 6000; ++i) {
    const Reply r = get(c, path);
    REQUIRE(r.status == 200);
    const std::string st = r.body["status"];
    if (st == "done" || st == "failed") return r.body;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  FAIL("job did not finish");
  return {};
}

std::string feature_rows(int n) {
  std::istringstream in(read_file(data_path("small.csv")));
  std::string line, out;
  for (int i = 0; i <= n && std::getline(in, line); ++i) {
    out += line.substr(0, line.rfind(',')) + "\n";
  }
  return out;
}

}  // namespace

TEST_CASE("error codes map to HTTP statuses") {
  CHECK(http_status(ErrorCode::kInvalidArgument) == 400);
  CHECK(http_status(ErrorCode::kNotFound) == 404);
  CHECK(http_status(ErrorCode::kConflict) == 409);
  CHECK(http_status(ErrorCode::kUnavailable) == 503);
  CHECK(http_status(ErrorCode::kSchemaInvalid) == 422);
  CHECK(http_status(ErrorCode::kIo) == 500);
  // Every session action is reachable through exactly one route.
  std::set<std::string> routed;
  for (const auto& r : session_routes()) CHECK(routed.insert(r.action).second);
  CHECK(routed.size() == Session::actions().size());
}

TEST_CASE("HTTP session lifecycle") {
  Running srv(ServiceOptions{});
  auto c = srv.client();
  CHECK(get(c, "/api/health").body["status"] == "ok");
  const Reply schema = get(c, "/api/schema");
  CHECK(schema.body["routes"].size() == session_routes().size());
  CHECK(schema.body["workflow_schema"] == kWorkflowSchemaVersion);

  const Reply created = post(c, "/api/sessions", create_body("heart.csv", "target"));
  REQUIRE(created.status == 201);
  CHECK(created.body["summary"]["instances"] == 303);
  CHECK(created.body["summary"]["features"] == 13);
  CHECK(created.body["summary"]["classes"] == Json{{"diseased", 139}, {"healthy", 164}});

  const std::string sid = new_session(c);
  const std::string base = "/api/sessions/" + sid;
  CHECK(get(c, base + "/summary").body["instances"] == 90);

  SUBCASE("errors are machine readable") {
    const Reply missing = get(c, "/api/sessions/zzz/summary");
    CHECK(missing.status == 404);
    CHECK(missing.body["error"]["code"] == "not_found");
    const Reply bad_json = reply(c.Put(base + "/config", "{nope", "application/json"));
    CHECK(bad_json.status == 400);
    CHECK(bad_json.body["error"]["code"] == "invalid_argument");
    const Reply bad_weight = put(c, base + "/config", Json{{"weights", {{"mcc", 7}}}});
    CHECK(bad_weight.status == 400);
    const Reply unconfirmed = post(c, base + "/pool/select?sync=1", Json{{"algorithms", {"knn"}}});
    CHECK(unconfirmed.status == 409);
    CHECK(unconfirmed.body["error"]["code"] == "conflict");
    CHECK(get(c, "/api/jobs/j999").status == 404);
    CHECK(get(c, base + "/importance").status == 404);
  }

  SUBCASE("csv upload") {
    const auto r = c.Post("/api/sessions?label_column=kind", read_file(data_path("small.csv")),
                          "text/csv");
    REQUIRE(r);
    CHECK(r->status == 201);
    CHECK(Json::parse(r->body)["summary"]["classes"].size() == 3);
  }

  SUBCASE("jobs, stacks, export and predict") {
    const Json weights{{"weights", {{"gmean", 0}, {"roc_auc", 0}, {"precision", 80}}}, {"beta", 2}};
    const Reply cfg = put(c, base + "/config", weights);
    CHECK(cfg.status == 200);
    CHECK(cfg.body["weights"]["precision"] == 80);
    CHECK(cfg.body["beta"] == 2.0);

    const Reply accepted = post(c, base + "/confirm");
    REQUIRE(accepted.status == 202);
    CHECK(accepted.body.contains("job_id"));
    const Json done = wait_job(c, accepted.body);
    CHECK(done["status"] == "done");
    CHECK(done["result"]["evaluated"] == 17);
    CHECK(done["phase"] == "evaluate");
    CHECK(done["done"] == done["total"]);

    const Reply dist = get(c, base + "/pool/distributions");
    CHECK(dist.body["distributions"].size() == 11);
    const Reply sel = post(c, base + "/pool/select?sync=1", Json{{"algorithms", {"knn", "lr", "gradb"}}});
    CHECK(sel.status == 200);
    CHECK(sel.body["count"] == 7);
    const Reply cov = get(c, base + "/pool/coverage");
    CHECK(cov.body["selected"] == 7);

    const Json built = wait_job(c, post(c, base + "/stack/build", Json{{"label", "http"}}).body);
    REQUIRE(built["status"] == "done");
    CHECK(built["result"]["active"]["model_count"] == 7);
    const Reply stored = post(c, base + "/stack/store", Json{{"note", "via http"}});
    CHECK(stored.status == 200);
    CHECK(stored.body["stack_id"] == "S1");
    CHECK(stored.body["parent"].is_null());
    CHECK(stored.body["performance"] == built["result"]["active"]["performance"]);

    const Reply exported = get(c, base + "/stack/export?stack_id=%22S1%22&sync=1");
    REQUIRE(exported.status == 200);
    CHECK(exported.body["schema_version"] == kExportSchemaVersion);
    CHECK(exported.body["models"].size() == 7);

    const auto pr = c.Post(base + "/stack/predict?stack_id=S1&sync=1", feature_rows(5), "text/csv");
    REQUIRE(pr);
    REQUIRE(pr->status == 200);
    const Json preds = Json::parse(pr->body);
    CHECK(preds["labels"].size() == 5);
    CHECK(preds["proba"].size() == 5);
    CHECK(preds["proba"][0].size() == 3);

    const Reply by_doc = post(c, base + "/stack/predict?sync=1",
                              Json{{"document", exported.body}, {"csv", feature_rows(5)}});
    CHECK(by_doc.body["labels"] == preds["labels"]);
    CHECK(by_doc.body["warnings"].empty());

    const Reply series = get(c, base + "/stack/series");
    CHECK(series.body["series"].size() == 1);
    CHECK(get(c, base + "/stack/summaries").body["stacks"][0]["model_count"] == 7);
    CHECK(get(c, base + "/history/provenance").body["history_valid"] == true);

    const Json proj = wait_job(c, post(c, base + "/projections/models",
                                       Json{{"method", "mds"}, {"color_metric", "mcc"}}).body);
    CHECK(proj["result"]["coords"].size() == 7);
    const Json failed = wait_job(c, post(c, base + "/projections/data", Json{{"method", "pca"}}).body);
    CHECK(failed["status"] == "failed");
    CHECK(failed["error"]["code"] == "invalid_argument");

    // The other session never saw these changes.
    const std::string other = new_session(c);
    CHECK(get(c, "/api/sessions/" + other + "/summary").body["confirmed"] == false);
    CHECK(get(c, "/api/sessions/" + other + "/stack/summaries").body["stacks"].empty());
    CHECK(get(c, "/api/sessions/" + other + "/config").body["weights"]["precision"] == 100);

    const Reply wf = get(c, base + "/workflow");
    const Reply replayed = reply(c.Post("/api/sessions/replay", wf.body.dump(), "application/json"));
    REQUIRE(replayed.status == 201);
    const std::string rid = replayed.body["session_id"];
    CHECK(get(c, "/api/sessions/" + rid + "/stack/summaries").body ==
          get(c, base + "/stack/summaries").body);
  }

  SUBCASE("delete") {
    CHECK(reply(c.Delete(base)).status == 200);
    CHECK(get(c, base + "/summary").status == 404);
    CHECK(reply(c.Delete(base)).status == 404);
  }
}

TEST_CASE("a second mutation while a job holds the session gets 409") {
  ServiceOptions o;
  o.workers = 1;
  o.queue_limit = 1;
  o.session.folds = 10;
  Running srv(o);
  auto c = srv.client();
  const std::string blocker = new_session(c, "heart.csv", "target");
  const std::string sid = new_session(c);
  const std::string base = "/api/sessions/" + sid;

  // One worker: the heart job runs while this session's confirm waits in
  // the queue, holding the session's mutation slot.
  const Reply b = post(c, "/api/sessions/" + blocker + "/confirm");
  REQUIRE(b.status == 202);
  const Reply a = post(c, base + "/confirm");
  REQUIRE(a.status == 202);
  const Reply conflict = put(c, base + "/config", Json{{"beta", 2}});
  CHECK(conflict.status == 409);
  CHECK(conflict.body["error"]["code"] == "conflict");
  CHECK(get(c, base + "/summary").status == 200);
  const Reply full = post(c, "/api/sessions/" + new_session(c) + "/confirm");
  CHECK(full.status == 503);

  CHECK(wait_job(c, b.body)["status"] == "done");
  CHECK(wait_job(c, a.body)["status"] == "done");
  CHECK(put(c, base + "/config", Json{{"beta", 2}}).status == 200);
}

TEST_CASE("sessions persist in the data directory") {
  const fs::path dir = fs::temp_directory_path() / "stackgen_service_persist";
  fs::remove_all(dir);
  Json before;
  std::string sid;
  {
    ServiceOptions o;
    o.data_dir = dir.string();
    Running srv(o);
    auto c = srv.client();
    sid = new_session(c);
    const std::string base = "/api/sessions/" + sid;
    post(c, base + "/confirm?sync=1");
    post(c, base + "/pool/select?sync=1", Json{{"algorithms", {"rf", "extrat"}}});
    post(c, base + "/stack/build?sync=1");
    post(c, base + "/stack/store");
    post(c, base + "/wrangle/remove", Json{{"indices", {2}}});
    before = get(c, base + "/stack/summaries").body;
    CHECK(before["stacks"].size() == 1);
  }
  CHECK(fs::exists(dir / "sessions" / (sid + ".json")));
  CHECK_FALSE(fs::is_empty(dir / "cache"));
  {
    ServiceOptions o;
    o.data_dir = dir.string();
    Running srv(o);
    auto c = srv.client();
    const std::string base = "/api/sessions/" + sid;
    CHECK(get(c, base + "/stack/summaries").body == before);
    CHECK(get(c, base + "/summary").body["instances"] == 89);
    // New ids do not collide with restored ones.
    CHECK(new_session(c) != sid);
  }
  fs::remove_all(dir);
}
