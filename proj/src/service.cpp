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

#include "stackgen/service.hpp"

#include <condition_variable>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <thread>

#include "httplib.h"

namespace stackgen {

namespace fs = std::filesystem;

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return 400;
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kConflict: return 409;
    case ErrorCode::kUnavailable: return 503;
    case ErrorCode::kTrainingFailed:
    case ErrorCode::kSchemaInvalid:
    case ErrorCode::kNoActiveMetrics: return 422;
    case ErrorCode::kIo: return 500;
  }
  return 500;
}

const std::vector<Route>& session_routes() {
  static const std::vector<Route> kRoutes = {
      {"GET", "/summary", "summary"},
      {"GET", "/config", "config.get"},
      {"PUT", "/config", "config.put"},
      {"POST", "/confirm", "confirm"},
      {"GET", "/pool/algorithms", "pool.algorithms"},
      {"GET", "/pool/models", "pool.models"},
      {"GET", "/pool/distributions", "pool.distributions"},
      {"GET", "/pool/per_class", "pool.per_class"},
      {"GET", "/pool/coverage", "pool.coverage"},
      {"POST", "/pool/select", "pool.select"},
      {"GET", "/wrangle/history", "wrangle.history"},
      {"POST", "/wrangle/remove", "wrangle.remove"},
      {"POST", "/wrangle/merge", "wrangle.merge"},
      {"POST", "/wrangle/compose", "wrangle.compose"},
      {"POST", "/wrangle/restore", "wrangle.restore"},
      {"POST", "/importance/compute", "importance.compute"},
      {"POST", "/importance/combine", "importance.combine"},
      {"GET", "/importance", "importance.get"},
      {"GET", "/masks", "masks.get"},
      {"PUT", "/masks", "masks.put"},
      {"POST", "/projections/data", "projection.data"},
      {"POST", "/projections/models", "projection.models"},
      {"POST", "/projections/predictions", "projection.predictions"},
      {"POST", "/projections/histograms", "projection.histograms"},
      {"POST", "/stack/build", "stack.build"},
      {"POST", "/stack/store", "stack.store"},
      {"POST", "/stack/activate", "stack.activate"},
      {"GET", "/stack/active", "stack.active"},
      {"GET", "/stack/summaries", "stack.summaries"},
      {"GET", "/stack/series", "stack.series"},
      {"GET", "/stack/export", "stack.export"},
      {"POST", "/stack/predict", "stack.predict"},
      {"GET", "/history/provenance", "history.provenance"},
      {"GET", "/workflow", "session.workflow"},
  };
  return kRoutes;
}

namespace {

struct Job {
  std::string id;
  std::string session_id;
  std::string action;
  std::mutex mutex;
  std::string status = "queued";
  std::string phase;
  std::size_t done = 0;
  std::size_t total = 0;
  Json result;
  Json error;

  Json to_json() {
    std::lock_guard lock(mutex);
    Json out{{"job_id", id},   {"session_id", session_id}, {"action", action},
             {"status", status}, {"phase", phase},           {"done", done},
             {"total", total}};
    if (status == "done") out["result"] = result;
    if (status == "failed") out["error"] = error;
    return out;
  }
};

class JobQueue {
 public:
  JobQueue(int workers, std::size_t limit) : limit_(limit) {
    for (int i = 0; i < std::max(1, workers); ++i) {
      threads_.emplace_back([this] { work(); });
    }
  }
  ~JobQueue() {
    {
      std::lock_guard lock(mutex_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  std::shared_ptr<Job> submit(const std::string& session_id, const std::string& action,
                              std::function<void(Job&)> task) {
    auto job = std::make_shared<Job>();
    job->session_id = session_id;
    job->action = action;
    {
      std::lock_guard lock(mutex_);
      require(queue_.size() < limit_, "job queue is full", ErrorCode::kUnavailable);
      job->id = "j" + std::to_string(next_id_++);
      jobs_[job->id] = job;
      queue_.emplace_back([job, task = std::move(task)]() mutable { task(*job); });
    }
    cv_.notify_one();
    return job;
  }

  std::shared_ptr<Job> get(const std::string& id) {
    std::lock_guard lock(mutex_);
    auto it = jobs_.find(id);
    require(it != jobs_.end(), "unknown job " + id, ErrorCode::kNotFound);
    return it->second;
  }

 private:
  void work() {
    for (;;) {
      std::function<void()> task;
      {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return stop_ || !queue_.empty(); });
        if (stop_ && queue_.empty()) return;
        task = std::move(queue_.front());
        queue_.pop_front();
      }
      task();
    }
  }

  std::size_t limit_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> queue_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::uint64_t next_id_ = 1;
  bool stop_ = false;
  std::vector<std::thread> threads_;
};

Json error_json(ErrorCode code, const std::string& message) {
  return Json{{"error", {{"code", error_code_name(code)}, {"message", message}}}};
}

void send(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    send(res, http_status(e.code()), error_json(e.code(), e.what()));
  } catch (const Json::exception& e) {
    send(res, 400, error_json(ErrorCode::kInvalidArgument, e.what()));
  } catch (const std::exception& e) {
    send(res, 500, error_json(ErrorCode::kIo, e.what()));
  }
}

bool is_csv(const httplib::Request& req) {
  const auto type = req.get_header_value("Content-Type");
  return type.find("text/csv") != std::string::npos;
}

// Body JSON merged with query parameters; a query value that parses as JSON
// is taken as such, otherwise as a string.
Json request_args(const httplib::Request& req) {
  Json args = Json::object();
  if (!req.body.empty() && !is_csv(req)) {
    args = Json::parse(req.body);
    require(args.is_object(), "request body must be a JSON object");
  }
  for (const auto& [key, value] : req.params) {
    if (key == "sync") continue;
    Json v = Json::parse(value, nullptr, false);
    args[key] = v.is_discarded() ? Json(value) : v;
  }
  return args;
}

}  // namespace

struct Service::Impl {
  ServiceOptions options;
  httplib::Server server;
  int port = -1;
  std::mutex sessions_mutex;
  std::map<std::string, std::shared_ptr<Session>> sessions;
  std::uint64_t next_session = 1;
  std::unique_ptr<JobQueue> jobs;

  explicit Impl(ServiceOptions o) : options(std::move(o)) {
    if (!options.data_dir.empty()) {
      fs::create_directories(fs::path(options.data_dir) / "sessions");
      if (!options.session.cache) {
        options.session.cache =
            std::make_shared<EvalCache>((fs::path(options.data_dir) / "cache").string());
      }
    }
    if (!options.session.cache) options.session.cache = std::make_shared<EvalCache>();
    jobs = std::make_unique<JobQueue>(options.workers, options.queue_limit);
    restore_sessions();
    install_routes();
  }

  std::string journal_path(const std::string& sid) const {
    return (fs::path(options.data_dir) / "sessions" / (sid + ".json")).string();
  }

  void persist(const std::string& sid, const Session& s) {
    if (options.data_dir.empty()) return;
    const std::string path = journal_path(sid);
    write_file(path + ".tmp", s.workflow().dump());
    fs::rename(path + ".tmp", path);
  }

  void restore_sessions() {
    if (options.data_dir.empty()) return;
    for (const auto& entry : fs::directory_iterator(fs::path(options.data_dir) / "sessions")) {
      if (entry.path().extension() != ".json") continue;
      const std::string sid = entry.path().stem().string();
      try {
        WorkflowOverrides o;
        o.threads = options.session.threads;
        o.cache = options.session.cache;
        auto result = run_workflow(Json::parse(read_file(entry.path().string())), "", o);
        sessions[sid] = std::shared_ptr<Session>(std::move(result.session));
        if (sid.size() > 1 && sid[0] == 's') {
          next_session = std::max<std::uint64_t>(next_session, std::stoull(sid.substr(1)) + 1);
        }
      } catch (const std::exception& e) {
        std::fprintf(stderr, "could not restore session %s: %s\n", sid.c_str(), e.what());
      }
    }
  }

  std::shared_ptr<Session> find(const std::string& sid) {
    std::lock_guard lock(sessions_mutex);
    auto it = sessions.find(sid);
    require(it != sessions.end(), "unknown session " + sid, ErrorCode::kNotFound);
    return it->second;
  }

  std::string add(std::shared_ptr<Session> s) {
    std::lock_guard lock(sessions_mutex);
    const std::string sid = "s" + std::to_string(next_session++);
    sessions[sid] = std::move(s);
    return sid;
  }

  SessionOptions session_options(const Json& body) const {
    SessionOptions so = options.session;
    if (body.contains("seed")) so.seed = body.at("seed").get<std::uint64_t>();
    if (body.contains("folds")) so.folds = body.at("folds").get<int>();
    if (body.contains("grid_config")) so.grid_config = body.at("grid_config").get<std::string>();
    return so;
  }

  void handle_action(const std::string& action, const httplib::Request& req,
                     httplib::Response& res) {
    const std::string sid = req.matches[1];
    auto session = find(sid);
    Json args = request_args(req);
    if (action == "stack.predict" && is_csv(req)) args["csv"] = req.body;
    const bool mutating = Session::is_mutating(action);
    const bool sync = req.has_param("sync");

    if (Session::is_long(action) && !sync) {
      std::shared_ptr<MutationClaim> claim;
      if (mutating) claim = std::make_shared<MutationClaim>(*session);
      auto job = jobs->submit(sid, action, [this, session, sid, action, args, claim, mutating](Job& j) mutable {
        {
          std::lock_guard lock(j.mutex);
          j.status = "running";
        }
        auto progress = [&j](const std::string& phase, std::size_t done, std::size_t total) {
          std::lock_guard lock(j.mutex);
          j.phase = phase;
          j.done = done;
          j.total = total;
        };
        Json result, error;
        try {
          result = session->dispatch(action, args, progress, claim.get());
          if (mutating) persist(sid, *session);
        } catch (const Error& e) {
          error = error_json(e.code(), e.what()).at("error");
        } catch (const std::exception& e) {
          error = error_json(ErrorCode::kIo, e.what()).at("error");
        }
        claim.reset();
        std::lock_guard lock(j.mutex);
        if (error.is_null()) {
          j.status = "done";
          j.result = std::move(result);
        } else {
          j.status = "failed";
          j.error = std::move(error);
        }
      });
      send(res, 202, job->to_json());
      return;
    }

    Json result;
    if (mutating) {
      MutationClaim claim(*session);
      result = session->dispatch(action, args, {}, &claim);
      persist(sid, *session);
    } else {
      result = session->dispatch(action, args);
    }
    send(res, 200, result);
  }

  void install_routes() {
    server.set_payload_max_length(256u << 20);
    const std::string base = R"(/api/sessions/([^/]+))";
    for (const auto& r : session_routes()) {
      const std::string pattern = base + r.path;
      const std::string action = r.action;
      auto handler = [this, action](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { handle_action(action, req, res); });
      };
      if (r.method == "GET") {
        server.Get(pattern, handler);
      } else if (r.method == "POST") {
        server.Post(pattern, handler);
      } else {
        server.Put(pattern, handler);
      }
    }

    server.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
      send(res, 200, Json{{"status", "ok"}});
    });

    server.Get("/api/schema", [](const httplib::Request&, httplib::Response& res) {
      Json routes = Json::array();
      for (const auto& r : session_routes()) {
        routes.push_back(Json{{"method", r.method},
                              {"path", "/api/sessions/{session_id}" + r.path},
                              {"action", r.action},
                              {"mutating", Session::is_mutating(r.action)},
                              {"job", Session::is_long(r.action)}});
      }
      send(res, 200, Json{{"routes", routes}, {"workflow_schema", kWorkflowSchemaVersion},
                          {"export_schema", kExportSchemaVersion}});
    });

    server.Post("/api/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        std::string csv, label;
        Json body = Json::object();
        if (is_csv(req)) {
          csv = req.body;
          label = req.has_param("label_column") ? req.get_param_value("label_column") : "";
        } else {
          body = Json::parse(req.body);
          csv = body.at("csv").get<std::string>();
          label = body.value("label_column", std::string());
        }
        std::shared_ptr<Session> s = Session::from_csv(csv, label, session_options(body));
        const std::string sid = add(s);
        persist(sid, *s);
        Json summary = s->dispatch("summary", Json::object());
        send(res, 201, Json{{"session_id", sid}, {"summary", summary}});
      });
    });

    server.Post("/api/sessions/replay", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        WorkflowOverrides o;
        o.threads = options.session.threads;
        o.cache = options.session.cache;
        auto result = run_workflow(Json::parse(req.body), "", o);
        std::shared_ptr<Session> s(std::move(result.session));
        const std::string sid = add(s);
        persist(sid, *s);
        send(res, 201, Json{{"session_id", sid}, {"outputs", result.outputs}});
      });
    });

    server.Get("/api/sessions", [this](const httplib::Request&, httplib::Response& res) {
      std::lock_guard lock(sessions_mutex);
      Json ids = Json::array();
      for (const auto& [sid, _] : sessions) ids.push_back(sid);
      send(res, 200, Json{{"sessions", ids}});
    });

    server.Delete(R"(/api/sessions/([^/]+))", [this](const httplib::Request& req,
                                                     httplib::Response& res) {
      guarded(res, [&] {
        const std::string sid = req.matches[1];
        {
          std::lock_guard lock(sessions_mutex);
          require(sessions.erase(sid) > 0, "unknown session " + sid, ErrorCode::kNotFound);
        }
        if (!options.data_dir.empty()) fs::remove(journal_path(sid));
        send(res, 200, Json{{"deleted", sid}});
      });
    });

    server.Get(R"(/api/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send(res, 200, jobs->get(req.matches[1])->to_json()); });
    });
  }
};

Service::Service(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

Service::~Service() {
  stop();
  impl_->jobs.reset();
}

int Service::bind() {
  if (impl_->options.port == 0) {
    impl_->port = impl_->server.bind_to_any_port(impl_->options.host);
  } else {
    impl_->port = impl_->server.bind_to_port(impl_->options.host, impl_->options.port)
                      ? impl_->options.port
                      : -1;
  }
  require(impl_->port > 0, "could not bind " + impl_->options.host, ErrorCode::kIo);
  return impl_->port;
}

void Service::serve() {
  if (impl_->port <= 0) bind();
  impl_->server.listen_after_bind();
}

void Service::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

int Service::port() const { return impl_->port; }

}  // namespace stackgen
