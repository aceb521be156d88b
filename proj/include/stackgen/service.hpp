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

#pragma once

// HTTP+JSON front end over sessions. Long actions run as jobs on a shared
// bounded queue and are polled for {done, total, phase}.

#include <memory>
#include <string>
#include <vector>

#include "stackgen/session.hpp"

namespace stackgen {

struct ServiceOptions {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 = ephemeral
  SessionOptions session;
  // When set, holds cache/ (evaluation results) and sessions/<id>.json
  // (replayable journals); sessions found there are restored on start.
  std::string data_dir;
  int workers = 2;
  std::size_t queue_limit = 16;
};

int http_status(ErrorCode code);

struct Route {
  std::string method;
  std::string path;  // below /api/sessions/{id}
  std::string action;
};
// The published route table.
const std::vector<Route>& session_routes();

class Service {
 public:
  explicit Service(ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds and returns the port.
  int bind();
  // Blocks until stop().
  void serve();
  void stop();
  int port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace stackgen
