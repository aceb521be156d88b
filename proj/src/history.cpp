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

#include "stackgen/history.hpp"

namespace stackgen {

std::uint64_t event_hash(const HistoryEvent& e, std::uint64_t previous) {
  Fnv1a h;
  h.u64(previous).u64(e.seq).u64(static_cast<std::uint64_t>(e.kind)).str(e.label);
  for (double v : e.performance.as_array()) h.f64(v);
  h.u64(e.model_count).str(e.stack_id);
  return h.digest();
}

Json HistoryEvent::to_json() const {
  return Json{{"seq", seq},
              {"kind", kind == HistoryEventKind::kStep ? "step" : "store"},
              {"label", label},
              {"performance", performance_to_json(performance)},
              {"model_count", model_count},
              {"stack_id", stack_id},
              {"hash", to_hex(hash)}};
}

History History::from_events(std::vector<HistoryEvent> events) {
  History h;
  for (const auto& e : events) {
    if (e.kind == HistoryEventKind::kStep) ++h.num_steps_;
  }
  h.events_ = std::move(events);
  return h;
}

void History::append(HistoryEvent e) {
  e.seq = events_.size();
  e.hash = event_hash(e, head_hash());
  events_.push_back(std::move(e));
}

std::size_t History::record_step(std::string label, const StackPerformance& active,
                                 std::size_t model_count) {
  HistoryEvent e;
  e.kind = HistoryEventKind::kStep;
  e.label = std::move(label);
  e.performance = active;
  e.model_count = model_count;
  append(std::move(e));
  return ++num_steps_;
}

void History::record_store(const StackRecord& record) {
  require(num_steps_ > 0, "no step to attach the stored stack to", ErrorCode::kConflict);
  HistoryEvent e;
  e.kind = HistoryEventKind::kStore;
  e.label = record.id;
  e.performance = record.performance;
  e.model_count = record.model_ids.size();
  e.stack_id = record.id;
  append(std::move(e));
}

std::vector<ComparisonPoint> History::comparison_series() const {
  std::vector<ComparisonPoint> out;
  for (const auto& e : events_) {
    if (e.kind == HistoryEventKind::kStep) {
      ComparisonPoint p;
      p.step_index = out.size() + 1;
      p.label = e.label;
      p.active = e.performance;
      out.push_back(std::move(p));
    } else if (!out.empty()) {
      out.back().stored = e.performance;
      out.back().stored_id = e.stack_id;
    }
  }
  return out;
}

bool History::verify_chain() const {
  std::uint64_t prev = 0;
  for (std::size_t i = 0; i < events_.size(); ++i) {
    if (events_[i].seq != i || event_hash(events_[i], prev) != events_[i].hash) return false;
    prev = events_[i].hash;
  }
  return true;
}

Json History::to_json() const {
  Json events = Json::array();
  for (const auto& e : events_) events.push_back(e.to_json());
  return Json{{"events", events},
              {"head_hash", to_hex(head_hash())},
              {"series", comparison_series_to_json(comparison_series())}};
}

std::vector<StackSummary> stack_summaries(const StackStore& store) {
  std::vector<StackSummary> out;
  for (const auto& r : store.records()) {
    out.push_back(StackSummary{r.id, r.parent, r.performance, r.model_ids.size(),
                               r.algorithms_used()});
  }
  return out;
}

Json comparison_series_to_json(const std::vector<ComparisonPoint>& series) {
  Json out = Json::array();
  for (const auto& p : series) {
    out.push_back(Json{{"step_index", p.step_index},
                       {"label", p.label},
                       {"active", performance_to_json(p.active)},
                       {"stored", p.stored ? performance_to_json(*p.stored) : Json(nullptr)},
                       {"stored_id", p.stored_id ? Json(*p.stored_id) : Json(nullptr)}});
  }
  return out;
}

Json stack_summaries_to_json(const std::vector<StackSummary>& summaries) {
  Json out = Json::array();
  for (const auto& s : summaries) {
    Json algos = Json::array();
    for (Algorithm a : s.algorithms_used) algos.push_back(algorithm_id(a));
    out.push_back(Json{{"stack_id", s.id},
                       {"parent", s.parent ? Json(*s.parent) : Json(nullptr)},
                       {"fractions", performance_to_json(s.fractions)},
                       {"model_count", s.model_count},
                       {"algorithms_used", algos}});
  }
  return out;
}

}  // namespace stackgen
