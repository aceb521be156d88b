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

// Append-only session log. Each event carries a hash chained over all
// earlier events, so any rewrite of the past is detectable.

#include <optional>
#include <string>
#include <vector>

#include "stackgen/stacker.hpp"

namespace stackgen {

enum class HistoryEventKind { kStep, kStore };

struct HistoryEvent {
  std::size_t seq = 0;
  HistoryEventKind kind = HistoryEventKind::kStep;
  std::string label;
  StackPerformance performance;
  std::size_t model_count = 0;
  std::string stack_id;  // kStore only
  std::uint64_t hash = 0;

  Json to_json() const;
};

struct ComparisonPoint {
  std::size_t step_index = 0;  // 1-based
  std::string label;
  StackPerformance active;
  std::optional<StackPerformance> stored;
  std::optional<std::string> stored_id;
};

struct StackSummary {
  std::string id;
  std::optional<std::string> parent;
  StackPerformance fractions;
  std::size_t model_count = 0;
  std::vector<Algorithm> algorithms_used;
};

class History {
 public:
  // Adopts previously recorded events as-is; verify_chain() tells whether
  // they are intact.
  static History from_events(std::vector<HistoryEvent> events);

  // Returns the 1-based step index.
  std::size_t record_step(std::string label, const StackPerformance& active,
                          std::size_t model_count);
  // Attaches to the latest step; throws kConflict when there is none.
  void record_store(const StackRecord& record);

  const std::vector<HistoryEvent>& events() const { return events_; }
  std::size_t num_steps() const { return num_steps_; }
  std::uint64_t head_hash() const { return events_.empty() ? 0 : events_.back().hash; }

  std::vector<ComparisonPoint> comparison_series() const;
  bool verify_chain() const;

  Json to_json() const;

 private:
  void append(HistoryEvent e);

  std::vector<HistoryEvent> events_;
  std::size_t num_steps_ = 0;
};

std::vector<StackSummary> stack_summaries(const StackStore& store);

Json comparison_series_to_json(const std::vector<ComparisonPoint>& series);
Json stack_summaries_to_json(const std::vector<StackSummary>& summaries);

std::uint64_t event_hash(const HistoryEvent& e, std::uint64_t previous);

}  // namespace stackgen
