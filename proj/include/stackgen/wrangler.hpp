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

#include <set>
#include <string_view>
#include <vector>

#include "stackgen/dataset.hpp"

namespace stackgen {

struct EvaluationRun;
using ModelId = std::int64_t;
using IndexSet = std::set<Eigen::Index>;

enum class MergeMode { kMean, kMedian };

MergeMode parse_merge_mode(std::string_view id);
std::string_view merge_mode_id(MergeMode mode);

// Instance operations. Each returns a fresh snapshot (id and parent unset)
// and never touches its input. Survivors keep their relative order; new rows
// are appended at the end.

// Rejects removals that would leave fewer than `min_per_class` instances in
// any class, or fewer than two classes.
DatasetSnapshot remove_instances(const DatasetSnapshot& snapshot,
                                 const IndexSet& indices, int min_per_class);

// Replaces the selected rows (all of one class, at least two) by their
// per-feature mean or median.
DatasetSnapshot merge_instances(const DatasetSnapshot& snapshot,
                                const IndexSet& indices, MergeMode mode);

// Appends the per-feature mean or median of the selected rows; originals stay.
DatasetSnapshot compose_instance(const DatasetSnapshot& snapshot,
                                 const IndexSet& indices, MergeMode mode);

// Append-only history of snapshots with one active entry. Restoring a
// snapshot only moves the active pointer, so later operations fork a new
// branch from it.
class WrangleHistory {
 public:
  explicit WrangleHistory(DatasetSnapshot initial);

  const SnapshotPtr& active() const { return snapshots_[active_index_]; }
  SnapshotPtr get(SnapshotId id) const;
  const std::vector<SnapshotPtr>& snapshots() const { return snapshots_; }

  // Records `next` as a child of the active snapshot and activates it.
  SnapshotPtr apply(DatasetSnapshot next);
  void restore(SnapshotId id);

  std::vector<SnapshotId> children(SnapshotId id) const;

 private:
  std::vector<SnapshotPtr> snapshots_;
  std::size_t active_index_ = 0;
};

// Fraction of `stack_models` whose out-of-fold prediction for an instance is
// wrong. 0 means every stack model is right.
std::vector<double> instance_difficulty(const DatasetSnapshot& snapshot,
                                        const EvaluationRun& run,
                                        const std::vector<ModelId>& stack_models);

}  // namespace stackgen
