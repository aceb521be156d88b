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

#include "stackgen/wrangler.hpp"

#include <algorithm>

#include "stackgen/eval_engine.hpp"

namespace stackgen {

namespace {

void check_indices(const DatasetSnapshot& s, const IndexSet& indices) {
  for (auto i : indices) {
    require(i >= 0 && i < s.num_instances(),
            "instance index " + std::to_string(i) + " out of range");
  }
}

std::string describe(std::string_view op, const IndexSet& indices) {
  std::string out(op);
  out += " [";
  bool first = true;
  for (auto i : indices) {
    if (!first) out += ",";
    out += std::to_string(i);
    first = false;
  }
  return out + "]";
}

// Per-feature aggregate of the selected rows; requires a single shared label.
std::pair<Vector, int> aggregate(const DatasetSnapshot& s,
                                 const IndexSet& indices, MergeMode mode) {
  require(!indices.empty(), "no instances selected");
  check_indices(s, indices);
  const int label = s.y[static_cast<std::size_t>(*indices.begin())];
  for (auto i : indices) {
    require(s.y[static_cast<std::size_t>(i)] == label,
            "selected instances span more than one class");
  }
  Vector row(s.num_features());
  std::vector<double> column;
  for (Eigen::Index j = 0; j < s.num_features(); ++j) {
    column.clear();
    for (auto i : indices) column.push_back(s.X(i, j));
    if (mode == MergeMode::kMean) {
      double sum = 0.0;
      for (double v : column) sum += v;
      row(j) = sum / static_cast<double>(column.size());
    } else {
      std::sort(column.begin(), column.end());
      const std::size_t n = column.size();
      row(j) = n % 2 == 1 ? column[n / 2]
                          : 0.5 * (column[n / 2 - 1] + column[n / 2]);
    }
  }
  return {row, label};
}

DatasetSnapshot with_rows(const DatasetSnapshot& s,
                          const std::vector<Eigen::Index>& keep,
                          const std::vector<std::pair<Vector, int>>& appended,
                          std::string provenance) {
  DatasetSnapshot out;
  out.provenance = std::move(provenance);
  out.feature_names = s.feature_names;
  out.class_names = s.class_names;
  const auto n = static_cast<Eigen::Index>(keep.size() + appended.size());
  out.X.resize(n, s.num_features());
  out.y.reserve(static_cast<std::size_t>(n));
  Eigen::Index r = 0;
  for (auto i : keep) {
    out.X.row(r++) = s.X.row(i);
    out.y.push_back(s.y[static_cast<std::size_t>(i)]);
  }
  for (const auto& [row, label] : appended) {
    out.X.row(r++) = row.transpose();
    out.y.push_back(label);
  }
  return out;
}

}  // namespace

MergeMode parse_merge_mode(std::string_view id) {
  if (id == "mean") return MergeMode::kMean;
  if (id == "median") return MergeMode::kMedian;
  fail(ErrorCode::kInvalidArgument, "unknown merge mode '" + std::string(id) + "'");
}

std::string_view merge_mode_id(MergeMode mode) {
  return mode == MergeMode::kMean ? "mean" : "median";
}

DatasetSnapshot remove_instances(const DatasetSnapshot& snapshot,
                                 const IndexSet& indices, int min_per_class) {
  check_indices(snapshot, indices);
  std::vector<Eigen::Index> keep;
  std::vector<std::int64_t> counts(snapshot.class_names.size(), 0);
  for (Eigen::Index i = 0; i < snapshot.num_instances(); ++i) {
    if (indices.count(i)) continue;
    keep.push_back(i);
    ++counts[static_cast<std::size_t>(snapshot.y[static_cast<std::size_t>(i)])];
  }
  const auto before = snapshot.class_counts();
  int represented = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] > 0) ++represented;
    if (before[c] > 0) {
      require(counts[c] > 0, "removal would empty class '" +
                                 snapshot.class_names[c] + "'");
      require(counts[c] >= min_per_class,
              "removal would leave class '" + snapshot.class_names[c] +
                  "' with fewer than " + std::to_string(min_per_class) +
                  " instances (one per fold)");
    }
  }
  require(represented >= 2, "removal would leave fewer than two classes");
  return with_rows(snapshot, keep, {}, describe("remove", indices));
}

DatasetSnapshot merge_instances(const DatasetSnapshot& snapshot,
                                const IndexSet& indices, MergeMode mode) {
  require(indices.size() >= 2, "merge needs at least two instances");
  auto merged = aggregate(snapshot, indices, mode);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < snapshot.num_instances(); ++i) {
    if (!indices.count(i)) keep.push_back(i);
  }
  return with_rows(snapshot, keep, {merged},
                   describe(std::string("merge-") + std::string(merge_mode_id(mode)),
                            indices));
}

DatasetSnapshot compose_instance(const DatasetSnapshot& snapshot,
                                 const IndexSet& indices, MergeMode mode) {
  auto composed = aggregate(snapshot, indices, mode);
  std::vector<Eigen::Index> keep(static_cast<std::size_t>(snapshot.num_instances()));
  for (Eigen::Index i = 0; i < snapshot.num_instances(); ++i) {
    keep[static_cast<std::size_t>(i)] = i;
  }
  return with_rows(
      snapshot, keep, {composed},
      describe(std::string("compose-") + std::string(merge_mode_id(mode)), indices));
}

WrangleHistory::WrangleHistory(DatasetSnapshot initial) {
  initial.validate();
  initial.id = 0;
  initial.parent.reset();
  snapshots_.push_back(std::make_shared<const DatasetSnapshot>(std::move(initial)));
}

SnapshotPtr WrangleHistory::get(SnapshotId id) const {
  if (id < 0 || id >= static_cast<SnapshotId>(snapshots_.size())) {
    fail(ErrorCode::kNotFound, "unknown snapshot id " + std::to_string(id));
  }
  return snapshots_[static_cast<std::size_t>(id)];
}

SnapshotPtr WrangleHistory::apply(DatasetSnapshot next) {
  next.validate();
  next.id = static_cast<SnapshotId>(snapshots_.size());
  next.parent = active()->id;
  snapshots_.push_back(std::make_shared<const DatasetSnapshot>(std::move(next)));
  active_index_ = snapshots_.size() - 1;
  return snapshots_.back();
}

void WrangleHistory::restore(SnapshotId id) {
  active_index_ = static_cast<std::size_t>(get(id)->id);
}

std::vector<SnapshotId> WrangleHistory::children(SnapshotId id) const {
  get(id);
  std::vector<SnapshotId> out;
  for (const auto& s : snapshots_) {
    if (s->parent && *s->parent == id) out.push_back(s->id);
  }
  return out;
}

std::vector<double> instance_difficulty(const DatasetSnapshot& snapshot,
                                        const EvaluationRun& run,
                                        const std::vector<ModelId>& stack_models) {
  require(!stack_models.empty(), "stack has no models");
  require(run.snapshot_fingerprint == snapshot.fingerprint(),
          "evaluation run does not match the snapshot");
  const auto n = static_cast<std::size_t>(snapshot.num_instances());
  std::vector<double> wrong(n, 0.0);
  for (ModelId id : stack_models) {
    const ModelRecord& rec = run.record(id);
    require(!rec.failed, "model " + std::to_string(id) + " failed to train");
    for (std::size_t i = 0; i < n; ++i) {
      if (rec.oof_pred[i] != snapshot.y[i]) wrong[i] += 1.0;
    }
  }
  for (double& w : wrong) w /= static_cast<double>(stack_models.size());
  return wrong;
}

}  // namespace stackgen
