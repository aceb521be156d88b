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

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stackgen/common.hpp"

namespace stackgen {

using SnapshotId = std::int64_t;

// Immutable table of instances. Labels are indices into class_names.
struct DatasetSnapshot {
  SnapshotId id = 0;
  std::optional<SnapshotId> parent;
  std::string provenance;
  Matrix X;
  std::vector<std::string> feature_names;
  Labels y;
  std::vector<std::string> class_names;

  Eigen::Index num_instances() const { return X.rows(); }
  Eigen::Index num_features() const { return X.cols(); }
  int num_classes() const { return static_cast<int>(class_names.size()); }

  std::vector<std::int64_t> class_counts() const;
  int feature_index(const std::string& name) const;

  // Hash of X, y, feature and class names; ignores id and provenance.
  std::uint64_t fingerprint() const;

  void validate() const;
};

using SnapshotPtr = std::shared_ptr<const DatasetSnapshot>;

struct CsvOptions {
  // Name of the label column; empty selects the last column.
  std::string label_column;
};

// Parses CSV text with a header row. Features must be numeric; rows with
// missing values are rejected with their 1-based line numbers. Class names
// are sorted lexicographically so label ids do not depend on row order.
DatasetSnapshot parse_csv(const std::string& text, const CsvOptions& options);
DatasetSnapshot load_csv(const std::string& path, const CsvOptions& options);

// Parses feature-only CSV (used for prediction input). Columns are matched by
// header name against `feature_names`; extra columns are ignored.
Matrix parse_feature_csv(const std::string& text,
                         const std::vector<std::string>& feature_names);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace stackgen
