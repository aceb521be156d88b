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

#include "stackgen/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace stackgen {

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(field));
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(trim(field));
  return out;
}

bool is_missing(const std::string& s) {
  return s.empty() || s == "?" || s == "NA" || s == "NaN" || s == "nan";
}

std::optional<double> parse_number(const std::string& s) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  if (!s.empty() && s.front() == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
};

CsvTable split_table(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    t.rows.push_back(std::move(fields));
    t.line_numbers.push_back(line_no);
  }
  require(!t.header.empty(), "CSV has no header row");
  return t;
}

}  // namespace

std::vector<std::int64_t> DatasetSnapshot::class_counts() const {
  std::vector<std::int64_t> counts(class_names.size(), 0);
  for (int label : y) ++counts[static_cast<std::size_t>(label)];
  return counts;
}

int DatasetSnapshot::feature_index(const std::string& name) const {
  auto it = std::find(feature_names.begin(), feature_names.end(), name);
  if (it == feature_names.end()) {
    fail(ErrorCode::kNotFound, "unknown feature '" + name + "'");
  }
  return static_cast<int>(it - feature_names.begin());
}

std::uint64_t DatasetSnapshot::fingerprint() const {
  Fnv1a h;
  h.u64(static_cast<std::uint64_t>(X.rows())).u64(static_cast<std::uint64_t>(X.cols()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) h.f64(X(i, j));
  }
  for (int label : y) h.u64(static_cast<std::uint64_t>(label));
  for (const auto& f : feature_names) h.str(f);
  for (const auto& c : class_names) h.str(c);
  return h.digest();
}

void DatasetSnapshot::validate() const {
  require(X.rows() == static_cast<Eigen::Index>(y.size()),
          "label count does not match instance count");
  require(X.cols() == static_cast<Eigen::Index>(feature_names.size()),
          "feature name count does not match column count");
  require(X.allFinite(), "dataset contains missing or non-finite values");
  std::set<std::string> unique(feature_names.begin(), feature_names.end());
  require(unique.size() == feature_names.size(), "feature names must be unique");
  int represented = 0;
  for (auto c : class_counts()) represented += c > 0 ? 1 : 0;
  require(represented >= 2, "dataset must contain at least two classes");
}

DatasetSnapshot parse_csv(const std::string& text, const CsvOptions& options) {
  CsvTable t = split_table(text);
  const std::size_t width = t.header.size();
  require(width >= 2, "CSV needs at least one feature and a label column");

  std::size_t label_col = width - 1;
  if (!options.label_column.empty()) {
    auto it = std::find(t.header.begin(), t.header.end(), options.label_column);
    require(it != t.header.end(),
            "label column '" + options.label_column + "' not found in header");
    label_col = static_cast<std::size_t>(it - t.header.begin());
  }

  std::vector<std::size_t> missing_lines;
  std::set<std::string> labels;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    require(row.size() == width, "line " + std::to_string(t.line_numbers[r]) +
                                     ": expected " + std::to_string(width) +
                                     " fields, got " + std::to_string(row.size()));
    bool missing = false;
    for (const auto& field : row) missing = missing || is_missing(field);
    if (missing) missing_lines.push_back(t.line_numbers[r]);
    labels.insert(row[label_col]);
  }
  if (!missing_lines.empty()) {
    std::string msg = "rows with missing values at lines";
    for (auto l : missing_lines) msg += " " + std::to_string(l);
    fail(ErrorCode::kInvalidArgument, msg);
  }

  DatasetSnapshot s;
  s.provenance = "load";
  s.class_names.assign(labels.begin(), labels.end());
  for (std::size_t c = 0; c < width; ++c) {
    if (c != label_col) s.feature_names.push_back(t.header[c]);
  }
  s.X.resize(static_cast<Eigen::Index>(t.rows.size()),
             static_cast<Eigen::Index>(width - 1));
  s.y.resize(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    Eigen::Index j = 0;
    for (std::size_t c = 0; c < width; ++c) {
      if (c == label_col) continue;
      auto v = parse_number(row[c]);
      require(v.has_value(), "line " + std::to_string(t.line_numbers[r]) +
                                 ": non-numeric value '" + row[c] +
                                 "' in feature '" + t.header[c] + "'");
      s.X(static_cast<Eigen::Index>(r), j++) = *v;
    }
    s.y[r] = static_cast<int>(
        std::distance(labels.begin(), labels.find(row[label_col])));
  }
  s.validate();
  return s;
}

DatasetSnapshot load_csv(const std::string& path, const CsvOptions& options) {
  return parse_csv(read_file(path), options);
}

Matrix parse_feature_csv(const std::string& text,
                         const std::vector<std::string>& feature_names) {
  CsvTable t = split_table(text);
  std::vector<std::size_t> cols;
  for (const auto& name : feature_names) {
    auto it = std::find(t.header.begin(), t.header.end(), name);
    require(it != t.header.end(), "feature column '" + name + "' missing from CSV");
    cols.push_back(static_cast<std::size_t>(it - t.header.begin()));
  }
  Matrix X(static_cast<Eigen::Index>(t.rows.size()),
           static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    require(row.size() == t.header.size(),
            "line " + std::to_string(t.line_numbers[r]) + ": wrong field count");
    for (std::size_t j = 0; j < cols.size(); ++j) {
      auto v = parse_number(row[cols[j]]);
      require(v.has_value(), "line " + std::to_string(t.line_numbers[r]) +
                                 ": non-numeric or missing value in '" +
                                 feature_names[j] + "'");
      X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = *v;
    }
  }
  return X;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path + "'");
  out << contents;
}

}  // namespace stackgen
