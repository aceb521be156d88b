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

// Registry of algorithm families with their hyperparameter grids, and the
// candidate pool enumerated from them.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "stackgen/learners.hpp"
#include "stackgen/wrangler.hpp"

namespace stackgen {

struct AlgorithmSpec {
  Algorithm algorithm;
  std::string color;  // categorical hex token for the UI
  // Ordered parameter axes; the last axis varies fastest in the pool.
  std::vector<std::pair<std::string, std::vector<Json>>> grid;

  std::size_t grid_size() const;
};

struct ModelSpec {
  ModelId id = 0;
  Algorithm algorithm = Algorithm::kKnn;
  Json params = Json::object();
  std::uint64_t seed = 0;

  // Identity of the trained model apart from its id.
  std::uint64_t content_hash() const;
  Json to_json() const;
  bool operator==(const ModelSpec& other) const;
};

// Constraint on one parameter: an inclusive numeric range, an explicit set of
// allowed values, or both.
struct ParamConstraint {
  std::optional<double> min;
  std::optional<double> max;
  std::optional<std::vector<Json>> values;

  bool matches(const Json& value) const;
};

using PoolFilter = std::map<Algorithm, std::map<std::string, ParamConstraint>>;

// {"knn": {"n_neighbors": {"min": 5, "max": 10}}, "svc": {"kernel": {"values": []}}}
PoolFilter parse_pool_filter(const Json& j);

class ModelZoo {
 public:
  // Default grids for all eleven families.
  static ModelZoo defaults();
  // Replaces the grids of the algorithms named in `config`:
  // {"grids": {"<algo_id>": {"<param>": [values...]}}}. Axes read from a
  // config are ordered by parameter name.
  static ModelZoo from_config(const Json& config);
  static ModelZoo from_config_file(const std::string& path);

  const AlgorithmSpec& spec(Algorithm a) const;
  const std::vector<AlgorithmSpec>& specs() const { return specs_; }

  // Full pool in registry order (algorithm, then grid index). Ids are the
  // positions in the unfiltered pool, so filters never renumber models.
  std::vector<ModelSpec> enumerate_pool(const PoolFilter& filter = {},
                                        std::uint64_t seed = 0) const;
  std::size_t pool_size() const;

  Json to_json() const;

 private:
  std::vector<AlgorithmSpec> specs_;
};

struct AlgorithmCoverage {
  Algorithm algorithm;
  std::size_t selected_count = 0;
  std::size_t total_count = 0;
  double fraction = 0.0;
};

// One entry per algorithm present in `pool`, in registry order.
std::vector<AlgorithmCoverage> algorithm_coverage(const std::set<ModelId>& selected,
                                                  const std::vector<ModelSpec>& pool);

}  // namespace stackgen
