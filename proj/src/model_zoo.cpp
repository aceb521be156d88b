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

#include "stackgen/model_zoo.hpp"

#include <algorithm>

#include "stackgen/dataset.hpp"

namespace stackgen {

namespace {

// Okabe-Ito plus a few Tableau tones; distinguishable under common forms of
// color blindness.
constexpr const char* kPalette[kNumAlgorithms] = {
    "#E69F00", "#56B4E9", "#009E73", "#F0E442", "#0072B2", "#D55E00",
    "#CC79A7", "#999999", "#000000", "#8C564B", "#17BECF"};

std::vector<Json> range_odd(int lo, int hi) {
  std::vector<Json> out;
  for (int k = lo; k <= hi; k += 2) out.emplace_back(k);
  return out;
}

AlgorithmSpec make_spec(Algorithm a,
                        std::vector<std::pair<std::string, std::vector<Json>>> grid) {
  return AlgorithmSpec{a, kPalette[static_cast<int>(a)], std::move(grid)};
}

void validate_spec(const AlgorithmSpec& spec) {
  const auto known = known_params(spec.algorithm);
  const std::string algo(algorithm_id(spec.algorithm));
  require(!spec.grid.empty(), "grid for " + algo + " is empty");
  std::set<std::string> seen;
  for (const auto& [name, values] : spec.grid) {
    require(std::find(known.begin(), known.end(), name) != known.end(),
            "unknown parameter '" + name + "' in grid for " + algo);
    require(seen.insert(name).second, "duplicate parameter '" + name + "' in grid for " + algo);
    require(!values.empty(), "parameter '" + name + "' of " + algo + " has no values");
  }
}

}  // namespace

std::size_t AlgorithmSpec::grid_size() const {
  std::size_t n = 1;
  for (const auto& axis : grid) n *= axis.second.size();
  return n;
}

std::uint64_t ModelSpec::content_hash() const {
  Fnv1a h;
  h.str(algorithm_id(algorithm)).str(params.dump()).u64(seed);
  return h.digest();
}

Json ModelSpec::to_json() const {
  return Json{{"model_id", id},
              {"algo_id", std::string(algorithm_id(algorithm))},
              {"params", params},
              {"seed", seed}};
}

bool ModelSpec::operator==(const ModelSpec& o) const {
  return id == o.id && algorithm == o.algorithm && params == o.params && seed == o.seed;
}

bool ParamConstraint::matches(const Json& value) const {
  if (values && std::find(values->begin(), values->end(), value) == values->end()) {
    return false;
  }
  if (min || max) {
    if (!value.is_number()) return false;
    const double v = value.get<double>();
    if (min && v < *min) return false;
    if (max && v > *max) return false;
  }
  return true;
}

PoolFilter parse_pool_filter(const Json& j) {
  PoolFilter out;
  if (j.is_null()) return out;
  require(j.is_object(), "filter must be an object keyed by algorithm id");
  for (const auto& [algo_id, params] : j.items()) {
    const Algorithm a = parse_algorithm(algo_id);
    require(params.is_object(), "filter for " + algo_id + " must be an object");
    const auto known = known_params(a);
    auto& slot = out[a];
    for (const auto& [name, c] : params.items()) {
      require(std::find(known.begin(), known.end(), name) != known.end(),
              "unknown parameter '" + name + "' for " + algo_id);
      require(c.is_object(), "constraint on " + algo_id + "." + name + " must be an object");
      ParamConstraint pc;
      for (const auto& [key, v] : c.items()) {
        if (key == "min") {
          pc.min = v.get<double>();
        } else if (key == "max") {
          pc.max = v.get<double>();
        } else if (key == "values") {
          require(v.is_array(), "values must be an array");
          pc.values = v.get<std::vector<Json>>();
        } else {
          fail(ErrorCode::kInvalidArgument, "unknown constraint key '" + key + "'");
        }
      }
      slot[name] = std::move(pc);
    }
  }
  return out;
}

ModelZoo ModelZoo::defaults() {
  using V = std::vector<Json>;
  const Json none = nullptr;
  ModelZoo zoo;
  zoo.specs_ = {
      make_spec(Algorithm::kKnn, {{"n_neighbors", range_odd(1, 49)},
                                  {"weights", V{"uniform", "distance"}},
                                  {"metric", V{"euclidean", "manhattan"}}}),
      make_spec(Algorithm::kSvc, {{"C", V{0.01, 0.1, 1.0, 10.0, 100.0}},
                                  {"kernel", V{"rbf", "linear"}}}),
      make_spec(Algorithm::kGauNb, {{"var_smoothing", V{1e-9, 1e-6, 1e-3}}}),
      make_spec(Algorithm::kMlp, {{"hidden_layer_sizes", V{10, 25, 50, 100}},
                                  {"alpha", V{1e-4, 1e-2, 1.0}},
                                  {"activation", V{"relu", "tanh"}}}),
      make_spec(Algorithm::kLr, {{"C", V{0.001, 0.01, 0.1, 1.0, 10.0, 100.0}}}),
      make_spec(Algorithm::kLda, {{"solver", V{"svd", "lsqr"}}}),
      make_spec(Algorithm::kQda, {{"reg_param", V{0.0, 0.01, 0.1, 0.5}}}),
      make_spec(Algorithm::kRf, {{"n_estimators", V{20, 60, 100}},
                                 {"max_depth", V{3, 5, 7, none}},
                                 {"criterion", V{"gini", "entropy"}},
                                 {"min_samples_leaf", V{1, 3, 5}}}),
      make_spec(Algorithm::kExtraT, {{"n_estimators", V{20, 60, 100}},
                                     {"max_depth", V{3, 5, 7, none}},
                                     {"criterion", V{"gini", "entropy"}},
                                     {"min_samples_leaf", V{1, 3, 5}}}),
      make_spec(Algorithm::kAdaB, {{"n_estimators", V{50, 100}},
                                   {"learning_rate", V{0.1, 0.5, 1.0}}}),
      make_spec(Algorithm::kGradB, {{"n_estimators", V{50, 100}},
                                    {"learning_rate", V{0.05, 0.1, 1.0}},
                                    {"max_depth", V{1, 2, 3, 4}}}),
  };
  return zoo;
}

ModelZoo ModelZoo::from_config(const Json& config) {
  ModelZoo zoo = defaults();
  require(config.is_object(), "grid config must be an object", ErrorCode::kSchemaInvalid);
  for (const auto& [key, _] : config.items()) {
    require(key == "grids", "unknown grid config key '" + key + "'", ErrorCode::kSchemaInvalid);
  }
  if (!config.contains("grids")) return zoo;
  const Json& grids = config.at("grids");
  require(grids.is_object(), "grids must be an object", ErrorCode::kSchemaInvalid);
  for (const auto& [algo_id, axes] : grids.items()) {
    const Algorithm a = parse_algorithm(algo_id);
    require(axes.is_object(), "grid for " + algo_id + " must be an object",
            ErrorCode::kSchemaInvalid);
    AlgorithmSpec& spec = zoo.specs_[static_cast<std::size_t>(a)];
    spec.grid.clear();
    for (const auto& [name, values] : axes.items()) {
      require(values.is_array(), "grid values for " + algo_id + "." + name + " must be a list",
              ErrorCode::kSchemaInvalid);
      spec.grid.emplace_back(name, values.get<std::vector<Json>>());
    }
    validate_spec(spec);
  }
  return zoo;
}

ModelZoo ModelZoo::from_config_file(const std::string& path) {
  const std::string text = read_file(path);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    fail(ErrorCode::kSchemaInvalid, "grid config " + path + ": " + e.what());
  }
  return from_config(j);
}

const AlgorithmSpec& ModelZoo::spec(Algorithm a) const {
  return specs_.at(static_cast<std::size_t>(a));
}

std::size_t ModelZoo::pool_size() const {
  std::size_t n = 0;
  for (const auto& s : specs_) n += s.grid_size();
  return n;
}

std::vector<ModelSpec> ModelZoo::enumerate_pool(const PoolFilter& filter,
                                                std::uint64_t seed) const {
  for (const auto& [a, constraints] : filter) {
    const auto& grid = spec(a).grid;
    for (const auto& [name, _] : constraints) {
      const bool in_grid = std::any_of(grid.begin(), grid.end(),
                                       [&](const auto& axis) { return axis.first == name; });
      const auto known = known_params(a);
      require(in_grid || std::find(known.begin(), known.end(), name) != known.end(),
              "unknown parameter '" + name + "' for " + std::string(algorithm_id(a)));
    }
  }

  std::vector<ModelSpec> out;
  ModelId next_id = 0;
  for (const auto& s : specs_) {
    const auto filt = filter.find(s.algorithm);
    const std::size_t total = s.grid_size();
    std::vector<std::size_t> idx(s.grid.size(), 0);
    for (std::size_t g = 0; g < total; ++g, ++next_id) {
      Json params = Json::object();
      for (std::size_t axis = 0; axis < s.grid.size(); ++axis) {
        params[s.grid[axis].first] = s.grid[axis].second[idx[axis]];
      }
      bool keep = true;
      if (filt != filter.end()) {
        for (const auto& [name, c] : filt->second) {
          // A constraint on a parameter outside the grid tests the learner's
          // default, which is not a grid value; treat it as unconstrained.
          if (params.contains(name) && !c.matches(params[name])) keep = false;
        }
      }
      if (keep) out.push_back(ModelSpec{next_id, s.algorithm, std::move(params), seed});
      // Odometer increment, last axis fastest.
      for (std::size_t axis = s.grid.size(); axis-- > 0;) {
        if (++idx[axis] < s.grid[axis].second.size()) break;
        idx[axis] = 0;
      }
    }
  }
  return out;
}

Json ModelZoo::to_json() const {
  Json out = Json::array();
  for (const auto& s : specs_) {
    Json grid = Json::array();
    for (const auto& [name, values] : s.grid) grid.push_back({{"param", name}, {"values", values}});
    out.push_back({{"algo_id", std::string(algorithm_id(s.algorithm))},
                   {"color", s.color},
                   {"grid", grid},
                   {"grid_size", s.grid_size()}});
  }
  return out;
}

std::vector<AlgorithmCoverage> algorithm_coverage(const std::set<ModelId>& selected,
                                                  const std::vector<ModelSpec>& pool) {
  std::map<ModelId, Algorithm> by_id;
  for (const auto& m : pool) by_id[m.id] = m.algorithm;
  std::array<AlgorithmCoverage, kNumAlgorithms> acc{};
  for (Algorithm a : kAllAlgorithms) acc[static_cast<std::size_t>(a)].algorithm = a;
  for (const auto& m : pool) ++acc[static_cast<std::size_t>(m.algorithm)].total_count;
  for (ModelId id : selected) {
    const auto it = by_id.find(id);
    require(it != by_id.end(), "unknown model id " + std::to_string(id), ErrorCode::kNotFound);
    ++acc[static_cast<std::size_t>(it->second)].selected_count;
  }
  std::vector<AlgorithmCoverage> out;
  for (auto& c : acc) {
    if (c.total_count == 0) continue;
    c.fraction = static_cast<double>(c.selected_count) / static_cast<double>(c.total_count);
    out.push_back(c);
  }
  return out;
}

}  // namespace stackgen
