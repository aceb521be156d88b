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

// The eleven base-learner families and the masked, standardized pipeline
// wrapped around each of them.

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "stackgen/common.hpp"

namespace stackgen {

using Json = nlohmann::json;

enum class Algorithm : int {
  kKnn = 0,
  kSvc,
  kGauNb,
  kMlp,
  kLr,
  kLda,
  kQda,
  kRf,
  kExtraT,
  kAdaB,
  kGradB,
};

inline constexpr std::size_t kNumAlgorithms = 11;
inline constexpr std::array<Algorithm, kNumAlgorithms> kAllAlgorithms = {
    Algorithm::kKnn, Algorithm::kSvc,    Algorithm::kGauNb, Algorithm::kMlp,
    Algorithm::kLr,  Algorithm::kLda,    Algorithm::kQda,   Algorithm::kRf,
    Algorithm::kExtraT, Algorithm::kAdaB, Algorithm::kGradB};

std::string_view algorithm_id(Algorithm a);
Algorithm parse_algorithm(std::string_view id);

// A fitted or unfitted classifier. `predict_proba` returns an N x C
// row-stochastic matrix over the class universe given to `fit`.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual void fit(const Matrix& X, std::span<const int> y, int num_classes) = 0;
  virtual Matrix predict_proba(const Matrix& X) const = 0;

  // Fitted parameters as JSON, sufficient to restore predictions exactly.
  virtual Json state() const = 0;
  virtual void load_state(const Json& state) = 0;
};

// Builds an unfitted classifier. Unknown parameter names are rejected.
std::unique_ptr<Classifier> make_classifier(Algorithm algorithm,
                                            const Json& params,
                                            std::uint64_t seed);

// Parameter names each family understands.
std::vector<std::string> known_params(Algorithm algorithm);

// Column subset -> z-score -> classifier. Column statistics come from the
// training rows only.
class BaseModel {
 public:
  BaseModel(Algorithm algorithm, Json params, std::uint64_t seed,
            std::vector<bool> feature_mask);

  void fit(const Matrix& X, std::span<const int> y, int num_classes);
  Matrix predict_proba(const Matrix& X) const;

  Algorithm algorithm() const { return algorithm_; }
  const Json& params() const { return params_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<bool>& feature_mask() const { return mask_; }
  int num_classes() const { return num_classes_; }

  Json save() const;
  static BaseModel load(const Json& doc);

 private:
  Matrix transform(const Matrix& X) const;

  Algorithm algorithm_;
  Json params_;
  std::uint64_t seed_;
  std::vector<bool> mask_;
  std::vector<Eigen::Index> columns_;
  Vector mean_;
  Vector scale_;
  int num_classes_ = 0;
  std::unique_ptr<Classifier> classifier_;
};

// Row-wise argmax; ties resolve to the lowest class index.
Labels argmax_rows(const Matrix& proba);

}  // namespace stackgen
