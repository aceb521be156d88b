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

// 2D embeddings of the data, models' and predictions' spaces. Every method
// works from a precomputed distance matrix.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "stackgen/eval_engine.hpp"

namespace stackgen {

enum class ProjectionMethod { kMds, kTsne, kUmap };
enum class Space { kData, kModels, kPredictions };

std::string_view projection_method_id(ProjectionMethod m);
ProjectionMethod parse_projection_method(std::string_view id);
std::string_view space_id(Space s);

struct ProjectionResult {
  Space space = Space::kData;
  ProjectionMethod method = ProjectionMethod::kMds;  // method actually used
  std::uint64_t seed = 0;
  Matrix coords;  // M x 2
  std::vector<double> point_scalar;
  std::string scalar_semantic;
  std::optional<Labels> point_class;
  std::vector<ModelId> model_ids;  // models' space only
  std::vector<std::string> notices;
};

Matrix pairwise_euclidean(const Matrix& X);
// Fraction of positions where two rows differ. Each row of `codes` is one
// point's vector of predicted labels.
Matrix pairwise_hamming(const Eigen::MatrixXi& codes);

// Classical scaling. Axis signs are fixed so the largest-magnitude
// coordinate of each axis is positive.
Matrix classical_mds(const Matrix& distances, int dims = 2);

struct TsneOptions {
  double perplexity = 30.0;  // clamped to (M - 1) / 3
  int iterations = 1000;
  double early_exaggeration = 12.0;
  int exaggeration_iterations = 250;
};
Matrix tsne(const Matrix& distances, std::uint64_t seed, const TsneOptions& options = {});

struct UmapOptions {
  int neighbors = 15;  // clamped to M - 1
  int epochs = 300;
  double a = 1.577;
  double b = 0.8951;
  int negative_samples = 5;
};
Matrix umap(const Matrix& distances, std::uint64_t seed, const UmapOptions& options = {});

// Dispatches on `method`; t-SNE and UMAP on fewer than four points fall back
// to MDS and append a notice.
Matrix embed(const Matrix& distances, ProjectionMethod method, std::uint64_t seed,
             ProjectionMethod* used, std::vector<std::string>* notices);

// Standardized feature rows; point_scalar = difficulty.
ProjectionResult project_data_space(const DatasetSnapshot& snapshot, ProjectionMethod method,
                                    const std::vector<double>& difficulty, std::uint64_t seed);

struct ModelSpaceResult {
  ProjectionResult projection;
  PerMetric<BoxStats> metric_boxes;
};

// Rows are weight/100 * normalized metric; point_scalar is the combined
// score, or the normalized value of `color_metric` when given.
Matrix model_space_vectors(const EvaluationRun& run, const std::vector<ModelId>& models,
                           const MetricConfig& config);
ModelSpaceResult project_model_space(const EvaluationRun& run,
                                     const std::vector<ModelId>& models,
                                     std::optional<Metric> color_metric,
                                     const MetricConfig& config, ProjectionMethod method,
                                     std::uint64_t seed);

// Instances as vectors of the stack models' out-of-fold labels, compared by
// Hamming fraction.
ProjectionResult project_prediction_space(const DatasetSnapshot& snapshot,
                                          const EvaluationRun& run,
                                          const std::vector<ModelId>& stack_models,
                                          ProjectionMethod method, std::uint64_t seed);

inline constexpr int kHistogramBins = 20;
// Left-closed 5% bins; a score of exactly 1 falls in the last bin.
int score_bin(double score);

struct ScoreHistograms {
  std::array<int, kHistogramBins> selected{};
  std::array<int, kHistogramBins> all{};
  std::vector<double> selected_scores;
  std::vector<double> all_scores;
};

// Weighted score of each model on the selected instances versus all.
ScoreHistograms model_score_histograms(const DatasetSnapshot& snapshot,
                                       const EvaluationRun& run,
                                       const std::vector<ModelId>& stack_models,
                                       const IndexSet& selected_instances,
                                       const MetricConfig& config);

}  // namespace stackgen
