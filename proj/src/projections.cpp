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

#include "stackgen/projections.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>

namespace stackgen {

std::string_view projection_method_id(ProjectionMethod m) {
  switch (m) {
    case ProjectionMethod::kMds: return "mds";
    case ProjectionMethod::kTsne: return "tsne";
    case ProjectionMethod::kUmap: return "umap";
  }
  return "";
}

ProjectionMethod parse_projection_method(std::string_view id) {
  for (auto m : {ProjectionMethod::kMds, ProjectionMethod::kTsne, ProjectionMethod::kUmap}) {
    if (projection_method_id(m) == id) return m;
  }
  fail(ErrorCode::kInvalidArgument, "unknown projection method '" + std::string(id) + "'");
}

std::string_view space_id(Space s) {
  switch (s) {
    case Space::kData: return "data";
    case Space::kModels: return "models";
    case Space::kPredictions: return "predictions";
  }
  return "";
}

Matrix pairwise_euclidean(const Matrix& X) {
  const Eigen::Index n = X.rows();
  Matrix D = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      D(i, j) = D(j, i) = (X.row(i) - X.row(j)).norm();
    }
  }
  return D;
}

Matrix pairwise_hamming(const Eigen::MatrixXi& codes) {
  const Eigen::Index n = codes.rows(), m = codes.cols();
  require(m >= 1, "prediction vectors are empty");
  Matrix D = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      Eigen::Index diff = 0;
      for (Eigen::Index k = 0; k < m; ++k) diff += codes(i, k) != codes(j, k) ? 1 : 0;
      D(i, j) = D(j, i) = static_cast<double>(diff) / static_cast<double>(m);
    }
  }
  return D;
}

Matrix classical_mds(const Matrix& distances, int dims) {
  const Eigen::Index n = distances.rows();
  require(distances.cols() == n, "distance matrix must be square");
  Matrix out = Matrix::Zero(n, dims);
  if (n == 0) return out;
  const Matrix D2 = distances.array().square().matrix();
  const Vector row_mean = D2.rowwise().mean();
  const Vector col_mean = D2.colwise().mean().transpose();
  const double grand = D2.mean();
  Matrix B(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      B(i, j) = -0.5 * (D2(i, j) - row_mean(i) - col_mean(j) + grand);
    }
  }
  B = (0.5 * (B + B.transpose())).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(B);
  const Vector& lambda = eig.eigenvalues();  // ascending
  for (int k = 0; k < dims && k < n; ++k) {
    const Eigen::Index idx = n - 1 - k;
    const double l = lambda(idx);
    if (l <= 1e-12 * std::max(1.0, std::abs(lambda(n - 1)))) continue;
    Vector v = eig.eigenvectors().col(idx);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    out.col(k) = v * std::sqrt(l);
  }
  return out;
}

namespace {

Matrix scaled_mds_init(const Matrix& distances, double target_std, std::uint64_t seed) {
  Matrix Y = classical_mds(distances, 2);
  const double mean0 = Y.col(0).mean();
  const double sd = std::sqrt((Y.col(0).array() - mean0).square().mean());
  Rng rng(seed);
  if (sd > 0.0) {
    Y *= target_std / sd;
  } else {
    for (Eigen::Index i = 0; i < Y.size(); ++i) Y.data()[i] = target_std * rng.normal();
  }
  return Y;
}

// Row-wise Gaussian affinities matched to a perplexity by bisection on the
// precision.
Matrix conditional_affinities(const Matrix& D2, double perplexity) {
  const Eigen::Index n = D2.rows();
  const double target = std::log(perplexity);
  Matrix P = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 200; ++iter) {
      double sum = 0.0, weighted = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const double p = std::exp(-D2(i, j) * beta);
        P(i, j) = p;
        sum += p;
        weighted += D2(i, j) * p;
      }
      if (sum <= 0.0) sum = 1e-300;
      const double entropy = std::log(sum) + beta * weighted / sum;
      for (Eigen::Index j = 0; j < n; ++j) P(i, j) /= sum;
      const double diff = entropy - target;
      if (std::abs(diff) < 1e-5) break;
      if (diff > 0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
    }
    P(i, i) = 0.0;
  }
  return P;
}

}  // namespace

Matrix tsne(const Matrix& distances, std::uint64_t seed, const TsneOptions& options) {
  const Eigen::Index n = distances.rows();
  require(n >= 2, "t-SNE needs at least two points");
  const double perplexity =
      std::max(1.0, std::min(options.perplexity, static_cast<double>(n - 1) / 3.0));
  const Matrix D2 = distances.array().square().matrix();
  Matrix P = conditional_affinities(D2, perplexity);
  P = ((P + P.transpose()) / (2.0 * static_cast<double>(n))).eval();
  P = P.cwiseMax(1e-12);
  P.diagonal().setZero();

  Matrix Y = scaled_mds_init(distances, 1e-4, seed);
  Matrix update = Matrix::Zero(n, 2), gains = Matrix::Ones(n, 2), grad(n, 2);
  const double lr = std::max(static_cast<double>(n) / options.early_exaggeration / 4.0, 50.0);
  Matrix num(n, n);
  for (int it = 0; it < options.iterations; ++it) {
    const bool early = it < options.exaggeration_iterations;
    const double exag = early ? options.early_exaggeration : 1.0;
    const double momentum = early ? 0.5 : 0.8;
    double qsum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      num(i, i) = 0.0;
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double dx = Y(i, 0) - Y(j, 0), dy = Y(i, 1) - Y(j, 1);
        const double q = 1.0 / (1.0 + dx * dx + dy * dy);
        num(i, j) = num(j, i) = q;
        qsum += 2.0 * q;
      }
    }
    qsum = std::max(qsum, 1e-300);
    grad.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i == j) continue;
        const double coeff = (exag * P(i, j) - num(i, j) / qsum) * num(i, j);
        grad(i, 0) += coeff * (Y(i, 0) - Y(j, 0));
        grad(i, 1) += coeff * (Y(i, 1) - Y(j, 1));
      }
    }
    grad *= 4.0;
    for (Eigen::Index k = 0; k < Y.size(); ++k) {
      double& g = gains.data()[k];
      const bool same = (update.data()[k] > 0) == (grad.data()[k] > 0);
      g = same ? std::max(g * 0.8, 0.01) : g + 0.2;
      update.data()[k] = momentum * update.data()[k] - lr * g * grad.data()[k];
      Y.data()[k] += update.data()[k];
    }
  }
  Y.rowwise() -= Y.colwise().mean();
  return Y;
}

Matrix umap(const Matrix& distances, std::uint64_t seed, const UmapOptions& options) {
  const Eigen::Index n = distances.rows();
  require(n >= 2, "UMAP needs at least two points");
  const int k = std::max(1, std::min<int>(options.neighbors, static_cast<int>(n - 1)));
  const double target = std::log2(static_cast<double>(k));

  // Fuzzy k-nearest-neighbor memberships.
  Matrix W = Matrix::Zero(n, n);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      return distances(i, a) < distances(i, b);
    });
    std::vector<Eigen::Index> nn;
    for (Eigen::Index j : order) {
      if (j == i) continue;
      nn.push_back(j);
      if (static_cast<int>(nn.size()) == k) break;
    }
    double rho = 0.0;
    for (Eigen::Index j : nn) {
      if (distances(i, j) > 0.0) {
        rho = distances(i, j);
        break;
      }
    }
    double lo = 0.0, hi = std::numeric_limits<double>::infinity(), sigma = 1.0;
    for (int iter = 0; iter < 64; ++iter) {
      double psum = 0.0;
      for (Eigen::Index j : nn) psum += std::exp(-std::max(0.0, distances(i, j) - rho) / sigma);
      if (std::abs(psum - target) < 1e-5) break;
      if (psum > target) {
        hi = sigma;
        sigma = 0.5 * (lo + hi);
      } else {
        lo = sigma;
        sigma = std::isinf(hi) ? sigma * 2.0 : 0.5 * (lo + hi);
      }
    }
    for (Eigen::Index j : nn) W(i, j) = std::exp(-std::max(0.0, distances(i, j) - rho) / sigma);
  }
  const Matrix G = W + W.transpose() - W.cwiseProduct(W.transpose());

  struct Edge {
    Eigen::Index i, j;
    double per_sample;
    double next;
  };
  std::vector<Edge> edges;
  const double wmax = G.maxCoeff();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j && G(i, j) > 0.0) {
        const double per = wmax / G(i, j);
        edges.push_back({i, j, per, per});
      }
    }
  }

  Matrix Y = classical_mds(distances, 2);
  const double extent = Y.cwiseAbs().maxCoeff();
  Rng rng(seed);
  if (extent > 0.0) Y *= 10.0 / extent;
  for (Eigen::Index q = 0; q < Y.size(); ++q) Y.data()[q] += 1e-4 * rng.normal();

  const double a = options.a, b = options.b;
  auto clip = [](double v) { return std::clamp(v, -4.0, 4.0); };
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    const double alpha = 1.0 - static_cast<double>(epoch) / options.epochs;
    for (Edge& e : edges) {
      if (e.next > epoch + 1) continue;
      e.next += e.per_sample;
      double dx = Y(e.i, 0) - Y(e.j, 0), dy = Y(e.i, 1) - Y(e.j, 1);
      double d2 = dx * dx + dy * dy;
      if (d2 > 0.0) {
        const double coeff = (-2.0 * a * b * std::pow(d2, b - 1.0)) / (a * std::pow(d2, b) + 1.0);
        const double gx = clip(coeff * dx) * alpha, gy = clip(coeff * dy) * alpha;
        Y(e.i, 0) += gx;
        Y(e.i, 1) += gy;
        Y(e.j, 0) -= gx;
        Y(e.j, 1) -= gy;
      }
      for (int s = 0; s < options.negative_samples; ++s) {
        const auto m = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
        if (m == e.i) continue;
        dx = Y(e.i, 0) - Y(m, 0);
        dy = Y(e.i, 1) - Y(m, 1);
        d2 = dx * dx + dy * dy;
        if (d2 <= 0.0) continue;
        const double coeff = 2.0 * b / ((0.001 + d2) * (a * std::pow(d2, b) + 1.0));
        Y(e.i, 0) += clip(coeff * dx) * alpha;
        Y(e.i, 1) += clip(coeff * dy) * alpha;
      }
    }
  }
  Y.rowwise() -= Y.colwise().mean();
  return Y;
}

Matrix embed(const Matrix& distances, ProjectionMethod method, std::uint64_t seed,
             ProjectionMethod* used, std::vector<std::string>* notices) {
  const Eigen::Index n = distances.rows();
  ProjectionMethod actual = method;
  if (method != ProjectionMethod::kMds && n < 4) {
    actual = ProjectionMethod::kMds;
    if (notices) {
      notices->push_back(std::string(projection_method_id(method)) + " needs at least 4 points; " +
                         "used mds for " + std::to_string(n));
    }
  }
  if (used) *used = actual;
  switch (actual) {
    case ProjectionMethod::kMds: return classical_mds(distances, 2);
    case ProjectionMethod::kTsne: return tsne(distances, seed);
    case ProjectionMethod::kUmap: return umap(distances, seed);
  }
  return classical_mds(distances, 2);
}

ProjectionResult project_data_space(const DatasetSnapshot& snapshot, ProjectionMethod method,
                                    const std::vector<double>& difficulty, std::uint64_t seed) {
  const Eigen::Index n = snapshot.num_instances();
  require(n >= 1, "snapshot is empty");
  require(static_cast<Eigen::Index>(difficulty.size()) == n,
          "difficulty has " + std::to_string(difficulty.size()) + " entries for " +
              std::to_string(n) + " instances");
  Matrix Z = snapshot.X;
  for (Eigen::Index j = 0; j < Z.cols(); ++j) {
    const double mean = Z.col(j).mean();
    const double sd = std::sqrt((Z.col(j).array() - mean).square().mean());
    Z.col(j) = ((Z.col(j).array() - mean) / (sd > 0.0 ? sd : 1.0)).matrix();
  }
  ProjectionResult r;
  r.space = Space::kData;
  r.seed = seed;
  r.coords = embed(pairwise_euclidean(Z), method, seed, &r.method, &r.notices);
  r.point_scalar = difficulty;
  r.scalar_semantic = "difficulty";
  r.point_class = snapshot.y;
  return r;
}

Matrix model_space_vectors(const EvaluationRun& run, const std::vector<ModelId>& models,
                           const MetricConfig& config) {
  Matrix V(static_cast<Eigen::Index>(models.size()), static_cast<Eigen::Index>(kNumMetrics));
  for (std::size_t k = 0; k < models.size(); ++k) {
    const ModelRecord& rec = run.record(models[k]);
    require(!rec.failed, "model " + std::to_string(models[k]) + " failed to train");
    for (Metric m : kAllMetrics) {
      V(static_cast<Eigen::Index>(k), static_cast<int>(m)) =
          config.weight(m) / 100.0 * rec.metrics.normalized_of(m);
    }
  }
  return V;
}

ModelSpaceResult project_model_space(const EvaluationRun& run, const std::vector<ModelId>& models,
                                     std::optional<Metric> color_metric,
                                     const MetricConfig& config, ProjectionMethod method,
                                     std::uint64_t seed) {
  require(models.size() >= 2, "the models' space needs at least two models");
  ModelSpaceResult out;
  ProjectionResult& r = out.projection;
  r.space = Space::kModels;
  r.seed = seed;
  r.model_ids = models;
  r.coords = embed(pairwise_euclidean(model_space_vectors(run, models, config)), method, seed,
                   &r.method, &r.notices);
  std::array<std::vector<double>, kNumMetrics> per_metric;
  for (ModelId id : models) {
    const ModelRecord& rec = run.record(id);
    r.point_scalar.push_back(color_metric ? rec.metrics.normalized_of(*color_metric)
                                          : weighted_score(rec.metrics, config));
    for (Metric m : kAllMetrics) per_metric[static_cast<std::size_t>(m)].push_back(rec.metrics.normalized_of(m));
  }
  r.scalar_semantic = color_metric ? std::string(metric_id(*color_metric)) : "combined";
  for (Metric m : kAllMetrics) {
    out.metric_boxes[static_cast<std::size_t>(m)] = box_stats(per_metric[static_cast<std::size_t>(m)]);
  }
  return out;
}

ProjectionResult project_prediction_space(const DatasetSnapshot& snapshot,
                                          const EvaluationRun& run,
                                          const std::vector<ModelId>& stack_models,
                                          ProjectionMethod method, std::uint64_t seed) {
  require(!stack_models.empty(), "the stack is empty");
  require(stack_models.size() >= 2, "the predictions' space needs at least two models");
  const Eigen::Index n = snapshot.num_instances();
  Eigen::MatrixXi codes(n, static_cast<Eigen::Index>(stack_models.size()));
  for (std::size_t k = 0; k < stack_models.size(); ++k) {
    const ModelRecord& rec = run.record(stack_models[k]);
    require(!rec.failed, "model " + std::to_string(stack_models[k]) + " failed to train");
    for (Eigen::Index i = 0; i < n; ++i) {
      codes(i, static_cast<Eigen::Index>(k)) = rec.oof_pred[static_cast<std::size_t>(i)];
    }
  }
  ProjectionResult r;
  r.space = Space::kPredictions;
  r.seed = seed;
  r.coords = embed(pairwise_hamming(codes), method, seed, &r.method, &r.notices);
  r.point_scalar = instance_difficulty(snapshot, run, stack_models);
  r.scalar_semantic = "difficulty";
  r.point_class = snapshot.y;
  return r;
}

int score_bin(double score) {
  const int bin = static_cast<int>(std::floor(score * kHistogramBins + 1e-9));
  return std::clamp(bin, 0, kHistogramBins - 1);
}

ScoreHistograms model_score_histograms(const DatasetSnapshot& snapshot, const EvaluationRun& run,
                                       const std::vector<ModelId>& stack_models,
                                       const IndexSet& selected_instances,
                                       const MetricConfig& config) {
  require(!selected_instances.empty(), "instance selection is empty");
  const Eigen::Index n = snapshot.num_instances();
  for (Eigen::Index i : selected_instances) {
    require(i >= 0 && i < n, "instance index " + std::to_string(i) + " out of range");
  }
  std::vector<Eigen::Index> rows(selected_instances.begin(), selected_instances.end());
  Labels y_sub;
  for (Eigen::Index i : rows) y_sub.push_back(snapshot.y[static_cast<std::size_t>(i)]);

  ScoreHistograms out;
  for (ModelId id : stack_models) {
    const ModelRecord& rec = run.record(id);
    require(!rec.failed, "model " + std::to_string(id) + " failed to train");
    Labels pred_sub;
    Matrix proba_sub(static_cast<Eigen::Index>(rows.size()), rec.oof_proba.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      pred_sub.push_back(rec.oof_pred[static_cast<std::size_t>(rows[k])]);
      proba_sub.row(static_cast<Eigen::Index>(k)) = rec.oof_proba.row(rows[k]);
    }
    const double sel = weighted_score(
        compute_metrics(y_sub, pred_sub, proba_sub, snapshot.num_classes(), config), config);
    const double all = weighted_score(rec.metrics, config);
    out.selected_scores.push_back(sel);
    out.all_scores.push_back(all);
    ++out.selected[static_cast<std::size_t>(score_bin(sel))];
    ++out.all[static_cast<std::size_t>(score_bin(all))];
  }
  return out;
}

}  // namespace stackgen
