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

#include <algorithm>
#include <cmath>
#include <deque>

#include "learners/internal.hpp"

namespace stackgen {

using learners::matrix_from_json;
using learners::matrix_to_json;
using learners::vector_from_json;
using learners::vector_to_json;

std::string_view algorithm_id(Algorithm a) {
  switch (a) {
    case Algorithm::kKnn: return "knn";
    case Algorithm::kSvc: return "svc";
    case Algorithm::kGauNb: return "gaunb";
    case Algorithm::kMlp: return "mlp";
    case Algorithm::kLr: return "lr";
    case Algorithm::kLda: return "lda";
    case Algorithm::kQda: return "qda";
    case Algorithm::kRf: return "rf";
    case Algorithm::kExtraT: return "extrat";
    case Algorithm::kAdaB: return "adab";
    case Algorithm::kGradB: return "gradb";
  }
  return "";
}

Algorithm parse_algorithm(std::string_view id) {
  for (Algorithm a : kAllAlgorithms) {
    if (algorithm_id(a) == id) return a;
  }
  fail(ErrorCode::kInvalidArgument, "unknown algorithm '" + std::string(id) + "'");
}

std::vector<std::string> known_params(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::kKnn: return {"n_neighbors", "weights", "metric"};
    case Algorithm::kSvc: return {"C", "kernel", "gamma"};
    case Algorithm::kGauNb: return {"var_smoothing"};
    case Algorithm::kMlp:
      return {"hidden_layer_sizes", "activation", "alpha", "learning_rate_init",
              "max_iter"};
    case Algorithm::kLr: return {"C", "max_iter"};
    case Algorithm::kLda: return {"solver"};
    case Algorithm::kQda: return {"reg_param"};
    case Algorithm::kRf:
    case Algorithm::kExtraT:
      return {"n_estimators", "max_depth", "criterion", "min_samples_leaf",
              "max_features"};
    case Algorithm::kAdaB: return {"n_estimators", "learning_rate"};
    case Algorithm::kGradB: return {"n_estimators", "learning_rate", "max_depth"};
  }
  return {};
}

std::unique_ptr<Classifier> make_classifier(Algorithm algorithm,
                                            const Json& params,
                                            std::uint64_t seed) {
  require(params.is_object() || params.is_null(), "params must be an object");
  const auto names = known_params(algorithm);
  if (params.is_object()) {
    for (const auto& [key, _] : params.items()) {
      require(std::find(names.begin(), names.end(), key) != names.end(),
              "unknown parameter '" + key + "' for " +
                  std::string(algorithm_id(algorithm)));
    }
  }
  const Json p = params.is_null() ? Json::object() : params;
  switch (algorithm) {
    case Algorithm::kKnn: return learners::make_knn(p);
    case Algorithm::kSvc: return learners::make_svc(p, seed);
    case Algorithm::kGauNb: return learners::make_gaussian_nb(p);
    case Algorithm::kMlp: return learners::make_mlp(p, seed);
    case Algorithm::kLr: return learners::make_logistic(p);
    case Algorithm::kLda: return learners::make_lda(p);
    case Algorithm::kQda: return learners::make_qda(p);
    case Algorithm::kRf: return learners::make_forest(p, seed, false);
    case Algorithm::kExtraT: return learners::make_forest(p, seed, true);
    case Algorithm::kAdaB: return learners::make_adaboost(p, seed);
    case Algorithm::kGradB: return learners::make_gradient_boosting(p, seed);
  }
  fail(ErrorCode::kInvalidArgument, "unknown algorithm");
}

Labels argmax_rows(const Matrix& proba) {
  Labels out(static_cast<std::size_t>(proba.rows()));
  for (Eigen::Index i = 0; i < proba.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < proba.cols(); ++c) {
      if (proba(i, c) > proba(i, best)) best = c;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

BaseModel::BaseModel(Algorithm algorithm, Json params, std::uint64_t seed,
                     std::vector<bool> feature_mask)
    : algorithm_(algorithm),
      params_(std::move(params)),
      seed_(seed),
      mask_(std::move(feature_mask)),
      classifier_(make_classifier(algorithm_, params_, seed_)) {
  for (std::size_t j = 0; j < mask_.size(); ++j) {
    if (mask_[j]) columns_.push_back(static_cast<Eigen::Index>(j));
  }
  require(!columns_.empty(), "feature mask keeps no features");
}

Matrix BaseModel::transform(const Matrix& X) const {
  require(X.cols() == static_cast<Eigen::Index>(mask_.size()),
          "input has " + std::to_string(X.cols()) + " features, model expects " +
              std::to_string(mask_.size()));
  Matrix out(X.rows(), static_cast<Eigen::Index>(columns_.size()));
  for (std::size_t k = 0; k < columns_.size(); ++k) {
    const auto c = static_cast<Eigen::Index>(k);
    out.col(c) = (X.col(columns_[k]).array() - mean_(c)) / scale_(c);
  }
  return out;
}

void BaseModel::fit(const Matrix& X, std::span<const int> y, int num_classes) {
  require(X.cols() == static_cast<Eigen::Index>(mask_.size()),
          "feature mask length does not match the data");
  const auto d = static_cast<Eigen::Index>(columns_.size());
  mean_.resize(d);
  scale_.resize(d);
  const double n = static_cast<double>(X.rows());
  for (Eigen::Index k = 0; k < d; ++k) {
    const auto col = X.col(columns_[static_cast<std::size_t>(k)]);
    mean_(k) = col.mean();
    const double var = (col.array() - mean_(k)).square().sum() / n;
    scale_(k) = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  num_classes_ = num_classes;
  classifier_->fit(transform(X), y, num_classes);
}

Matrix BaseModel::predict_proba(const Matrix& X) const {
  return classifier_->predict_proba(transform(X));
}

Json BaseModel::save() const {
  Json mask = Json::array();
  for (bool b : mask_) mask.push_back(b);
  return Json{{"algo_id", algorithm_id(algorithm_)},
              {"params", params_},
              {"seed", seed_},
              {"feature_mask", mask},
              {"num_classes", num_classes_},
              {"scaler", {{"mean", vector_to_json(mean_)},
                          {"scale", vector_to_json(scale_)}}},
              {"fitted", classifier_->state()}};
}

BaseModel BaseModel::load(const Json& doc) {
  std::vector<bool> mask;
  for (const auto& b : doc.at("feature_mask")) mask.push_back(b.get<bool>());
  BaseModel m(parse_algorithm(doc.at("algo_id").get<std::string>()),
              doc.at("params"), doc.at("seed").get<std::uint64_t>(),
              std::move(mask));
  m.num_classes_ = doc.at("num_classes").get<int>();
  m.mean_ = vector_from_json(doc.at("scaler").at("mean"));
  m.scale_ = vector_from_json(doc.at("scaler").at("scale"));
  require(m.mean_.size() == static_cast<Eigen::Index>(m.columns_.size()) &&
              m.scale_.size() == m.mean_.size(),
          "scaler size does not match the feature mask", ErrorCode::kSchemaInvalid);
  m.classifier_->load_state(doc.at("fitted"));
  return m;
}

namespace learners {

double num_param(const Json& params, const char* key, double fallback) {
  auto it = params.find(key);
  if (it == params.end() || it->is_null()) return fallback;
  require(it->is_number(), std::string("parameter '") + key + "' must be numeric");
  return it->get<double>();
}

std::string str_param(const Json& params, const char* key, const char* fallback) {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  require(it->is_string(), std::string("parameter '") + key + "' must be a string");
  return it->get<std::string>();
}

std::optional<int> opt_int_param(const Json& params, const char* key,
                                 std::optional<int> fallback) {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  if (it->is_null()) return std::nullopt;
  require(it->is_number_integer(),
          std::string("parameter '") + key + "' must be an integer or null");
  return it->get<int>();
}

Matrix softmax_rows(const Matrix& scores) {
  Matrix out(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const double mx = scores.row(i).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index c = 0; c < scores.cols(); ++c) {
      out(i, c) = std::exp(scores(i, c) - mx);
      sum += out(i, c);
    }
    out.row(i) /= sum;
  }
  return out;
}

void normalize_rows(Matrix& proba) {
  for (Eigen::Index i = 0; i < proba.rows(); ++i) {
    const double s = proba.row(i).sum();
    if (s > 0.0 && std::isfinite(s)) {
      proba.row(i) /= s;
    } else {
      proba.row(i).setConstant(1.0 / static_cast<double>(proba.cols()));
    }
  }
}

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

Matrix matrix_from_json(const Json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  require(data.size() == static_cast<std::size_t>(rows), "matrix row count mismatch",
          ErrorCode::kSchemaInvalid);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = data[static_cast<std::size_t>(i)];
    require(row.size() == static_cast<std::size_t>(cols),
            "matrix column count mismatch", ErrorCode::kSchemaInvalid);
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
  }
  return m;
}

Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vector vector_from_json(const Json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

Vector minimize_lbfgs(const Objective& fg, Vector x, int max_iter,
                      double grad_tol) {
  constexpr int kHistory = 10;
  constexpr double kArmijo = 1e-4;
  Vector g(x.size());
  double f = fg(x, g);
  std::deque<Vector> s_hist, y_hist;
  std::deque<double> rho_hist;

  for (int iter = 0; iter < max_iter; ++iter) {
    if (g.lpNorm<Eigen::Infinity>() <= grad_tol) break;

    // Two-loop recursion for the search direction.
    Vector q = g;
    std::vector<double> alpha(s_hist.size());
    for (int k = static_cast<int>(s_hist.size()) - 1; k >= 0; --k) {
      alpha[static_cast<std::size_t>(k)] = rho_hist[static_cast<std::size_t>(k)] *
                                           s_hist[static_cast<std::size_t>(k)].dot(q);
      q -= alpha[static_cast<std::size_t>(k)] * y_hist[static_cast<std::size_t>(k)];
    }
    if (!s_hist.empty()) {
      const double gamma = s_hist.back().dot(y_hist.back()) /
                           y_hist.back().squaredNorm();
      q *= gamma;
    } else {
      q /= std::max(1.0, g.norm());
    }
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const double beta = rho_hist[k] * y_hist[k].dot(q);
      q += s_hist[k] * (alpha[k] - beta);
    }
    Vector dir = -q;
    double slope = g.dot(dir);
    if (slope >= 0.0) {
      dir = -g;
      slope = -g.squaredNorm();
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }

    double step = 1.0;
    Vector x_new(x.size()), g_new(x.size());
    double f_new = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      x_new = x + step * dir;
      f_new = fg(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= f + kArmijo * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    Vector s = x_new - x;
    Vector yv = g_new - g;
    const double sy = s.dot(yv);
    const double f_old = f;
    x = std::move(x_new);
    g = std::move(g_new);
    f = f_new;
    if (sy > 1e-12) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(yv));
      rho_hist.push_back(1.0 / sy);
      if (s_hist.size() > kHistory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    if (std::abs(f_old - f) <= 1e-12 * std::max({1.0, std::abs(f), std::abs(f_old)})) {
      break;
    }
  }
  return x;
}

}  // namespace learners
}  // namespace stackgen
