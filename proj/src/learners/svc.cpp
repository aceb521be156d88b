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

// C-SVC trained by SMO with second-order working-set selection. Class
// probabilities come from Platt scaling fitted on decision values produced
// by an internal 5-fold cross-validation, one-vs-rest for more than two
// classes.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "learners/internal.hpp"

namespace stackgen::learners {

namespace {

constexpr double kTau = 1e-12;
constexpr double kEps = 1e-3;
constexpr int kPlattFolds = 5;

struct Kernel {
  enum class Type { kLinear, kRbf } type = Type::kRbf;
  double gamma = 1.0;

  double operator()(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                    const Eigen::Ref<const Eigen::RowVectorXd>& b) const {
    if (type == Type::kLinear) return a.dot(b);
    return std::exp(-gamma * (a - b).squaredNorm());
  }
};

struct BinarySvm {
  Matrix support;      // rows are support vectors
  Vector dual_coef;    // alpha_i * y_i
  double rho = 0.0;
  double constant = 0.0;  // used when the training labels were all one sign
  bool degenerate = false;

  Vector decision(const Matrix& X, const Kernel& kernel) const {
    Vector out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      if (degenerate) {
        out(i) = constant;
        continue;
      }
      double s = 0.0;
      for (Eigen::Index t = 0; t < support.rows(); ++t) {
        s += dual_coef(t) * kernel(support.row(t), X.row(i));
      }
      out(i) = s - rho;
    }
    return out;
  }
};

BinarySvm train_binary(const Matrix& X, const std::vector<int>& sign, double C,
                       const Kernel& kernel) {
  const auto n = static_cast<std::size_t>(X.rows());
  BinarySvm model;
  const bool all_pos = std::all_of(sign.begin(), sign.end(), [](int s) { return s > 0; });
  const bool all_neg = std::all_of(sign.begin(), sign.end(), [](int s) { return s < 0; });
  if (all_pos || all_neg) {
    model.degenerate = true;
    model.constant = all_pos ? 1.0 : -1.0;
    return model;
  }

  Matrix K(X.rows(), X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = i; j < X.rows(); ++j) {
      K(i, j) = K(j, i) = kernel(X.row(i), X.row(j));
    }
  }
  auto Q = [&](std::size_t i, std::size_t j) {
    return static_cast<double>(sign[i] * sign[j]) *
           K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  };

  std::vector<double> alpha(n, 0.0), G(n, -1.0);
  auto upper = [&](std::size_t t) { return alpha[t] >= C; };
  auto lower = [&](std::size_t t) { return alpha[t] <= 0.0; };

  const long max_iter = std::max<long>(50000, 200L * static_cast<long>(n));
  for (long iter = 0; iter < max_iter; ++iter) {
    double gmax = -std::numeric_limits<double>::infinity();
    double gmax2 = -std::numeric_limits<double>::infinity();
    std::ptrdiff_t i_sel = -1, j_sel = -1;
    for (std::size_t t = 0; t < n; ++t) {
      if (sign[t] > 0) {
        if (!upper(t) && -G[t] >= gmax) { gmax = -G[t]; i_sel = static_cast<std::ptrdiff_t>(t); }
      } else {
        if (!lower(t) && G[t] >= gmax) { gmax = G[t]; i_sel = static_cast<std::ptrdiff_t>(t); }
      }
    }
    if (i_sel < 0) break;
    const auto i = static_cast<std::size_t>(i_sel);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
      const double kii = K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
      const double ktt = K(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(t));
      const double kit = K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t));
      if (sign[t] > 0) {
        if (lower(t)) continue;
        const double grad_diff = gmax + G[t];
        gmax2 = std::max(gmax2, G[t]);
        if (grad_diff > 0) {
          double quad = kii + ktt - 2.0 * sign[i] * kit;
          if (quad <= 0) quad = kTau;
          const double obj = -(grad_diff * grad_diff) / quad;
          if (obj <= best) { best = obj; j_sel = static_cast<std::ptrdiff_t>(t); }
        }
      } else {
        if (upper(t)) continue;
        const double grad_diff = gmax - G[t];
        gmax2 = std::max(gmax2, -G[t]);
        if (grad_diff > 0) {
          double quad = kii + ktt + 2.0 * sign[i] * kit;
          if (quad <= 0) quad = kTau;
          const double obj = -(grad_diff * grad_diff) / quad;
          if (obj <= best) { best = obj; j_sel = static_cast<std::ptrdiff_t>(t); }
        }
      }
    }
    if (gmax + gmax2 < kEps || j_sel < 0) break;
    const auto j = static_cast<std::size_t>(j_sel);

    const double old_ai = alpha[i], old_aj = alpha[j];
    if (sign[i] != sign[j]) {
      double quad = Q(i, i) + Q(j, j) + 2.0 * Q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) { alpha[j] = 0; alpha[i] = diff; }
      } else {
        if (alpha[i] < 0) { alpha[i] = 0; alpha[j] = -diff; }
      }
      if (diff > 0) {
        if (alpha[i] > C) { alpha[i] = C; alpha[j] = C - diff; }
      } else {
        if (alpha[j] > C) { alpha[j] = C; alpha[i] = C + diff; }
      }
    } else {
      double quad = Q(i, i) + Q(j, j) - 2.0 * Q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (G[i] - G[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) { alpha[i] = C; alpha[j] = sum - C; }
      } else {
        if (alpha[j] < 0) { alpha[j] = 0; alpha[i] = sum; }
      }
      if (sum > C) {
        if (alpha[j] > C) { alpha[j] = C; alpha[i] = sum - C; }
      } else {
        if (alpha[i] < 0) { alpha[i] = 0; alpha[j] = sum; }
      }
    }
    const double dai = alpha[i] - old_ai, daj = alpha[j] - old_aj;
    for (std::size_t t = 0; t < n; ++t) G[t] += Q(i, t) * dai + Q(j, t) * daj;
  }

  // Bias from free support vectors, or the midpoint of the feasible range.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  int n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = sign[t] * G[t];
    if (upper(t)) {
      if (sign[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (sign[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  model.rho = n_free > 0 ? sum_free / n_free : 0.5 * (ub + lb);

  std::vector<Eigen::Index> sv;
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] > 0.0) sv.push_back(static_cast<Eigen::Index>(t));
  }
  model.support.resize(static_cast<Eigen::Index>(sv.size()), X.cols());
  model.dual_coef.resize(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t s = 0; s < sv.size(); ++s) {
    model.support.row(static_cast<Eigen::Index>(s)) = X.row(sv[s]);
    model.dual_coef(static_cast<Eigen::Index>(s)) =
        alpha[static_cast<std::size_t>(sv[s])] * sign[static_cast<std::size_t>(sv[s])];
  }
  return model;
}

// Platt sigmoid fit (Newton with backtracking, Lin/Lin/Weng formulation).
std::pair<double, double> fit_sigmoid(const std::vector<double>& dec,
                                      const std::vector<int>& sign) {
  double prior1 = 0, prior0 = 0;
  for (int s : sign) (s > 0 ? prior1 : prior0) += 1;
  const double hi = (prior1 + 1.0) / (prior1 + 2.0);
  const double lo = 1.0 / (prior0 + 2.0);
  std::vector<double> t(dec.size());
  for (std::size_t i = 0; i < dec.size(); ++i) t[i] = sign[i] > 0 ? hi : lo;

  double A = 0.0, B = std::log((prior0 + 1.0) / (prior1 + 1.0));
  auto objective = [&](double a, double b) {
    double f = 0.0;
    for (std::size_t i = 0; i < dec.size(); ++i) {
      const double z = dec[i] * a + b;
      f += z >= 0 ? t[i] * z + std::log1p(std::exp(-z))
                  : (t[i] - 1.0) * z + std::log1p(std::exp(z));
    }
    return f;
  };
  double fval = objective(A, B);
  for (int iter = 0; iter < 100; ++iter) {
    double h11 = 1e-12, h22 = 1e-12, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < dec.size(); ++i) {
      const double z = dec[i] * A + B;
      double p, q;
      if (z >= 0) {
        p = std::exp(-z) / (1.0 + std::exp(-z));
        q = 1.0 / (1.0 + std::exp(-z));
      } else {
        p = 1.0 / (1.0 + std::exp(z));
        q = std::exp(z) / (1.0 + std::exp(z));
      }
      const double d2 = p * q;
      h11 += dec[i] * dec[i] * d2;
      h22 += d2;
      h21 += dec[i] * d2;
      const double d1 = t[i] - p;
      g1 += dec[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < 1e-5 && std::abs(g2) < 1e-5) break;
    const double det = h11 * h22 - h21 * h21;
    const double dA = -(h22 * g1 - h21 * g2) / det;
    const double dB = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * dA + g2 * dB;
    double step = 1.0;
    while (step >= 1e-10) {
      const double nA = A + step * dA, nB = B + step * dB;
      const double nf = objective(nA, nB);
      if (nf < fval + 1e-4 * step * gd) {
        A = nA;
        B = nB;
        fval = nf;
        break;
      }
      step *= 0.5;
    }
    if (step < 1e-10) break;
  }
  return {A, B};
}

double sigmoid_prob(double dec, double A, double B) {
  const double z = dec * A + B;
  return z >= 0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
}

class SupportVectorClassifier final : public Classifier {
 public:
  SupportVectorClassifier(const Json& params, std::uint64_t seed)
      : c_(num_param(params, "C", 1.0)), seed_(seed) {
    require(c_ > 0.0, "svc C must be positive");
    const std::string kernel = str_param(params, "kernel", "rbf");
    require(kernel == "rbf" || kernel == "linear", "svc kernel must be rbf or linear");
    kernel_.type = kernel == "rbf" ? Kernel::Type::kRbf : Kernel::Type::kLinear;
    auto g = params.find("gamma");
    if (g != params.end() && g->is_number()) {
      gamma_ = g->get<double>();
      require(gamma_ > 0.0, "svc gamma must be positive");
    } else {
      require(g == params.end() || *g == "scale", "svc gamma must be 'scale' or a number");
    }
  }

  void fit(const Matrix& X, std::span<const int> y, int num_classes) override {
    num_classes_ = num_classes;
    kernel_.gamma = gamma_ > 0.0 ? gamma_ : scale_gamma(X);
    const int problems = num_classes == 2 ? 1 : num_classes;
    machines_.clear();
    platt_.clear();
    Rng rng(seed_);
    for (int p = 0; p < problems; ++p) {
      const int positive = num_classes == 2 ? 1 : p;
      std::vector<int> sign(y.size());
      for (std::size_t i = 0; i < y.size(); ++i) sign[i] = y[i] == positive ? 1 : -1;
      platt_.push_back(calibrate(X, sign, rng));
      machines_.push_back(train_binary(X, sign, c_, kernel_));
    }
  }

  Matrix predict_proba(const Matrix& X) const override {
    Matrix proba = Matrix::Zero(X.rows(), num_classes_);
    if (num_classes_ == 2) {
      const Vector dec = machines_[0].decision(X, kernel_);
      for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const double p = sigmoid_prob(dec(i), platt_[0].first, platt_[0].second);
        proba(i, 1) = p;
        proba(i, 0) = 1.0 - p;
      }
      return proba;
    }
    for (std::size_t c = 0; c < machines_.size(); ++c) {
      const Vector dec = machines_[c].decision(X, kernel_);
      for (Eigen::Index i = 0; i < X.rows(); ++i) {
        proba(i, static_cast<Eigen::Index>(c)) =
            sigmoid_prob(dec(i), platt_[c].first, platt_[c].second);
      }
    }
    normalize_rows(proba);
    return proba;
  }

  Json state() const override {
    Json machines = Json::array();
    for (std::size_t c = 0; c < machines_.size(); ++c) {
      const auto& m = machines_[c];
      machines.push_back({{"support", matrix_to_json(m.support)},
                          {"dual_coef", vector_to_json(m.dual_coef)},
                          {"rho", m.rho},
                          {"degenerate", m.degenerate},
                          {"constant", m.constant},
                          {"platt", {platt_[c].first, platt_[c].second}}});
    }
    return Json{{"kernel", kernel_.type == Kernel::Type::kRbf ? "rbf" : "linear"},
                {"gamma", kernel_.gamma},
                {"num_classes", num_classes_},
                {"machines", machines}};
  }

  void load_state(const Json& j) override {
    kernel_.type = j.at("kernel") == "rbf" ? Kernel::Type::kRbf : Kernel::Type::kLinear;
    kernel_.gamma = j.at("gamma").get<double>();
    num_classes_ = j.at("num_classes").get<int>();
    machines_.clear();
    platt_.clear();
    for (const auto& mj : j.at("machines")) {
      BinarySvm m;
      m.support = matrix_from_json(mj.at("support"));
      m.dual_coef = vector_from_json(mj.at("dual_coef"));
      m.rho = mj.at("rho").get<double>();
      m.degenerate = mj.at("degenerate").get<bool>();
      m.constant = mj.at("constant").get<double>();
      machines_.push_back(std::move(m));
      platt_.emplace_back(mj.at("platt")[0].get<double>(), mj.at("platt")[1].get<double>());
    }
  }

 private:
  static double scale_gamma(const Matrix& X) {
    const double mean = X.mean();
    const double var = (X.array() - mean).square().mean();
    return var > 0.0 ? 1.0 / (static_cast<double>(X.cols()) * var) : 1.0;
  }

  std::pair<double, double> calibrate(const Matrix& X, const std::vector<int>& sign,
                                      Rng& rng) const {
    const auto n = static_cast<std::size_t>(X.rows());
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < n; ++i) (sign[i] > 0 ? pos : neg).push_back(i);
    rng.shuffle(pos);
    rng.shuffle(neg);
    std::vector<int> fold(n);
    for (std::size_t r = 0; r < pos.size(); ++r) fold[pos[r]] = static_cast<int>(r % kPlattFolds);
    for (std::size_t r = 0; r < neg.size(); ++r) fold[neg[r]] = static_cast<int>(r % kPlattFolds);

    std::vector<double> dec(n, 0.0);
    for (int f = 0; f < kPlattFolds; ++f) {
      std::vector<Eigen::Index> train, test;
      for (std::size_t i = 0; i < n; ++i) {
        (fold[i] == f ? test : train).push_back(static_cast<Eigen::Index>(i));
      }
      if (test.empty()) continue;
      Matrix Xtr = X(train, Eigen::all);
      std::vector<int> str;
      for (auto i : train) str.push_back(sign[static_cast<std::size_t>(i)]);
      const BinarySvm m = train_binary(Xtr, str, c_, kernel_);
      const Vector d = m.decision(X(test, Eigen::all), kernel_);
      for (std::size_t t = 0; t < test.size(); ++t) {
        dec[static_cast<std::size_t>(test[t])] = d(static_cast<Eigen::Index>(t));
      }
    }
    return fit_sigmoid(dec, sign);
  }

  double c_;
  double gamma_ = 0.0;
  std::uint64_t seed_;
  Kernel kernel_;
  int num_classes_ = 0;
  std::vector<BinarySvm> machines_;
  std::vector<std::pair<double, double>> platt_;
};

}  // namespace

std::unique_ptr<Classifier> make_svc(const Json& params, std::uint64_t seed) {
  return std::make_unique<SupportVectorClassifier>(params, seed);
}

}  // namespace stackgen::learners
