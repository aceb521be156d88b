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

// Synthetic datasets shared by the tests.

#include <string>
#include <vector>

#include "stackgen/dataset.hpp"

namespace stackgen::testing {

inline std::string data_path(const std::string& name) {
  return std::string(STACKGEN_TEST_DATA) + "/" + name;
}

inline DatasetSnapshot heart() {
  CsvOptions o;
  o.label_column = "target";
  return load_csv(data_path("heart.csv"), o);
}

inline DatasetSnapshot make_snapshot(Matrix X, Labels y, int num_classes,
                                     std::vector<std::string> features = {}) {
  DatasetSnapshot s;
  if (features.empty()) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) features.push_back("f" + std::to_string(j));
  }
  s.X = std::move(X);
  s.y = std::move(y);
  s.feature_names = std::move(features);
  for (int c = 0; c < num_classes; ++c) s.class_names.push_back("c" + std::to_string(c));
  s.validate();
  return s;
}

// Two classes split by x0 + x1 = 0 with a margin of at least `margin`.
inline DatasetSnapshot separable(int n, std::uint64_t seed, double margin = 0.5) {
  Rng rng(seed);
  Matrix X(n, 2);
  Labels y(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int c = i % 2;
    double a = 0.0, b = 0.0;
    do {
      a = rng.uniform(-3.0, 3.0);
      b = rng.uniform(-3.0, 3.0);
    } while (std::abs(a + b) < margin * std::sqrt(2.0) || ((a + b > 0) != (c == 1)));
    X(i, 0) = a;
    X(i, 1) = b;
    y[static_cast<std::size_t>(i)] = c;
  }
  return make_snapshot(std::move(X), std::move(y), 2);
}

// Isotropic Gaussian blobs, one per class, centers `spread` apart on a line.
inline DatasetSnapshot blobs(int n, int classes, int dims, double spread, std::uint64_t seed) {
  Rng rng(seed);
  Matrix X(n, dims);
  Labels y(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int c = i % classes;
    for (int j = 0; j < dims; ++j) X(i, j) = rng.normal() + (j == 0 ? spread * c : 0.0);
    y[static_cast<std::size_t>(i)] = c;
  }
  return make_snapshot(std::move(X), std::move(y), classes);
}

// Columns: label copy, pure noise, weak signal, pure noise.
inline DatasetSnapshot label_copy_fixture(int n, std::uint64_t seed) {
  Rng rng(seed);
  Matrix X(n, 4);
  Labels y(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int c = i % 2;
    y[static_cast<std::size_t>(i)] = c;
    X(i, 0) = c;
    X(i, 1) = rng.normal();
    X(i, 2) = 0.5 * c + rng.normal();
    X(i, 3) = rng.normal();
  }
  return make_snapshot(std::move(X), std::move(y), 2, {"label_copy", "noise", "weak", "noise2"});
}

// Columns: twin A, twin B (an exact copy of A), an independent informative
// column, pure noise. Each signal column alone separates the classes only
// partly.
inline DatasetSnapshot twin_fixture(int n, std::uint64_t seed) {
  Rng rng(seed);
  Matrix X(n, 4);
  Labels y(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int c = i % 2;
    y[static_cast<std::size_t>(i)] = c;
    X(i, 0) = X(i, 1) = 1.5 * c + rng.normal();
    X(i, 2) = 1.5 * c + rng.normal();
    X(i, 3) = rng.normal();
  }
  return make_snapshot(std::move(X), std::move(y), 2, {"twin_a", "twin_b", "other", "noise"});
}

}  // namespace stackgen::testing
