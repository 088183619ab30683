/*
 * Copyright 2026 The dpimb Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dpimb/dataset.hpp"
#include "dpimb/dp_core.hpp"
#include "dpimb/error.hpp"
#include "dpimb/matrix.hpp"
#include "dpimb/random.hpp"

namespace dpimb {

// Appends exactly N minority replicas. Each minority point is copied
// floor(N/n1) times and the first N mod n1 of them (in row order) once more.
inline Dataset oversample_deterministic(const Dataset& ds, std::int64_t generated) {
  if (generated < 0) throw InvalidParameter("oversample_deterministic: N must be non-negative");
  std::vector<std::size_t> minority;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    if (ds.y[i] == 1) minority.push_back(i);
  }
  if (minority.empty()) throw InvalidParameter("oversample_deterministic: no minority rows");
  Dataset out = ds;
  out.origin.resize(out.n(), RowOrigin::kOriginal);
  const auto n1 = static_cast<std::int64_t>(minority.size());
  const std::int64_t base = generated / n1;
  const std::int64_t extra = generated % n1;
  for (std::int64_t j = 0; j < n1; ++j) {
    const std::int64_t copies = base + (j < extra ? 1 : 0);
    for (std::int64_t c = 0; c < copies; ++c) {
      out.append(ds.X.row(minority[j]), 1, RowOrigin::kOversampled);
    }
  }
  return out;
}

using NeighborTable = std::vector<std::vector<std::size_t>>;

// k nearest l2 neighbours of every row among the other rows. Ties are broken
// by the lower index; a row is never its own neighbour, duplicates are.
inline NeighborTable knn_indices(const Matrix& points, int k) {
  const std::size_t n = points.rows();
  if (k < 1 || n <= static_cast<std::size_t>(k)) {
    throw InvalidParameter("knn_indices: need 1 <= k < n");
  }
  NeighborTable table(n);
  std::vector<std::pair<double, std::size_t>> cand;
  cand.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    cand.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) cand.emplace_back(squared_distance(points.row(i), points.row(j)), j);
    }
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
    table[i].reserve(k);
    for (int t = 0; t < k; ++t) table[i].push_back(cand[t].second);
  }
  return table;
}

// SMOTE: for t = 1..N, base point i = t mod n1 (0 read as n1), a uniformly
// chosen neighbour x' among its k nearest, and per-coordinate interpolation
// z_j = (1 - u_j) x'_j + u_j x_j with independent u_j ~ U[0, 1].
inline Matrix smote(const Matrix& minority, std::int64_t generated, int k, Rng& rng) {
  if (generated < 0) throw InvalidParameter("smote: N must be non-negative");
  const std::size_t n1 = minority.rows();
  if (k < 1 || n1 <= static_cast<std::size_t>(k)) {
    throw InvalidParameter("smote: requires n1 > k >= 1 (k = " + std::to_string(k) +
                           ", n1 = " + std::to_string(n1) + ")");
  }
  const NeighborTable nn = knn_indices(minority, k);
  const std::size_t d = minority.cols();
  Matrix out(static_cast<std::size_t>(generated), d);
  for (std::int64_t t = 1; t <= generated; ++t) {
    const std::size_t i = static_cast<std::size_t>((t - 1) % static_cast<std::int64_t>(n1));
    const std::size_t nb = nn[i][rng.uniform_index(static_cast<std::uint64_t>(k))];
    auto x = minority.row(i);
    auto xn = minority.row(nb);
    auto z = out.row(static_cast<std::size_t>(t - 1));
    for (std::size_t j = 0; j < d; ++j) {
      const double u = rng.uniform();
      // Clamp away rounding so the point stays inside the coordinate envelope.
      z[j] = std::clamp((1.0 - u) * xn[j] + u * x[j], std::min(x[j], xn[j]), std::max(x[j], xn[j]));
    }
  }
  return out;
}

// Dataset plus N SMOTE rows, all labelled positive.
inline Dataset smote_augment(const Dataset& ds, std::int64_t generated, int k, Rng& rng) {
  Matrix synth = smote(ds.class_rows(1), generated, k, rng);
  Dataset out = ds;
  out.origin.resize(out.n(), RowOrigin::kOriginal);
  for (std::size_t i = 0; i < synth.rows(); ++i) out.append(synth.row(i), 1, RowOrigin::kSmote);
  return out;
}

// Inverse-class-frequency weights normalised so the largest weight is 1.
struct ClassWeights {
  double class0 = 1.0;
  double class1 = 1.0;
  std::vector<double> per_sample;

  double of(int label) const { return label == 1 ? class1 : class0; }
};

inline ClassWeights weights_from_counts(double n0, double n1, std::span<const int> labels) {
  // Raw weight of class c is 1/pi_c = n/n_c; dividing by the largest raw
  // weight leaves pi_min/pi_c.
  const double smaller = std::min(n0, n1);
  ClassWeights w;
  w.class0 = smaller / n0;
  w.class1 = smaller / n1;
  w.per_sample.reserve(labels.size());
  for (int v : labels) w.per_sample.push_back(w.of(v));
  return w;
}

inline ClassWeights class_weights(const Dataset& ds) {
  const auto n0 = ds.n0();
  const auto n1 = ds.n1();
  if (n0 == 0 || n1 == 0) throw InvalidParameter("class_weights: both classes must be non-empty");
  return weights_from_counts(static_cast<double>(n0), static_cast<double>(n1), ds.y);
}

// Uniform weights (the unweighted objective).
inline ClassWeights unit_weights(const Dataset& ds) {
  ClassWeights w;
  w.per_sample.assign(ds.n(), 1.0);
  return w;
}

// Class weights from Laplace-noised class counts. The count histogram has L1
// sensitivity 2 under bounded neighbours; noisy counts are floored at 1.
inline std::pair<ClassWeights, PrivacyBudget> private_class_weights(const Dataset& ds,
                                                                    double epsilon, Rng& rng) {
  if (!(epsilon > 0.0)) throw InvalidParameter("private_class_weights: epsilon must be positive");
  const double scale = 2.0 / epsilon;
  const double n0 = std::max(1.0, static_cast<double>(ds.n0()) + laplace_noise(scale, rng));
  const double n1 = std::max(1.0, static_cast<double>(ds.n1()) + laplace_noise(scale, rng));
  return {weights_from_counts(n0, n1, ds.y), PrivacyBudget{epsilon, 0.0}};
}

// Projects every row onto the l2 ball of the given radius and records the
// bound on the dataset.
inline Dataset bound_features(const Dataset& ds, double radius) {
  if (!(radius > 0.0)) throw InvalidParameter("bound_features: radius must be positive");
  Dataset out = ds;
  for (std::size_t i = 0; i < out.n(); ++i) project_to_ball(out.X.row(i), radius);
  out.row_norm_bound = out.row_norm_bound ? std::min(*out.row_norm_bound, radius) : radius;
  return out;
}

}  // namespace dpimb
