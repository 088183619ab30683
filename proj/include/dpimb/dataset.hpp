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

#include <cstdint>
#include <limits>
#include <span>
#include <optional>
#include <string>
#include <vector>

#include "dpimb/error.hpp"
#include "dpimb/matrix.hpp"

namespace dpimb {

// Where a row came from. Lets pipelines prove that augmentation never touched
// an evaluation split.
enum class RowOrigin : std::uint8_t { kOriginal, kOversampled, kSmote, kSynthetic };

struct FeatureBounds {
  double lo = 0.0;
  double hi = 0.0;
};

// Feature matrix with public per-feature bounds and a binary label vector.
struct Dataset {
  Matrix X;
  std::vector<int> y;
  std::vector<FeatureBounds> bounds;
  std::vector<std::string> feature_names;
  std::vector<RowOrigin> origin;
  // Set by bound_features: every row satisfies ||x|| <= row_norm_bound.
  std::optional<double> row_norm_bound;

  std::size_t n() const { return y.size(); }
  std::size_t d() const { return X.cols(); }

  std::size_t count(int label) const {
    std::size_t c = 0;
    for (int v : y) c += (v == label);
    return c;
  }
  std::size_t n0() const { return count(0); }
  std::size_t n1() const { return count(1); }

  // Imbalance ratio n0 / n1 (infinite when n1 = 0).
  double imbalance_ratio() const {
    const auto pos = n1();
    return pos == 0 ? std::numeric_limits<double>::infinity()
                    : static_cast<double>(n0()) / static_cast<double>(pos);
  }

  void check_consistent() const {
    if (X.rows() != y.size()) throw InvalidParameter("Dataset: X rows != |y|");
    if (!bounds.empty() && bounds.size() != X.cols()) {
      throw InvalidParameter("Dataset: bounds width != d");
    }
    if (!origin.empty() && origin.size() != y.size()) {
      throw InvalidParameter("Dataset: origin tags length != n");
    }
    for (int v : y) {
      if (v != 0 && v != 1) throw InvalidParameter("Dataset: labels must be 0 or 1");
    }
  }

  void append(std::span<const double> x, int label, RowOrigin from) {
    X.append_row(x);
    y.push_back(label);
    origin.resize(y.size() - 1, RowOrigin::kOriginal);
    origin.push_back(from);
  }

  Dataset subset(std::span<const std::size_t> idx) const {
    Dataset out;
    out.X = X.take_rows(idx);
    out.bounds = bounds;
    out.feature_names = feature_names;
    out.row_norm_bound = row_norm_bound;
    out.y.reserve(idx.size());
    for (auto i : idx) {
      out.y.push_back(y[i]);
      out.origin.push_back(origin.empty() ? RowOrigin::kOriginal : origin[i]);
    }
    return out;
  }

  // Rows of the given class as a matrix.
  Matrix class_rows(int label) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] == label) idx.push_back(i);
    }
    return X.take_rows(idx);
  }
};

// Flips labels when class 1 is the larger class so that the positive class is
// the minority. Returns true when a relabel happened.
inline bool ensure_minority_positive(Dataset& ds) {
  if (ds.n1() <= ds.n0()) return false;
  for (int& v : ds.y) v = 1 - v;
  return true;
}

}  // namespace dpimb
