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
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dpimb/analytic.hpp"
#include "dpimb/dataset.hpp"
#include "dpimb/error.hpp"
#include "dpimb/format.hpp"
#include "dpimb/io.hpp"
#include "dpimb/random.hpp"

namespace dpimb {

// Two Gaussian classes with a shared diagonal covariance.
struct MixtureGenSpec {
  std::vector<double> mean0{0.0, 0.0};
  std::vector<double> mean1{4.0, 4.0};
  std::vector<double> variance{4.0, 4.0};
  double p1 = 0.1;
  std::int64_t n = 1000;
  std::uint64_t seed = 0;

  std::size_t d() const { return mean0.size(); }

  void validate() const {
    if (mean0.empty() || mean1.size() != mean0.size() || variance.size() != mean0.size()) {
      throw InvalidParameter("MixtureGenSpec: means and variance must share a positive dimension");
    }
    for (double v : variance) {
      if (!(v > 0.0)) throw InvalidParameter("MixtureGenSpec: variances must be positive");
    }
    if (!(p1 > 0.0 && p1 < 1.0)) throw InvalidParameter("MixtureGenSpec: p1 must lie in (0, 1)");
    if (n < 1) throw InvalidParameter("MixtureGenSpec: n must be positive");
  }
};

// Public bounds: per feature, the widest mean +/- 6 std interval over the two
// classes. Draws outside the bounds are clipped.
inline std::vector<FeatureBounds> mixture_bounds(const MixtureGenSpec& spec) {
  std::vector<FeatureBounds> b(spec.d());
  for (std::size_t j = 0; j < spec.d(); ++j) {
    const double s = 6.0 * std::sqrt(spec.variance[j]);
    b[j] = {std::min(spec.mean0[j], spec.mean1[j]) - s, std::max(spec.mean0[j], spec.mean1[j]) + s};
  }
  return b;
}

inline Dataset generate_mixture(const MixtureGenSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  Dataset ds;
  ds.X = Matrix(0, spec.d());
  ds.bounds = mixture_bounds(spec);
  for (std::size_t j = 0; j < spec.d(); ++j) ds.feature_names.push_back("x" + std::to_string(j + 1));
  std::vector<double> row(spec.d());
  for (std::int64_t i = 0; i < spec.n; ++i) {
    const int y = rng.bernoulli(spec.p1) ? 1 : 0;
    const auto& mean = y == 1 ? spec.mean1 : spec.mean0;
    for (std::size_t j = 0; j < spec.d(); ++j) {
      const double v = mean[j] + std::sqrt(spec.variance[j]) * rng.normal();
      row[j] = std::clamp(v, ds.bounds[j].lo, ds.bounds[j].hi);
    }
    ds.append(row, y, RowOrigin::kOriginal);
  }
  return ds;
}

// One feature, Pr(y = 1) = 1/(1 + r*), bounds [-R, R].
inline Dataset generate_1d_mixture(const analytic::MixtureSpec& spec, std::int64_t n, Rng& rng) {
  spec.validate();
  if (n < 1) throw InvalidParameter("generate_1d_mixture: n must be positive");
  const double p1 = 1.0 / (1.0 + spec.r_star);
  Dataset ds;
  ds.X = Matrix(0, 1);
  ds.bounds = {{-spec.R, spec.R}};
  ds.feature_names = {"x"};
  for (std::int64_t i = 0; i < n; ++i) {
    const int y = rng.bernoulli(p1) ? 1 : 0;
    const double row[1] = {(y == 1 ? spec.mu1 : spec.mu0) + spec.sigma * rng.normal()};
    ds.append(row, y, RowOrigin::kOriginal);
  }
  return ds;
}

// Keeps a uniformly random subset of at most n0 negatives and n1 positives,
// preserving row order.
inline Dataset subsample_classes(const Dataset& ds, std::int64_t n0, std::int64_t n1, std::uint64_t seed) {
  if (n0 < 1 || n1 < 1) throw InvalidParameter("subsample_classes: class sizes must be positive");
  Rng rng(seed);
  std::vector<char> keep(ds.n(), 0);
  for (int cls : {0, 1}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < ds.n(); ++i) {
      if (ds.y[i] == cls) idx.push_back(i);
    }
    const auto want = static_cast<std::size_t>(std::min<std::int64_t>(cls == 1 ? n1 : n0,
                                                                       static_cast<std::int64_t>(idx.size())));
    for (std::size_t i = 0; i < want; ++i) {
      const std::size_t j = i + rng.uniform_index(idx.size() - i);
      std::swap(idx[i], idx[j]);
      keep[idx[i]] = 1;
    }
  }
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    if (keep[i]) rows.push_back(i);
  }
  return ds.subset(rows);
}

// ---------------------------------------------------------------------------
// CSV

struct CsvOptions {
  std::string label_column = "label";
  // Label text mapped to class 1; when unset, labels must read as 0 or 1.
  std::optional<std::string> positive_label;
  // Public bounds by feature name. Missing features get bounds from the data.
  std::map<std::string, FeatureBounds> bounds;
};

struct ClipReport {
  std::vector<std::int64_t> per_feature;
  std::int64_t total = 0;
};

struct CsvLoadResult {
  Dataset data;
  ClipReport clips;
  // Names of features whose bounds were inferred from the data.
  std::vector<std::string> data_dependent_bounds;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

}  // namespace detail

inline CsvLoadResult parse_csv(std::istream& in, const CsvOptions& opts, const std::string& source = "<stream>") {
  std::string line;
  std::size_t line_no = 0;
  auto where = [&]() { return source + ":" + std::to_string(line_no); };
  if (!std::getline(in, line)) throw DataError(source + ": empty file, a header row is required");
  ++line_no;
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = detail::split_csv_line(line);
  std::optional<std::size_t> label_col;
  std::vector<std::size_t> feature_cols;
  CsvLoadResult res;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string name(header[c]);
    if (name.empty()) throw DataError(where() + ": empty column name in header");
    if (name == opts.label_column) {
      label_col = c;
    } else {
      feature_cols.push_back(c);
      res.data.feature_names.push_back(name);
    }
  }
  if (!label_col) throw DataError(where() + ": label column '" + opts.label_column + "' not found");
  if (feature_cols.empty()) throw DataError(where() + ": no feature columns");

  const std::size_t d = feature_cols.size();
  res.data.X = Matrix(0, d);
  std::vector<double> row(d);
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size()) {
      throw DataError(where() + ": expected " + std::to_string(header.size()) + " fields, found " +
                      std::to_string(fields.size()));
    }
    const auto label_text = fields[*label_col];
    if (label_text.empty()) throw DataError(where() + ": missing label");
    int label = 0;
    if (opts.positive_label) {
      label = label_text == *opts.positive_label ? 1 : 0;
    } else {
      double v = 0.0;
      if (!parse_double(label_text, v) || (v != 0.0 && v != 1.0)) {
        throw DataError(where() + ": label '" + std::string(label_text) +
                        "' is not 0 or 1; set a positive label mapping");
      }
      label = static_cast<int>(v);
    }
    for (std::size_t j = 0; j < d; ++j) {
      const auto field = fields[feature_cols[j]];
      if (!parse_double(field, row[j]) || !std::isfinite(row[j])) {
        throw DataError(where() + ": non-numeric value '" + std::string(field) + "' in column '" +
                        res.data.feature_names[j] + "'");
      }
    }
    res.data.append(row, label, RowOrigin::kOriginal);
  }
  if (res.data.n() == 0) throw DataError(source + ": no data rows");
  if (res.data.n0() == 0 || res.data.n1() == 0) throw DataError(source + ": file contains a single class");

  res.data.bounds.resize(d);
  res.clips.per_feature.assign(d, 0);
  for (std::size_t j = 0; j < d; ++j) {
    const auto& name = res.data.feature_names[j];
    const auto it = opts.bounds.find(name);
    if (it != opts.bounds.end()) {
      if (!(it->second.hi >= it->second.lo)) throw InvalidParameter("bounds for '" + name + "' have hi < lo");
      res.data.bounds[j] = it->second;
      for (std::size_t r = 0; r < res.data.n(); ++r) {
        double& v = res.data.X(r, j);
        const double c = std::clamp(v, it->second.lo, it->second.hi);
        if (c != v) {
          v = c;
          ++res.clips.per_feature[j];
          ++res.clips.total;
        }
      }
    } else {
      double lo = res.data.X(0, j), hi = lo;
      for (std::size_t r = 1; r < res.data.n(); ++r) {
        lo = std::min(lo, res.data.X(r, j));
        hi = std::max(hi, res.data.X(r, j));
      }
      res.data.bounds[j] = {lo, hi};
      res.data_dependent_bounds.push_back(name);
    }
  }
  if (!res.data_dependent_bounds.empty()) {
    res.warnings.push_back("data-dependent bounds inferred for " +
                           std::to_string(res.data_dependent_bounds.size()) +
                           " feature(s); this leaks information outside the privacy budget");
  }
  return res;
}

inline CsvLoadResult load_csv(const std::string& path, const CsvOptions& opts) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return parse_csv(in, opts, path);
}

inline void write_csv(std::ostream& out, const Dataset& ds, const std::string& label_column = "label") {
  for (std::size_t j = 0; j < ds.d(); ++j) {
    out << (j < ds.feature_names.size() ? ds.feature_names[j] : "x" + std::to_string(j + 1)) << ',';
  }
  out << label_column << '\n';
  for (std::size_t r = 0; r < ds.n(); ++r) {
    for (std::size_t j = 0; j < ds.d(); ++j) out << format_double(ds.X(r, j)) << ',';
    out << ds.y[r] << '\n';
  }
}

inline std::string csv_string(const Dataset& ds, const std::string& label_column = "label") {
  std::ostringstream os;
  write_csv(os, ds, label_column);
  return os.str();
}

inline void save_csv(const std::string& path, const Dataset& ds, const std::string& label_column = "label") {
  write_file_atomic(path, csv_string(ds, label_column));
}

}  // namespace dpimb
