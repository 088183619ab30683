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
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "dpimb/dataset.hpp"
#include "dpimb/dp_core.hpp"
#include "dpimb/error.hpp"
#include "dpimb/random.hpp"

namespace dpimb {

// Equal-width bins over the public bounds of each feature.
class Discretizer {
 public:
  Discretizer(std::vector<FeatureBounds> bounds, int bins_per_feature = 10)
      : bounds_(std::move(bounds)), bins_(bins_per_feature) {
    if (bins_ < 1) throw InvalidParameter("Discretizer: bins_per_feature must be >= 1");
    for (const auto& b : bounds_) {
      if (!(b.hi > b.lo)) throw InvalidParameter("Discretizer: bounds must satisfy lo < hi");
    }
  }

  std::size_t features() const { return bounds_.size(); }
  int bins() const { return bins_; }
  const std::vector<FeatureBounds>& bounds() const { return bounds_; }

  // Bin edge e in [0, bins] of feature j.
  double edge(std::size_t j, int e) const {
    const auto& b = bounds_[j];
    return b.lo + (b.hi - b.lo) * static_cast<double>(e) / bins_;
  }

  // Values outside the bounds land in the first or last bin.
  int encode(std::size_t j, double v) const {
    const auto& b = bounds_[j];
    const double pos = (v - b.lo) / (b.hi - b.lo) * bins_;
    if (!(pos >= 0.0)) return 0;
    return std::min(static_cast<int>(pos), bins_ - 1);
  }

  double decode(std::size_t j, int bin) const {
    return 0.5 * (edge(j, bin) + edge(j, bin + 1));
  }

 private:
  std::vector<FeatureBounds> bounds_;
  int bins_;
};

// Noisy class prior and per-class one-way marginals over discretised features.
struct MarginalSynthModel {
  Discretizer discretizer;
  std::array<double, 2> class_prior{0.5, 0.5};
  // marginals[c][j][b]: probability of bin b of feature j within class c.
  std::array<std::vector<std::vector<double>>, 2> marginals;
  PrivacyBudget budget_spent;

  std::size_t d() const { return discretizer.features(); }
};

namespace detail {

// Clamp negatives to zero and renormalise; an all-zero vector becomes uniform.
inline void project_to_simplex(std::vector<double>& v) {
  double total = 0.0;
  for (double& x : v) {
    x = std::max(0.0, x);
    total += x;
  }
  if (!(total > 0.0)) {
    std::fill(v.begin(), v.end(), 1.0 / static_cast<double>(v.size()));
    return;
  }
  for (double& x : v) x /= total;
}

inline std::size_t sample_categorical(std::span<const double> p, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return i;
  }
  // Rounding left u above the accumulated mass: return the last non-empty cell.
  for (std::size_t i = p.size(); i-- > 0;) {
    if (p[i] > 0.0) return i;
  }
  return p.size() - 1;
}

}  // namespace detail

// Select: class prior and all class-conditional one-way marginals (2d + 1
// histograms). Measure: Laplace noise of scale 2/eps_share on every cell (L1
// sensitivity 2 under bounded neighbours). Project: clamp and renormalise.
// epsilon = +inf disables the noise.
inline MarginalSynthModel fit_marginal_synth(const Dataset& ds, const Discretizer& disc,
                                             const PrivacyBudget& budget, Rng& rng) {
  if (!(budget.epsilon > 0.0)) throw InvalidParameter("fit_marginal_synth: epsilon must be positive");
  if (budget.delta != 0.0) throw InvalidParameter("fit_marginal_synth: pure Laplace accounting requires delta = 0");
  if (ds.n0() == 0 || ds.n1() == 0) throw InvalidParameter("fit_marginal_synth: both classes must be non-empty");
  if (disc.features() != ds.d()) throw InvalidParameter("fit_marginal_synth: discretizer width != d");

  const std::size_t d = ds.d();
  const int bins = disc.bins();
  const std::size_t shares = 2 * d + 1;
  const double share_eps = budget.epsilon / static_cast<double>(shares);
  const bool noisy = std::isfinite(budget.epsilon);
  const double scale = 2.0 / share_eps;
  auto noise = [&]() { return noisy ? laplace_noise(scale, rng) : 0.0; };

  MarginalSynthModel model{disc, {}, {}, {}};
  std::vector<double> prior{static_cast<double>(ds.n0()), static_cast<double>(ds.n1())};
  for (double& c : prior) c += noise();
  detail::project_to_simplex(prior);
  model.class_prior = {prior[0], prior[1]};

  for (int c = 0; c < 2; ++c) {
    auto& tables = model.marginals[c];
    tables.assign(d, std::vector<double>(bins, 0.0));
    for (std::size_t i = 0; i < ds.n(); ++i) {
      if (ds.y[i] != c) continue;
      for (std::size_t j = 0; j < d; ++j) tables[j][disc.encode(j, ds.X(i, j))] += 1.0;
    }
    for (auto& t : tables) {
      for (double& cell : t) cell += noise();
      detail::project_to_simplex(t);
    }
  }

  std::vector<PrivacyBudget> parts(shares, PrivacyBudget{share_eps, 0.0});
  const PrivacyBudget composed = compose_basic(parts);
  if (noisy && std::abs(composed.epsilon - budget.epsilon) > 1e-12 * std::max(1.0, budget.epsilon)) {
    throw ConfigurationError("fit_marginal_synth: even split does not recompose to the requested epsilon");
  }
  // Report the requested value so receipts round-trip exactly.
  model.budget_spent = budget;
  return model;
}

// count rows from the class-c product distribution, as bin midpoints.
inline Matrix sample_conditional(const MarginalSynthModel& model, int cls, std::size_t count,
                                 Rng& rng) {
  if (cls != 0 && cls != 1) throw InvalidParameter("sample_conditional: class must be 0 or 1");
  const std::size_t d = model.d();
  Matrix out(count, d);
  for (std::size_t r = 0; r < count; ++r) {
    for (std::size_t j = 0; j < d; ++j) {
      const auto bin = detail::sample_categorical(model.marginals[cls][j], rng);
      out(r, j) = model.discretizer.decode(j, static_cast<int>(bin));
    }
  }
  return out;
}

enum class SamplingMode { kConditional, kRejection };

struct SamplingStats {
  std::uint64_t draws = 0;
  std::uint64_t discarded = 0;
};

// N/2 rows of each class. Conditional mode samples each class directly
// (minority first). Rejection mode draws (label, features) from the joint
// model and keeps the first N/2 rows of each class.
inline Dataset balance_with_synth(const MarginalSynthModel& model, std::int64_t total,
                                  SamplingMode mode, Rng& rng, SamplingStats* stats = nullptr) {
  if (total < 0 || total % 2 != 0) throw InvalidParameter("balance_with_synth: N must be a non-negative even number");
  const auto half = static_cast<std::size_t>(total / 2);
  Dataset out;
  out.bounds = model.discretizer.bounds();
  out.X = Matrix(0, model.d());
  SamplingStats local;

  if (mode == SamplingMode::kConditional) {
    for (int cls : {1, 0}) {
      Matrix rows = sample_conditional(model, cls, half, rng);
      for (std::size_t r = 0; r < rows.rows(); ++r) out.append(rows.row(r), cls, RowOrigin::kSynthetic);
    }
    local.draws = 2 * half;
  } else {
    if (half > 0 && std::min(model.class_prior[0], model.class_prior[1]) < 1e-12) {
      throw ConfigurationError(
          "balance_with_synth: a class prior below 1e-12 would exhaust the rejection attempt budget");
    }
    const std::uint64_t max_draws = 1000000ULL * static_cast<std::uint64_t>(std::max<std::int64_t>(total, 1));
    std::array<std::size_t, 2> kept{0, 0};
    std::vector<double> row(model.d());
    while (kept[0] < half || kept[1] < half) {
      if (local.draws >= max_draws) throw ConfigurationError("balance_with_synth: rejection attempt budget exhausted");
      ++local.draws;
      const int cls = static_cast<int>(detail::sample_categorical(model.class_prior, rng));
      for (std::size_t j = 0; j < model.d(); ++j) {
        row[j] = model.discretizer.decode(
            j, static_cast<int>(detail::sample_categorical(model.marginals[cls][j], rng)));
      }
      if (kept[cls] < half) {
        ++kept[cls];
        out.append(row, cls, RowOrigin::kSynthetic);
      } else {
        ++local.discarded;
      }
    }
  }
  if (stats) *stats = local;
  return out;
}

// Fit then balance. Sampling is post-processing, so the spent budget is the
// synthesizer's budget regardless of N or mode.
inline std::pair<Dataset, PrivacyBudget> end_to_end_private_balance(
    const Dataset& ds, const Discretizer& disc, const PrivacyBudget& budget, std::int64_t total,
    SamplingMode mode, Rng& rng) {
  MarginalSynthModel model = fit_marginal_synth(ds, disc, budget, rng);
  Dataset balanced = balance_with_synth(model, total, mode, rng);
  balanced.feature_names = ds.feature_names;
  return {std::move(balanced), model.budget_spent};
}

}  // namespace dpimb
