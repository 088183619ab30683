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
#include <limits>
#include <optional>
#include <span>
#include <string>

#include "dpimb/error.hpp"
#include "dpimb/random.hpp"

namespace dpimb {

// An (epsilon, delta) privacy loss. epsilon = +inf marks a non-private
// (noise disabled) computation.
struct PrivacyBudget {
  double epsilon = 0.0;
  double delta = 0.0;

  bool is_pure() const { return delta == 0.0; }
  bool is_finite() const { return std::isfinite(epsilon); }

  // Checks epsilon > 0 and delta in [0, 1).
  void validate(const char* context) const {
    if (!(epsilon > 0.0)) {
      throw InvalidParameter(std::string(context) + ": epsilon must be positive");
    }
    if (!(delta >= 0.0 && delta < 1.0)) {
      throw InvalidParameter(std::string(context) + ": delta must lie in [0, 1)");
    }
  }

  friend bool operator==(const PrivacyBudget&, const PrivacyBudget&) = default;
};

inline PrivacyBudget non_private_budget() {
  return {std::numeric_limits<double>::infinity(), 0.0};
}

// Selects whether a mechanism adds its calibrated noise. kDisabled exists for
// tests that check the noiseless limit.
enum class NoiseMode { kEnabled, kDisabled };

// ---------------------------------------------------------------------------
// Mechanisms

inline double laplace_noise(double scale, Rng& rng) {
  if (!(scale > 0.0)) throw InvalidParameter("laplace_noise: scale must be positive");
  return rng.laplace(scale);
}

// Gaussian mechanism standard deviation, valid for epsilon in (0, 1).
inline double gaussian_noise_sigma(double l2_sensitivity, const PrivacyBudget& budget) {
  if (!(l2_sensitivity > 0.0)) {
    throw InvalidParameter("gaussian_noise_sigma: sensitivity must be positive");
  }
  if (!(budget.epsilon > 0.0 && budget.epsilon < 1.0)) {
    throw OutOfRange("gaussian_noise_sigma: the Gaussian mechanism requires epsilon in (0, 1)");
  }
  if (!(budget.delta > 0.0 && budget.delta < 1.0)) {
    throw OutOfRange("gaussian_noise_sigma: delta must lie in (0, 1)");
  }
  return l2_sensitivity * std::sqrt(2.0 * std::log(1.25 / budget.delta)) / budget.epsilon;
}

inline double clip_scalar(double x, double radius) {
  if (!(radius > 0.0)) throw InvalidParameter("clip_scalar: radius must be positive");
  return std::max(-radius, std::min(x, radius));
}

// ---------------------------------------------------------------------------
// Composition

inline PrivacyBudget compose_basic(std::span<const PrivacyBudget> budgets) {
  if (budgets.empty()) throw InvalidParameter("compose_basic: empty budget list");
  PrivacyBudget total;
  for (const auto& b : budgets) {
    total.epsilon += b.epsilon;
    total.delta += b.delta;
  }
  return total;
}

// Advanced composition of m uses of an (epsilon, delta) mechanism:
//   (sqrt(2 m ln(1/delta')) eps + m eps (e^eps - 1), m delta + delta').
inline PrivacyBudget compose_advanced(const PrivacyBudget& per_mechanism, std::int64_t m,
                                      double delta_prime) {
  if (m < 1) throw InvalidParameter("compose_advanced: m must be at least 1");
  if (!(delta_prime > 0.0 && delta_prime < 1.0)) {
    throw InvalidParameter("compose_advanced: delta' must lie in (0, 1)");
  }
  const double eps = per_mechanism.epsilon;
  const double md = static_cast<double>(m);
  return {std::sqrt(2.0 * md * std::log(1.0 / delta_prime)) * eps +
              md * eps * std::expm1(eps),
          md * per_mechanism.delta + delta_prime};
}

// Largest per-mechanism epsilon whose m-fold advanced composition stays within
// target_epsilon (bisection on the strictly increasing composition map).
inline double invert_compose_advanced(double target_epsilon, std::int64_t m,
                                      double delta_prime) {
  if (!(target_epsilon > 0.0)) {
    throw InvalidParameter("invert_compose_advanced: target epsilon must be positive");
  }
  double lo = 0.0;
  double hi = target_epsilon;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (compose_advanced({mid, 0.0}, m, delta_prime).epsilon <= target_epsilon) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

// ---------------------------------------------------------------------------
// Budget adjustments for non-private augmentation ahead of a DP learner.

inline std::int64_t replication_factor(std::int64_t generated, std::int64_t n1) {
  if (n1 < 1) throw InvalidParameter("replication_factor: n1 must be at least 1");
  if (generated < 0) throw InvalidParameter("replication_factor: N must be non-negative");
  return (generated + n1 - 1) / n1;
}

// Deterministic oversampling of N points from n1 minority points multiplies
// both parameters by ceil(N/n1) + 1.
inline PrivacyBudget oversampling_adjusted_budget(const PrivacyBudget& base,
                                                  std::int64_t generated, std::int64_t n1) {
  const double factor = static_cast<double>(replication_factor(generated, n1)) + 1.0;
  return {base.epsilon * factor, base.delta * factor};
}

// Exponents of the asymptotic kissing-number bounds
// 2^{0.2075 d (1+o(1))} <= K(d) <= 2^{0.4042 d} (Wyner; Kabatiansky-Levenshtein).
inline constexpr double kKissingLowerExponent = 0.2075;
inline constexpr double kKissingUpperExponent = 0.4042;

struct SmoteAdjustment {
  int d = 0;                // data dimension (0 is a degenerate, no-geometry case)
  int k = 1;                // neighbours
  std::int64_t n1 = 1;      // minority count
  std::int64_t generated = 0;  // N, points produced by SMOTE
  double gamma = 0.0;       // Chernoff slack

  std::int64_t replication() const { return replication_factor(generated, n1); }
  double kissing_growth() const { return std::exp2(kKissingUpperExponent * d); }

  void validate() const {
    if (d < 0) throw InvalidParameter("SmoteAdjustment: d must be non-negative");
    if (k < 1) throw InvalidParameter("SmoteAdjustment: k must be at least 1");
    if (n1 < 1) throw InvalidParameter("SmoteAdjustment: n1 must be at least 1");
    if (generated < 0) throw InvalidParameter("SmoteAdjustment: N must be non-negative");
    if (!(gamma >= 0.0)) throw InvalidParameter("SmoteAdjustment: gamma must be non-negative");
  }
};

// Pure guarantee for an eps-DP learner run on data + SMOTE output:
//   eps * (2^{0.4042 d} ceil(N/n1) + 1).
inline double smote_adjusted_epsilon_pure(double base_epsilon, const SmoteAdjustment& adj) {
  adj.validate();
  return base_epsilon *
         (adj.kissing_growth() * static_cast<double>(adj.replication()) + 1.0);
}

struct ApproxAdjustedBudget {
  PrivacyBudget budget;     // delta clamped to [0, 1]
  double log_delta_raw = 0; // natural log of the unclamped delta expression
  bool vacuous = false;     // raw delta >= 1: the guarantee says nothing
};

// Approximate guarantee for an eps-DP learner run on data + SMOTE output:
//   eps' = eps (1+gamma) 2^{0.4042 d} ceil(N/n1) / k
//   delta = exp(k 2^{0.4042 d} ceil(N/n1) (eps - gamma^2 / (k (2+gamma)))).
inline ApproxAdjustedBudget smote_adjusted_budget_approx(double base_epsilon,
                                                         const SmoteAdjustment& adj) {
  adj.validate();
  const double growth = adj.kissing_growth() * static_cast<double>(adj.replication());
  ApproxAdjustedBudget out;
  out.budget.epsilon = base_epsilon * (1.0 + adj.gamma) * growth / adj.k;
  out.log_delta_raw =
      adj.k * growth * (base_epsilon - adj.gamma * adj.gamma / (adj.k * (2.0 + adj.gamma)));
  out.vacuous = out.log_delta_raw >= 0.0;
  out.budget.delta = out.vacuous ? 1.0 : std::exp(out.log_delta_raw);
  return out;
}

// Known exact kissing numbers.
inline std::optional<std::int64_t> exact_kissing_number(int d) {
  switch (d) {
    case 1: return 2;
    case 2: return 6;
    case 3: return 12;
    case 4: return 24;
    case 8: return 240;
    case 24: return 196560;
    default: return std::nullopt;
  }
}

struct KissingBound {
  double lower = 0;   // k 2^{0.2075 d}
  double upper = 0;   // min(k 2^{0.4042 d}, n1)
  std::optional<std::int64_t> exact_small_d;  // min(k K(d), n1) where K(d) is known
};

// Bounds on l(d, k), the number of times one point can be among the k nearest
// neighbours of n1 other points.
inline KissingBound kissing_bound(int d, int k, std::int64_t n1) {
  if (d < 1 || k < 1 || n1 < 1) {
    throw InvalidParameter("kissing_bound: d, k and n1 must be at least 1");
  }
  KissingBound b;
  b.lower = k * std::exp2(kKissingLowerExponent * d);
  b.upper = std::min(k * std::exp2(kKissingUpperExponent * d), static_cast<double>(n1));
  if (auto kd = exact_kissing_number(d)) b.exact_small_d = std::min<std::int64_t>(k * *kd, n1);
  return b;
}

// ---------------------------------------------------------------------------
// Intrinsic privacy of bagging non-private learners.

struct BaggingParams {
  std::int64_t m = 1;      // base models
  std::int64_t k_sub = 1;  // subsample size
  std::int64_t n = 2;      // dataset size
};

// eps = mk ln((n+1)/n), delta = 1 - ((n-1)/n)^{mk}, for a real product mk.
inline PrivacyBudget bagging_budget_for_product(double mk, std::int64_t n) {
  if (n < 2) throw InvalidParameter("bagging: n must be at least 2");
  if (!(mk > 0.0)) throw InvalidParameter("bagging: m*k must be positive");
  const double inv_n = 1.0 / static_cast<double>(n);
  return {mk * std::log1p(inv_n), -std::expm1(mk * std::log1p(-inv_n))};
}

inline PrivacyBudget bagging_intrinsic_budget(const BaggingParams& p) {
  if (p.m < 1 || p.k_sub < 1) throw InvalidParameter("bagging: m and k_sub must be at least 1");
  return bagging_budget_for_product(static_cast<double>(p.m) * static_cast<double>(p.k_sub),
                                    p.n);
}

// The product m*k that makes delta = n^{-c}:
//   mk = ln(1 - n^{-c}) / (ln(n-1) - ln n).
inline double bagging_inverted_mk(std::int64_t n, double c) {
  if (n < 2) throw InvalidParameter("bagging_inverted_mk: n must be at least 2");
  if (!(c > 1.0)) throw InvalidParameter("bagging_inverted_mk: c must exceed 1");
  const double nd = static_cast<double>(n);
  return std::log1p(-std::pow(nd, -c)) / std::log1p(-1.0 / nd);
}

}  // namespace dpimb
