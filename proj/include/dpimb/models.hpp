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
#include <limits>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "dpimb/dataset.hpp"
#include "dpimb/dp_core.hpp"
#include "dpimb/error.hpp"
#include "dpimb/matrix.hpp"
#include "dpimb/preprocess.hpp"
#include "dpimb/random.hpp"

namespace dpimb {

// Value of the constant intercept coordinate. Features are scaled to norm at
// most this value so the augmented row stays inside the unit ball.
inline const double kInterceptFeature = 1.0 / std::sqrt(2.0);

// Maps features from their public bounds into a ball of the given radius:
// clip to [lo, hi], map affinely to [-1, 1], scale by radius / sqrt(d).
struct FeatureScaler {
  std::vector<FeatureBounds> bounds;
  double radius = kInterceptFeature;

  void apply(std::span<double> row) const {
    if (row.size() != bounds.size()) throw InvalidParameter("FeatureScaler: width mismatch");
    if (row.empty()) return;
    const double s = radius / std::sqrt(static_cast<double>(row.size()));
    for (std::size_t j = 0; j < row.size(); ++j) {
      const auto& b = bounds[j];
      const double width = b.hi - b.lo;
      if (!(width > 0.0)) {
        row[j] = 0.0;
        continue;
      }
      const double v = std::clamp(row[j], b.lo, b.hi);
      row[j] = (2.0 * (v - b.lo) / width - 1.0) * s;
    }
    project_to_ball(row, radius);
  }

  Matrix transform(const Matrix& X) const {
    Matrix out = X;
    for (std::size_t r = 0; r < out.rows(); ++r) apply(out.row(r));
    return out;
  }

  Dataset transform(const Dataset& ds) const {
    Dataset out = ds;
    out.X = transform(ds.X);
    const double s = ds.d() == 0 ? 0.0 : radius / std::sqrt(static_cast<double>(ds.d()));
    out.bounds.assign(ds.d(), FeatureBounds{-s, s});
    out.row_norm_bound = radius;
    return out;
  }
};

struct LinearModel {
  Vector beta;
  double intercept = 0.0;
  double threshold = 0.5;

  std::size_t d() const { return beta.size(); }
  double score(std::span<const double> x) const { return dot(x, beta) + intercept; }
};

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct Predictions {
  Vector scores;
  std::vector<int> labels;
};

// Label 1 iff sigmoid(score) >= threshold.
inline Predictions predict(const LinearModel& model, const Matrix& X) {
  if (X.rows() > 0 && X.cols() != model.d()) {
    throw InvalidParameter("predict: matrix has " + std::to_string(X.cols()) +
                           " columns, model expects " + std::to_string(model.d()));
  }
  Predictions p;
  p.scores.reserve(X.rows());
  p.labels.reserve(X.rows());
  for (std::size_t r = 0; r < X.rows(); ++r) {
    const double s = model.score(X.row(r));
    p.scores.push_back(s);
    p.labels.push_back(sigmoid(s) >= model.threshold ? 1 : 0);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Weighted logistic objective
//
//   J(beta) = (1/n) sum_i w_i l(y_i, x_i.beta) + (reg/2)|beta|^2 + (1/n) b.beta
//
// with l(y, eta) = ln(1 + exp(-s eta)), s = 2y - 1.

namespace logistic {

inline double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

inline double loss(int y, double eta) { return softplus(y == 1 ? -eta : eta); }

// d l / d eta
inline double dloss(int y, double eta) {
  return y == 1 ? -sigmoid(-eta) : sigmoid(eta);
}

// d^2 l / d eta^2, bounded by 1/4.
inline double d2loss(double eta) {
  const double p = sigmoid(eta);
  return p * (1.0 - p);
}

}  // namespace logistic

inline constexpr double kLogisticCurvature = 0.25;

// Row-wise design matrix, optionally with the constant intercept column last.
inline Matrix design_matrix(const Matrix& X, bool fit_intercept) {
  if (!fit_intercept) return X;
  Matrix out(X.rows(), X.cols() + 1);
  for (std::size_t r = 0; r < X.rows(); ++r) {
    auto src = X.row(r);
    std::copy(src.begin(), src.end(), out.row(r).begin());
    out(r, X.cols()) = kInterceptFeature;
  }
  return out;
}

inline LinearModel model_from_augmented(const Vector& theta, bool fit_intercept) {
  LinearModel m;
  if (fit_intercept) {
    m.beta.assign(theta.begin(), theta.end() - 1);
    m.intercept = theta.back() * kInterceptFeature;
  } else {
    m.beta = theta;
  }
  return m;
}

struct WeightedLogisticObjective {
  const Matrix& Z;
  std::span<const int> y;
  std::span<const double> w;
  double reg = 0.0;
  Vector linear;  // b; empty means zero

  std::size_t n() const { return Z.rows(); }
  std::size_t p() const { return Z.cols(); }

  double value(std::span<const double> beta) const {
    double total = 0.0;
    for (std::size_t i = 0; i < n(); ++i) total += w[i] * logistic::loss(y[i], dot(Z.row(i), beta));
    double v = total / static_cast<double>(n()) + 0.5 * reg * dot(beta, beta);
    if (!linear.empty()) v += dot(linear, beta) / static_cast<double>(n());
    return v;
  }

  Vector gradient(std::span<const double> beta) const {
    Vector g(p(), 0.0);
    for (std::size_t i = 0; i < n(); ++i) {
      const auto zi = Z.row(i);
      const double a = w[i] * logistic::dloss(y[i], dot(zi, beta));
      for (std::size_t j = 0; j < p(); ++j) g[j] += a * zi[j];
    }
    const double inv_n = 1.0 / static_cast<double>(n());
    for (std::size_t j = 0; j < p(); ++j) {
      g[j] = g[j] * inv_n + reg * beta[j];
      if (!linear.empty()) g[j] += linear[j] * inv_n;
    }
    return g;
  }

  // Dense row-major p x p Hessian.
  std::vector<double> hessian(std::span<const double> beta) const {
    const std::size_t q = p();
    std::vector<double> h(q * q, 0.0);
    for (std::size_t i = 0; i < n(); ++i) {
      const auto zi = Z.row(i);
      const double a = w[i] * logistic::d2loss(dot(zi, beta));
      if (a == 0.0) continue;
      for (std::size_t r = 0; r < q; ++r) {
        const double ar = a * zi[r];
        for (std::size_t c = 0; c <= r; ++c) h[r * q + c] += ar * zi[c];
      }
    }
    const double inv_n = 1.0 / static_cast<double>(n());
    for (std::size_t r = 0; r < q; ++r) {
      for (std::size_t c = 0; c <= r; ++c) {
        h[r * q + c] *= inv_n;
        h[c * q + r] = h[r * q + c];
      }
      h[r * q + r] += reg;
    }
    return h;
  }
};

struct SolverOptions {
  double tolerance = 1e-8;  // on the gradient norm
  int max_iterations = 100;
};

struct SolverReport {
  Vector beta;
  double gradient_norm = 0.0;
  int iterations = 0;
};

// Damped Newton with Armijo backtracking. The objective is strongly convex
// whenever reg > 0.
inline SolverReport minimize(const WeightedLogisticObjective& f, const SolverOptions& opts) {
  if (!(opts.tolerance > 0.0) || opts.max_iterations < 1) {
    throw InvalidParameter("minimize: tolerance and max_iterations must be positive");
  }
  if (f.n() == 0) throw DataError("minimize: empty training set");
  const std::size_t q = f.p();
  SolverReport rep;
  rep.beta.assign(q, 0.0);
  Vector g = f.gradient(rep.beta);
  double gnorm = norm2(g);
  double value = f.value(rep.beta);

  while (gnorm > opts.tolerance) {
    if (rep.iterations >= opts.max_iterations) {
      throw ConvergenceError("minimize: no convergence after " + std::to_string(rep.iterations) +
                                 " Newton iterations",
                             gnorm);
    }
    ++rep.iterations;
    Vector step(q);
    for (std::size_t j = 0; j < q; ++j) step[j] = -g[j];
    if (!cholesky_solve(f.hessian(rep.beta), q, step)) {
      throw ConvergenceError("minimize: Hessian is not positive definite", gnorm);
    }
    const double slope = dot(g, step);
    double t = 1.0;
    Vector trial(q);
    bool accepted = false;
    for (int k = 0; k < 60; ++k) {
      for (std::size_t j = 0; j < q; ++j) trial[j] = rep.beta[j] + t * step[j];
      const double tv = f.value(trial);
      if (tv <= value + 1e-4 * t * slope) {
        accepted = true;
        value = tv;
        break;
      }
      // At the roundoff floor of J a full Newton step is still judged by the
      // gradient it produces.
      if (t == 1.0) {
        const Vector tg = f.gradient(trial);
        if (norm2(tg) < gnorm) {
          accepted = true;
          value = tv;
          break;
        }
      }
      t *= 0.5;
    }
    if (!accepted) throw ConvergenceError("minimize: line search failed", gnorm);
    rep.beta = trial;
    g = f.gradient(rep.beta);
    gnorm = norm2(g);
  }
  rep.gradient_norm = gnorm;
  return rep;
}

namespace detail {

inline std::vector<double> sample_weights(const Dataset& ds, const ClassWeights& w) {
  std::vector<double> out(ds.n());
  for (std::size_t i = 0; i < ds.n(); ++i) out[i] = w.of(ds.y[i]);
  return out;
}

inline void require_unit_weights_range(const ClassWeights& w, const char* who) {
  for (double v : {w.class0, w.class1}) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidParameter(std::string(who) + ": class weights must lie in [0, 1]");
  }
}

inline void require_row_norms(const Matrix& X, double radius, const char* who) {
  for (std::size_t r = 0; r < X.rows(); ++r) {
    if (norm2(X.row(r)) > radius * (1.0 + 1e-12)) {
      throw InvalidParameter(std::string(who) + ": row " + std::to_string(r) +
                             " exceeds the norm bound; scale or bound features first");
    }
  }
}

}  // namespace detail

struct BaselineResult {
  LinearModel model;
  SolverReport solver;
};

// Non-private weighted, l2-regularised logistic regression.
inline BaselineResult train_logreg_baseline(const Dataset& ds, const ClassWeights& w, double lambda,
                                            const SolverOptions& opts = {},
                                            bool fit_intercept = true) {
  if (!(lambda > 0.0)) throw InvalidParameter("train_logreg_baseline: lambda must be positive");
  if (ds.n() == 0) throw DataError("train_logreg_baseline: empty dataset");
  const Matrix Z = design_matrix(ds.X, fit_intercept);
  const auto weights = detail::sample_weights(ds, w);
  const WeightedLogisticObjective f{Z, ds.y, weights, lambda, {}};
  SolverReport rep = minimize(f, opts);
  return {model_from_augmented(rep.beta, fit_intercept), std::move(rep)};
}

// ---------------------------------------------------------------------------
// Objective perturbation

struct ErmConfig {
  double epsilon = 1.0;
  double lambda = 1e-2;
  double c = kLogisticCurvature;
  SolverOptions solver;
  bool fit_intercept = true;
};

struct PerturbationSchedule {
  double eps_prime = 0.0;
  double delta_reg = 0.0;  // extra ridge Delta
};

// eps' = eps - ln(1 + 2c/(n lambda) + c^2/(n^2 lambda^2)); when eps' <= 0 the
// extra ridge Delta = c/(n(e^{eps/4} - 1)) - lambda is added and eps' = eps/2.
inline PerturbationSchedule objective_perturbation_schedule(double epsilon, double c,
                                                           std::size_t n, double lambda) {
  if (!(epsilon > 0.0) || !(c > 0.0) || !(lambda > 0.0) || n == 0) {
    throw InvalidParameter("objective_perturbation_schedule: epsilon, c, lambda and n must be positive");
  }
  const double nl = static_cast<double>(n) * lambda;
  PerturbationSchedule s;
  s.eps_prime = epsilon - std::log1p(2.0 * c / nl + c * c / (nl * nl));
  if (s.eps_prime > 0.0) return s;
  s.delta_reg = c / (static_cast<double>(n) * std::expm1(epsilon / 4.0)) - lambda;
  s.eps_prime = epsilon / 2.0;
  if (!(s.delta_reg > 0.0)) {
    throw ConfigurationError("objective perturbation: eps' <= 0 and Delta <= 0; lambda is too large for epsilon");
  }
  return s;
}

// Density proportional to exp(-eps' |b| / 2): uniform direction, norm
// Gamma(d, 2/eps').
inline Vector sample_objective_noise(std::size_t d, double eps_prime, Rng& rng) {
  if (!(eps_prime > 0.0)) throw InvalidParameter("sample_objective_noise: eps' must be positive");
  if (d == 0) throw InvalidParameter("sample_objective_noise: d must be positive");
  Vector dir(d);
  double len = 0.0;
  do {
    for (double& v : dir) v = rng.normal();
    len = norm2(dir);
  } while (len == 0.0);
  const double radius = rng.gamma_integer_shape(static_cast<int>(d), 2.0 / eps_prime);
  for (double& v : dir) v *= radius / len;
  return dir;
}

struct ErmCertificate {
  Vector b;  // in augmented coordinates
  double delta_reg = 0.0;
  double eps_prime = 0.0;
  double lambda = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
};

struct ErmResult {
  LinearModel model;
  PrivacyBudget budget;
  ErmCertificate certificate;
};

// Weighted ERM by objective perturbation. Rows (with the intercept coordinate
// when fitted) must lie in the unit ball and weights in [0, 1]. epsilon = +inf
// trains without noise and reports a non-private budget.
inline ErmResult train_erm_objective_perturbation(const Dataset& ds, const ClassWeights& w,
                                                  const ErmConfig& cfg, Rng& rng) {
  if (ds.n() == 0) throw DataError("train_erm_objective_perturbation: empty dataset");
  if (!(cfg.lambda > 0.0)) throw InvalidParameter("train_erm_objective_perturbation: lambda must be positive");
  if (!(cfg.epsilon > 0.0)) throw InvalidParameter("train_erm_objective_perturbation: epsilon must be positive");
  detail::require_unit_weights_range(w, "train_erm_objective_perturbation");
  detail::require_row_norms(ds.X, cfg.fit_intercept ? kInterceptFeature : 1.0,
                            "train_erm_objective_perturbation");

  const Matrix Z = design_matrix(ds.X, cfg.fit_intercept);
  const auto weights = detail::sample_weights(ds, w);
  ErmCertificate cert;
  cert.lambda = cfg.lambda;
  PrivacyBudget budget = non_private_budget();
  if (std::isfinite(cfg.epsilon)) {
    const auto sched = objective_perturbation_schedule(cfg.epsilon, cfg.c, ds.n(), cfg.lambda);
    cert.eps_prime = sched.eps_prime;
    cert.delta_reg = sched.delta_reg;
    cert.b = sample_objective_noise(Z.cols(), sched.eps_prime, rng);
    budget = {cfg.epsilon, 0.0};
  } else {
    cert.eps_prime = cfg.epsilon;
    cert.b.assign(Z.cols(), 0.0);
  }
  const WeightedLogisticObjective f{Z, ds.y, weights, cfg.lambda + cert.delta_reg, cert.b};
  SolverReport rep = minimize(f, cfg.solver);
  cert.gradient_norm = rep.gradient_norm;
  cert.iterations = rep.iterations;
  return {model_from_augmented(rep.beta, cfg.fit_intercept), budget, std::move(cert)};
}

// Residual of b = -sum_i w_i l'(y_i, z_i.beta) z_i - n(lambda + Delta) beta,
// evaluated in augmented coordinates. Returns the max absolute coordinate gap.
inline double stationarity_residual(const Dataset& ds, const ClassWeights& w, const LinearModel& m,
                                    const ErmCertificate& cert, bool fit_intercept) {
  const Matrix Z = design_matrix(ds.X, fit_intercept);
  Vector theta = m.beta;
  if (fit_intercept) theta.push_back(m.intercept / kInterceptFeature);
  Vector rhs(theta.size(), 0.0);
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const auto zi = Z.row(i);
    const double a = w.of(ds.y[i]) * logistic::dloss(ds.y[i], dot(zi, theta));
    for (std::size_t j = 0; j < theta.size(); ++j) rhs[j] -= a * zi[j];
  }
  const double n = static_cast<double>(ds.n());
  double worst = 0.0;
  for (std::size_t j = 0; j < theta.size(); ++j) {
    rhs[j] -= n * (cert.lambda + cert.delta_reg) * theta[j];
    worst = std::max(worst, std::abs(rhs[j] - cert.b[j]));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// DP-SGD

enum class StepBudgetPolicy {
  kStrict,      // per-step epsilon >= 1 is a configuration error
  kCapPerStep,  // cap per-step epsilon below 1 and report the smaller total
};

inline constexpr double kMaxGaussianStepEpsilon = 0.99;

struct DpSgdConfig {
  double clip_norm = 1.0;
  double learning_rate = 0.5;
  double expected_batch = 256.0;  // L; Poisson rate q = L / n
  std::size_t minibatch = 64;     // B
  std::int64_t iterations = 50;   // T
  PrivacyBudget target{1.0, 1e-5};
  double delta_prime = 5e-6;
  StepBudgetPolicy policy = StepBudgetPolicy::kStrict;
  NoiseMode noise = NoiseMode::kEnabled;
  bool fit_intercept = true;
};

struct DpSgdPlan {
  std::int64_t chunks_per_iteration = 0;
  std::int64_t releases = 0;
  PrivacyBudget per_step;
  double sigma = 0.0;  // absolute noise std on the clipped-gradient sum
  PrivacyBudget total;
};

// One Gaussian release per minibatch chunk: K = T * ceil(L / B) releases,
// each on a clipped-gradient sum of L2 sensitivity 2C.
inline DpSgdPlan plan_dpsgd(const DpSgdConfig& cfg) {
  if (!(cfg.clip_norm > 0.0)) throw InvalidParameter("train_dpsgd: clip norm must be positive");
  if (!(cfg.learning_rate > 0.0)) throw InvalidParameter("train_dpsgd: learning rate must be positive");
  if (!(cfg.expected_batch > 0.0) || cfg.minibatch == 0 || cfg.iterations < 1) {
    throw InvalidParameter("train_dpsgd: L, B and T must be positive");
  }
  DpSgdPlan plan;
  plan.chunks_per_iteration =
      static_cast<std::int64_t>(std::ceil(cfg.expected_batch / static_cast<double>(cfg.minibatch)));
  plan.releases = cfg.iterations * plan.chunks_per_iteration;
  if (cfg.noise == NoiseMode::kDisabled) {
    plan.total = non_private_budget();
    return plan;
  }
  cfg.target.validate("train_dpsgd target");
  if (!(cfg.delta_prime > 0.0 && cfg.delta_prime < cfg.target.delta)) {
    throw ConfigurationError("train_dpsgd: need 0 < delta' < target delta");
  }
  const double k = static_cast<double>(plan.releases);
  plan.per_step.delta = (cfg.target.delta - cfg.delta_prime) / k;
  plan.per_step.epsilon = invert_compose_advanced(cfg.target.epsilon, plan.releases, cfg.delta_prime);
  if (plan.per_step.epsilon >= 1.0) {
    if (cfg.policy == StepBudgetPolicy::kStrict) {
      throw ConfigurationError("train_dpsgd: per-step epsilon " + std::to_string(plan.per_step.epsilon) +
                               " is outside the Gaussian mechanism range; raise T or lower epsilon");
    }
    plan.per_step.epsilon = kMaxGaussianStepEpsilon;
  }
  plan.sigma = gaussian_noise_sigma(2.0 * cfg.clip_norm, plan.per_step);
  plan.total = compose_advanced(plan.per_step, plan.releases, cfg.delta_prime);
  return plan;
}

struct DpSgdTrace {
  double max_post_clip_norm = 0.0;
  std::int64_t clip_violations = 0;
  std::int64_t releases = 0;
  std::int64_t skipped_chunks = 0;
  std::int64_t dropped_points = 0;
};

struct DpSgdResult {
  LinearModel model;
  PrivacyBudget budget;
  DpSgdPlan plan;
  DpSgdTrace trace;
};

// Per iteration: Poisson-sample each row with q = L/n, split the sample into
// ceil(L/B) consecutive chunks of B rows (rows past the last chunk are
// dropped, empty chunks are skipped), and for every chunk step along
// -(sum of clipped weighted gradients + noise) / B. theta starts at zero.
inline DpSgdResult train_dpsgd(const Dataset& ds, const ClassWeights& w, const DpSgdConfig& cfg,
                               Rng& rng) {
  if (ds.n() == 0) throw DataError("train_dpsgd: empty dataset");
  detail::require_unit_weights_range(w, "train_dpsgd");
  DpSgdResult res;
  res.plan = plan_dpsgd(cfg);
  res.budget = res.plan.total;

  const Matrix Z = design_matrix(ds.X, cfg.fit_intercept);
  const auto weights = detail::sample_weights(ds, w);
  const std::size_t p = Z.cols();
  const double q = std::min(1.0, cfg.expected_batch / static_cast<double>(ds.n()));
  const double inv_b = 1.0 / static_cast<double>(cfg.minibatch);
  const bool noisy = cfg.noise == NoiseMode::kEnabled;

  Vector theta(p, 0.0);
  Vector sum(p);
  Vector g(p);
  std::vector<std::size_t> batch;
  for (std::int64_t t = 0; t < cfg.iterations; ++t) {
    batch.clear();
    for (std::size_t i = 0; i < ds.n(); ++i) {
      if (rng.bernoulli(q)) batch.push_back(i);
    }
    const std::size_t cap = static_cast<std::size_t>(res.plan.chunks_per_iteration) * cfg.minibatch;
    if (batch.size() > cap) {
      res.trace.dropped_points += static_cast<std::int64_t>(batch.size() - cap);
      batch.resize(cap);
    }
    for (std::int64_t c = 0; c < res.plan.chunks_per_iteration; ++c) {
      const std::size_t begin = static_cast<std::size_t>(c) * cfg.minibatch;
      if (begin >= batch.size()) {
        ++res.trace.skipped_chunks;
        continue;
      }
      const std::size_t end = std::min(batch.size(), begin + cfg.minibatch);
      std::fill(sum.begin(), sum.end(), 0.0);
      for (std::size_t k = begin; k < end; ++k) {
        const std::size_t i = batch[k];
        const auto zi = Z.row(i);
        const double resid = weights[i] * (sigmoid(dot(zi, theta)) - static_cast<double>(ds.y[i]));
        for (std::size_t j = 0; j < p; ++j) g[j] = resid * zi[j];
        project_to_ball(g, cfg.clip_norm);
        const double gn = norm2(g);
        res.trace.max_post_clip_norm = std::max(res.trace.max_post_clip_norm, gn);
        if (gn > cfg.clip_norm) ++res.trace.clip_violations;
        for (std::size_t j = 0; j < p; ++j) sum[j] += g[j];
      }
      if (noisy) {
        for (std::size_t j = 0; j < p; ++j) sum[j] += res.plan.sigma * rng.normal();
      }
      for (std::size_t j = 0; j < p; ++j) theta[j] -= cfg.learning_rate * sum[j] * inv_b;
      ++res.trace.releases;
    }
  }
  if (res.trace.clip_violations != 0) {
    throw ConvergenceError("train_dpsgd: clipped gradient exceeded the clip norm", res.trace.max_post_clip_norm);
  }
  for (double v : theta) {
    if (!std::isfinite(v)) throw ConvergenceError("train_dpsgd: parameters diverged", v);
  }
  res.model = model_from_augmented(theta, cfg.fit_intercept);
  return res;
}

// ---------------------------------------------------------------------------
// Private bagging

struct BaggingEnsemble {
  std::vector<LinearModel> learners;

  // Score is the fraction of learners voting 1; a tie predicts 0.
  Predictions predict(const Matrix& X) const {
    if (learners.empty()) throw InvalidParameter("BaggingEnsemble: no learners");
    Predictions out;
    out.scores.assign(X.rows(), 0.0);
    for (const auto& m : learners) {
      const auto p = dpimb::predict(m, X);
      for (std::size_t r = 0; r < X.rows(); ++r) out.scores[r] += p.labels[r];
    }
    const double m = static_cast<double>(learners.size());
    out.labels.resize(X.rows());
    for (std::size_t r = 0; r < X.rows(); ++r) {
      out.labels[r] = 2.0 * out.scores[r] > m ? 1 : 0;
      out.scores[r] /= m;
    }
    return out;
  }
};

struct BaggingResult {
  BaggingEnsemble ensemble;
  PrivacyBudget budget;
  double per_learner_epsilon = 0.0;
};

// Per-learner epsilon is the larger of the basic split eps/m and the advanced
// composition inversion; the reported total uses whichever accountant is
// tighter for that value. The advanced route needs total.delta >= delta'.
inline std::pair<double, PrivacyBudget> bagging_per_learner_epsilon(const PrivacyBudget& total,
                                                                    std::int64_t m,
                                                                    double delta_prime) {
  if (m < 1) throw InvalidParameter("train_private_bagging: m must be at least 1");
  if (!(total.epsilon > 0.0) || !std::isfinite(total.epsilon)) {
    throw InvalidParameter("train_private_bagging: total epsilon must be positive and finite");
  }
  const double md = static_cast<double>(m);
  double per = total.epsilon / md;
  PrivacyBudget spent{per * md, 0.0};
  if (total.delta > 0.0 && delta_prime > 0.0 && delta_prime <= total.delta) {
    const double adv = invert_compose_advanced(total.epsilon, m, delta_prime);
    if (adv > per) {
      per = adv;
      spent = compose_advanced({per, 0.0}, m, delta_prime);
    }
  }
  if (!(per > 0.0)) throw ConfigurationError("train_private_bagging: per-learner epsilon is not positive");
  return {per, spent};
}

// m objective-perturbation learners, each on an independent subsample drawn
// without replacement.
inline BaggingResult train_private_bagging(const Dataset& ds, const ClassWeights& w, std::int64_t m,
                                           double subsample, const PrivacyBudget& total,
                                           double delta_prime, const ErmConfig& cfg, Rng& rng) {
  if (!(subsample > 0.0 && subsample <= 1.0)) {
    throw InvalidParameter("train_private_bagging: subsample fraction must lie in (0, 1]");
  }
  if (ds.n() == 0) throw DataError("train_private_bagging: empty dataset");
  BaggingResult res;
  std::tie(res.per_learner_epsilon, res.budget) = bagging_per_learner_epsilon(total, m, delta_prime);
  const auto size = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(subsample * static_cast<double>(ds.n()))));
  const std::uint64_t master = rng.next_u64();
  ErmConfig learner_cfg = cfg;
  learner_cfg.epsilon = res.per_learner_epsilon;
  std::vector<std::size_t> idx(ds.n());
  for (std::int64_t b = 0; b < m; ++b) {
    Rng local(derive_seed(master, {static_cast<std::uint64_t>(b)}));
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < size; ++i) {
      const std::size_t j = i + local.uniform_index(idx.size() - i);
      std::swap(idx[i], idx[j]);
    }
    const Dataset part = ds.subset(std::span<const std::size_t>(idx.data(), size));
    res.ensemble.learners.push_back(train_erm_objective_perturbation(part, w, learner_cfg, local).model);
  }
  return res;
}

}  // namespace dpimb
