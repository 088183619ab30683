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
#include <cmath>
#include <limits>
#include <vector>

#include "dpimb/models.hpp"
#include "dpimb/preprocess.hpp"
#include "gtest/gtest.h"
#include "test_support.hpp"

namespace dpimb {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Two well separated classes along the first feature, scaled into the
// intercept-compatible ball.
Dataset separated(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset ds;
  ds.X = Matrix(0, 2);
  ds.bounds = {{-3.0, 3.0}, {-3.0, 3.0}};
  for (std::size_t i = 0; i < n; ++i) {
    const int y = i % 4 == 0 ? 1 : 0;
    const double row[2] = {(y ? 1.5 : -1.5) + 0.5 * rng.normal(), rng.normal()};
    ds.append(row, y, RowOrigin::kOriginal);
  }
  return FeatureScaler{ds.bounds}.transform(ds);
}

TEST(FeatureScalerTest, RowsLandInBall) {
  Rng rng(1);
  const auto raw = testing::random_dataset(500, 7, 0.3, rng, 4.0);
  const FeatureScaler scaler{raw.bounds};
  const auto ds = scaler.transform(raw);
  for (std::size_t i = 0; i < ds.n(); ++i) EXPECT_LE(norm2(ds.X.row(i)), kInterceptFeature);
  Vector wild{100.0, -100.0, 0, 0, 0, 0, 0};
  scaler.apply(wild);
  EXPECT_LE(norm2(wild), kInterceptFeature);
  EXPECT_EQ(*ds.row_norm_bound, kInterceptFeature);
}

TEST(LogisticTest, LossDerivativesMatchFiniteDifferences) {
  for (double eta : {-30.0, -2.0, -0.1, 0.0, 0.7, 5.0, 40.0}) {
    for (int y : {0, 1}) {
      const double h = 1e-6;
      const double fd = (logistic::loss(y, eta + h) - logistic::loss(y, eta - h)) / (2 * h);
      EXPECT_NEAR(logistic::dloss(y, eta), fd, 1e-6);
      const double fd2 = (logistic::dloss(y, eta + h) - logistic::dloss(y, eta - h)) / (2 * h);
      EXPECT_NEAR(logistic::d2loss(eta), fd2, 1e-6);
      EXPECT_LE(logistic::d2loss(eta), kLogisticCurvature);
    }
  }
  EXPECT_TRUE(std::isfinite(logistic::loss(1, -1000.0)));
}

TEST(ObjectiveTest, GradientAndHessianMatchFiniteDifferences) {
  Rng rng(2);
  const auto ds = testing::random_dataset(60, 3, 0.3, rng);
  const Matrix Z = design_matrix(ds.X, true);
  const std::vector<double> w(ds.n(), 0.7);
  const Vector b{0.3, -0.2, 0.5, 0.1};
  const WeightedLogisticObjective f{Z, ds.y, w, 0.05, b};
  const Vector beta{0.4, -1.1, 0.2, 0.9};
  const Vector g = f.gradient(beta);
  const auto hm = f.hessian(beta);
  for (std::size_t j = 0; j < 4; ++j) {
    Vector up = beta, dn = beta;
    up[j] += 1e-6;
    dn[j] -= 1e-6;
    EXPECT_NEAR(g[j], (f.value(up) - f.value(dn)) / 2e-6, 1e-6);
    const Vector gu = f.gradient(up), gd = f.gradient(dn);
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(hm[k * 4 + j], (gu[k] - gd[k]) / 2e-6, 1e-5);
  }
}

TEST(BaselineTest, RecoversSeparationDirection) {
  const auto ds = separated(400, 3);
  const auto res = train_logreg_baseline(ds, unit_weights(ds), 1e-3);
  EXPECT_GT(res.model.beta[0], 0.0);
  EXPECT_LE(res.solver.gradient_norm, 1e-8);
  const auto p = predict(res.model, ds.X);
  int correct = 0;
  for (std::size_t i = 0; i < ds.n(); ++i) correct += p.labels[i] == ds.y[i];
  EXPECT_GT(correct, 380);
}

TEST(BaselineTest, DuplicatingTheDataLeavesTheModelUnchanged) {
  const auto ds = separated(200, 4);
  Dataset twice = ds;
  for (std::size_t i = 0; i < ds.n(); ++i) twice.append(ds.X.row(i), ds.y[i], RowOrigin::kOriginal);
  const auto a = train_logreg_baseline(ds, unit_weights(ds), 1e-2).model;
  const auto b = train_logreg_baseline(twice, unit_weights(twice), 1e-2).model;
  for (std::size_t j = 0; j < a.d(); ++j) EXPECT_NEAR(a.beta[j], b.beta[j], 1e-7);
  EXPECT_NEAR(a.intercept, b.intercept, 1e-7);
}

TEST(BaselineTest, WeightsShiftTheIntercept) {
  const auto ds = separated(400, 5);
  const auto plain = train_logreg_baseline(ds, unit_weights(ds), 1e-2).model;
  const auto weighted = train_logreg_baseline(ds, class_weights(ds), 1e-2).model;
  EXPECT_GT(weighted.intercept, plain.intercept);
}

TEST(BaselineTest, Preconditions) {
  const auto ds = separated(20, 6);
  EXPECT_THROW(train_logreg_baseline(ds, unit_weights(ds), 0.0), InvalidParameter);
  SolverOptions opts;
  opts.max_iterations = 1;
  opts.tolerance = 1e-300;
  EXPECT_THROW(train_logreg_baseline(ds, unit_weights(ds), 1e-3, opts), ConvergenceError);
}

TEST(PredictTest, ZeroModelPredictsPositiveEverywhere) {
  const LinearModel m{{0.0, 0.0}, 0.0};
  const auto p = predict(m, Matrix(5, 2, 3.0));
  for (int v : p.labels) EXPECT_EQ(v, 1);
  EXPECT_THROW(predict(m, Matrix(2, 3)), InvalidParameter);
}

TEST(ScheduleTest, GoldenEpsPrime) {
  const auto s = objective_perturbation_schedule(1.0, 0.25, 1000, 0.01);
  EXPECT_NEAR(s.eps_prime, 0.950614774819257, 1e-15);
  EXPECT_EQ(s.delta_reg, 0.0);
}

TEST(ScheduleTest, RidgeBranch) {
  const auto s = objective_perturbation_schedule(0.01, 0.25, 100, 0.01);
  EXPECT_DOUBLE_EQ(s.eps_prime, 0.005);
  EXPECT_NEAR(s.delta_reg, 0.25 / (100 * std::expm1(0.0025)) - 0.01, 1e-15);
}

TEST(ScheduleTest, RidgeBranchAlwaysAddsPositiveRidgeProperty) {
  Rng rng(7);
  for (int i = 0; i < 20000; ++i) {
    const double eps = std::exp(-6.0 + 9.0 * rng.uniform());
    const double lambda = std::exp(-12.0 + 12.0 * rng.uniform());
    const auto n = static_cast<std::size_t>(1 + rng.uniform_index(100000));
    const auto s = objective_perturbation_schedule(eps, 0.25, n, lambda);
    ASSERT_GT(s.eps_prime, 0.0);
    ASSERT_LE(s.eps_prime, eps);
    ASSERT_GE(s.delta_reg, 0.0);
  }
}

TEST(ObjectiveNoiseTest, MeanNormIsShapeTimesScale) {
  Rng rng(8);
  for (std::size_t d : {1u, 3u, 10u}) {
    const double eps_prime = 0.8;
    double total = 0.0;
    const int n = 40000;
    for (int i = 0; i < n; ++i) total += norm2(sample_objective_noise(d, eps_prime, rng));
    const double mean = 2.0 * static_cast<double>(d) / eps_prime;
    const double se = std::sqrt(static_cast<double>(d)) * 2.0 / eps_prime / std::sqrt(n);
    EXPECT_NEAR(total / n, mean, 5.0 * se);
  }
}

TEST(ObjectiveNoiseTest, OneDimensionalNormIsExponential) {
  Rng rng(9);
  const double eps_prime = 1.3;
  std::vector<double> xs;
  int positive = 0;
  for (int i = 0; i < 20000; ++i) {
    const double v = sample_objective_noise(1, eps_prime, rng)[0];
    positive += v > 0;
    xs.push_back(std::abs(v));
  }
  const double ks = testing::ks_statistic(xs, [&](double x) { return 1.0 - std::exp(-x * eps_prime / 2.0); });
  EXPECT_LT(ks, 1.628 / std::sqrt(20000.0));
  EXPECT_NEAR(positive / 20000.0, 0.5, 0.015);
}

TEST(ObjectiveNoiseTest, DirectionIsIsotropic) {
  Rng rng(10);
  Vector mean(3, 0.0);
  for (int i = 0; i < 20000; ++i) {
    const Vector b = sample_objective_noise(3, 1.0, rng);
    const double len = norm2(b);
    for (int j = 0; j < 3; ++j) mean[j] += b[j] / len / 20000.0;
  }
  for (double m : mean) EXPECT_NEAR(m, 0.0, 0.02);
}

TEST(ErmTest, StationarityCertificateHolds) {
  const auto ds = separated(500, 11);
  for (double eps : {0.05, 0.5, 5.0}) {
    Rng rng(12);
    ErmConfig cfg;
    cfg.epsilon = eps;
    const auto w = class_weights(ds);
    const auto res = train_erm_objective_perturbation(ds, w, cfg, rng);
    EXPECT_EQ(res.budget, (PrivacyBudget{eps, 0.0}));
    EXPECT_LE(res.certificate.gradient_norm, cfg.solver.tolerance);
    EXPECT_LT(stationarity_residual(ds, w, res.model, res.certificate, true), 1e-5);
  }
}

TEST(ErmTest, HugeEpsilonApproachesBaseline) {
  const auto ds = separated(500, 13);
  Rng rng(14);
  ErmConfig cfg;
  cfg.epsilon = 1e6;
  const auto erm = train_erm_objective_perturbation(ds, unit_weights(ds), cfg, rng).model;
  const auto base = train_logreg_baseline(ds, unit_weights(ds), cfg.lambda).model;
  for (std::size_t j = 0; j < base.d(); ++j) EXPECT_NEAR(erm.beta[j], base.beta[j], 1e-3);
  EXPECT_NEAR(erm.intercept, base.intercept, 1e-3);
}

TEST(ErmTest, InfiniteEpsilonIsExactlyNoiseless) {
  const auto ds = separated(300, 15);
  Rng rng(16);
  ErmConfig cfg;
  cfg.epsilon = kInf;
  const auto erm = train_erm_objective_perturbation(ds, unit_weights(ds), cfg, rng);
  EXPECT_FALSE(erm.budget.is_finite());
  const auto base = train_logreg_baseline(ds, unit_weights(ds), cfg.lambda).model;
  EXPECT_EQ(erm.model.beta, base.beta);
  EXPECT_EQ(erm.model.intercept, base.intercept);
}

TEST(ErmTest, NoiseShrinksWithEpsilon) {
  const auto ds = separated(400, 17);
  const auto base = train_logreg_baseline(ds, unit_weights(ds), 1e-2).model;
  std::vector<double> dist;
  for (double eps : {0.1, 1.0, 10.0}) {
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      Rng rng(seed);
      ErmConfig cfg;
      cfg.epsilon = eps;
      const auto m = train_erm_objective_perturbation(ds, unit_weights(ds), cfg, rng).model;
      double sq = 0.0;
      for (std::size_t j = 0; j < m.d(); ++j) sq += (m.beta[j] - base.beta[j]) * (m.beta[j] - base.beta[j]);
      total += std::sqrt(sq);
    }
    dist.push_back(total);
  }
  EXPECT_GT(dist[0], dist[1]);
  EXPECT_GT(dist[1], dist[2]);
}

TEST(ErmTest, RejectsUnscaledRowsAndBadWeights) {
  Rng rng(18);
  const auto raw = testing::random_dataset(50, 2, 0.3, rng, 5.0);
  ErmConfig cfg;
  EXPECT_THROW(train_erm_objective_perturbation(raw, unit_weights(raw), cfg, rng), InvalidParameter);
  const auto ds = FeatureScaler{raw.bounds}.transform(raw);
  ClassWeights w = unit_weights(ds);
  w.class1 = 2.0;
  EXPECT_THROW(train_erm_objective_perturbation(ds, w, cfg, rng), InvalidParameter);
  cfg.epsilon = 0.0;
  EXPECT_THROW(train_erm_objective_perturbation(ds, unit_weights(ds), cfg, rng), InvalidParameter);
}

// Plain mini-batch SGD written independently, consuming the generator the same
// way: one Bernoulli draw per row per iteration, no noise draws.
LinearModel plain_sgd(const Dataset& ds, const DpSgdConfig& cfg, Rng& rng) {
  const std::size_t d = ds.d();
  Vector theta(d + 1, 0.0);
  const double q = std::min(1.0, cfg.expected_batch / static_cast<double>(ds.n()));
  const auto chunks = static_cast<std::size_t>(std::ceil(cfg.expected_batch / static_cast<double>(cfg.minibatch)));
  for (std::int64_t t = 0; t < cfg.iterations; ++t) {
    std::vector<std::size_t> picked;
    for (std::size_t i = 0; i < ds.n(); ++i) {
      if (rng.uniform() < q) picked.push_back(i);
    }
    if (picked.size() > chunks * cfg.minibatch) picked.resize(chunks * cfg.minibatch);
    for (std::size_t start = 0; start < picked.size(); start += cfg.minibatch) {
      Vector step(d + 1, 0.0);
      for (std::size_t k = start; k < std::min(picked.size(), start + cfg.minibatch); ++k) {
        const auto x = ds.X.row(picked[k]);
        double z = 0.0;
        for (std::size_t j = 0; j < d; ++j) z += theta[j] * x[j];
        z += theta[d] * kInterceptFeature;
        const double r = sigmoid(z) - ds.y[picked[k]];
        Vector g(d + 1);
        for (std::size_t j = 0; j < d; ++j) g[j] = r * x[j];
        g[d] = r * kInterceptFeature;
        const double len = norm2(g);
        const double scale = len > cfg.clip_norm ? cfg.clip_norm / len : 1.0;
        for (std::size_t j = 0; j <= d; ++j) step[j] += scale * g[j];
      }
      for (std::size_t j = 0; j <= d; ++j) theta[j] -= cfg.learning_rate * step[j] * (1.0 / static_cast<double>(cfg.minibatch));
    }
  }
  LinearModel m;
  m.beta.assign(theta.begin(), theta.end() - 1);
  m.intercept = theta[d] * kInterceptFeature;
  return m;
}

TEST(DpSgdTest, DisabledNoiseAndHugeClipMatchPlainSgdExactly) {
  const auto ds = separated(600, 19);
  DpSgdConfig cfg;
  cfg.noise = NoiseMode::kDisabled;
  cfg.clip_norm = 1e9;
  cfg.iterations = 20;
  Rng a(20), b(20);
  const auto res = train_dpsgd(ds, unit_weights(ds), cfg, a);
  const auto oracle = plain_sgd(ds, cfg, b);
  EXPECT_EQ(res.plan.sigma, 0.0);
  EXPECT_FALSE(res.budget.is_finite());
  EXPECT_EQ(res.model.beta, oracle.beta);
  EXPECT_EQ(res.model.intercept, oracle.intercept);
  EXPECT_GT(res.model.beta[0], 0.0);
}

TEST(DpSgdTest, ClippedGradientsNeverExceedTheClipNorm) {
  Rng data(21);
  const auto raw = testing::random_dataset(800, 4, 0.2, data, 1.0);
  const auto ds = FeatureScaler{raw.bounds}.transform(raw);
  for (double clip : {0.01, 0.1, 1.0}) {
    DpSgdConfig cfg;
    cfg.clip_norm = clip;
    Rng rng(22);
    const auto res = train_dpsgd(ds, unit_weights(ds), cfg, rng);
    EXPECT_LE(res.trace.max_post_clip_norm, clip);
    EXPECT_EQ(res.trace.clip_violations, 0);
    EXPECT_EQ(res.trace.releases + res.trace.skipped_chunks, res.plan.releases);
  }
}

TEST(DpSgdTest, PlanComposesToTarget) {
  DpSgdConfig cfg;
  const auto plan = plan_dpsgd(cfg);
  EXPECT_EQ(plan.chunks_per_iteration, 4);
  EXPECT_EQ(plan.releases, 200);
  EXPECT_LE(plan.total.epsilon, cfg.target.epsilon * (1 + 1e-12));
  EXPECT_NEAR(plan.total.epsilon, cfg.target.epsilon, 1e-9);
  EXPECT_NEAR(plan.total.delta, cfg.target.delta, 1e-18);
  EXPECT_DOUBLE_EQ(plan.sigma, gaussian_noise_sigma(2.0, plan.per_step));
}

TEST(DpSgdTest, LargePerStepEpsilonPolicies) {
  DpSgdConfig cfg;
  cfg.iterations = 1;
  cfg.expected_batch = 64;
  cfg.target = {50.0, 1e-5};
  EXPECT_THROW(plan_dpsgd(cfg), ConfigurationError);
  cfg.policy = StepBudgetPolicy::kCapPerStep;
  const auto plan = plan_dpsgd(cfg);
  EXPECT_EQ(plan.per_step.epsilon, kMaxGaussianStepEpsilon);
  EXPECT_EQ(plan.releases, 1);
  EXPECT_LT(plan.total.epsilon, 50.0);
  cfg.delta_prime = 2e-5;
  EXPECT_THROW(plan_dpsgd(cfg), ConfigurationError);
}

TEST(DpSgdTest, DeterministicUnderSeed) {
  const auto ds = separated(300, 23);
  DpSgdConfig cfg;
  Rng a(24), b(24);
  EXPECT_EQ(train_dpsgd(ds, unit_weights(ds), cfg, a).model.beta, train_dpsgd(ds, unit_weights(ds), cfg, b).model.beta);
}

TEST(BaggingTest, TieVotesNegative) {
  BaggingEnsemble e;
  e.learners.push_back(LinearModel{{1.0}, 0.0});
  e.learners.push_back(LinearModel{{-1.0}, 0.0});
  Matrix X(1, 1, 2.0);
  const auto p = e.predict(X);
  EXPECT_EQ(p.labels[0], 0);
  EXPECT_DOUBLE_EQ(p.scores[0], 0.5);
  EXPECT_THROW(BaggingEnsemble{}.predict(X), InvalidParameter);
}

TEST(BaggingTest, SingleLearnerMatchesItsModel) {
  Rng rng(25);
  const LinearModel m{{0.7, -0.3}, 0.1};
  BaggingEnsemble e{{m}};
  Matrix X(200, 2);
  for (std::size_t i = 0; i < 200; ++i) {
    X(i, 0) = rng.normal();
    X(i, 1) = rng.normal();
  }
  EXPECT_EQ(e.predict(X).labels, predict(m, X).labels);
}

TEST(BaggingTest, PerLearnerBudget) {
  const auto [basic, spent_basic] = bagging_per_learner_epsilon({1.0, 0.0}, 25, 1e-6);
  EXPECT_DOUBLE_EQ(basic, 0.04);
  EXPECT_NEAR(spent_basic.epsilon, 1.0, 1e-15);
  const auto [adv, spent_adv] = bagging_per_learner_epsilon({1.0, 1e-5}, 400, 1e-5);
  EXPECT_GT(adv, 1.0 / 400);
  EXPECT_LE(spent_adv.epsilon, 1.0);
  EXPECT_NEAR(spent_adv.delta, 1e-5, 1e-20);
  EXPECT_THROW(bagging_per_learner_epsilon({kInf, 0.0}, 2, 1e-6), InvalidParameter);
}

TEST(BaggingTest, TrainsDeterministicEnsemble) {
  const auto ds = separated(400, 26);
  ErmConfig cfg;
  Rng a(27), b(27);
  const auto ra = train_private_bagging(ds, unit_weights(ds), 9, 0.5, {5.0, 0.0}, 1e-6, cfg, a);
  const auto rb = train_private_bagging(ds, unit_weights(ds), 9, 0.5, {5.0, 0.0}, 1e-6, cfg, b);
  ASSERT_EQ(ra.ensemble.learners.size(), 9u);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(ra.ensemble.learners[i].beta, rb.ensemble.learners[i].beta);
  EXPECT_DOUBLE_EQ(ra.per_learner_epsilon, 5.0 / 9);
  EXPECT_THROW(train_private_bagging(ds, unit_weights(ds), 3, 0.0, {1.0, 0.0}, 1e-6, cfg, a), InvalidParameter);
}

}  // namespace
}  // namespace dpimb
