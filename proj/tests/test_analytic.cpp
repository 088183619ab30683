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
#include <vector>

#include "dpimb/analytic.hpp"
#include "gtest/gtest.h"

namespace dpimb::analytic {
namespace {

TEST(ThresholdTest, GammaInterpolatesMeans) {
  EXPECT_DOUBLE_EQ(theta_gamma(0.0, 2.0, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(theta_gamma(0.0, 2.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(theta_gamma(0.0, 2.0, 1.0), 2.0);
  const ThresholdClassifier c{1.0, 0.5};
  EXPECT_EQ(c.predict(1.0), 1);
  EXPECT_EQ(c.predict(0.999), 0);
}

TEST(AnalyticMetricsTest, BalancedGoldenValues) {
  const auto m = analytic_metrics(MixtureSpec{}, 0.5);
  EXPECT_NEAR(m.tpr, 0.8413447460685429, 1e-15);
  EXPECT_NEAR(m.tnr, 0.8413447460685429, 1e-15);
  EXPECT_NEAR(m.tabulated.balanced_accuracy, 0.8413447460685429, 1e-15);
  EXPECT_NEAR(m.population.recall, 0.8413447460685429, 1e-15);
  EXPECT_NEAR(m.population.precision, 0.8413447460685429, 1e-15);
  EXPECT_NEAR(m.population.f1, 0.8413447460685429, 1e-15);
}

TEST(AnalyticMetricsTest, ImbalancedPopulationGoldenValues) {
  MixtureSpec spec;
  spec.r_star = 10.0;
  const auto m = analytic_metrics(spec, 0.5);
  EXPECT_NEAR(m.population.precision, 0.34653226523781117, 1e-14);
  EXPECT_NEAR(m.population.f1, 0.49088095472178733, 1e-14);
  EXPECT_DOUBLE_EQ(m.tabulated.recall, 11.0 * m.tpr);
}

TEST(AnalyticMetricsTest, ThresholdAtMinorityMeanHalvesRecall) {
  const auto m = analytic_metrics(MixtureSpec{}, 1.0);
  EXPECT_DOUBLE_EQ(m.tpr, 0.5);
  EXPECT_NEAR(m.tnr, normal::cdf(2.0), 1e-15);
}

TEST(AnalyticMetricsTest, RecallFallsAndSpecificityRisesWithGammaProperty) {
  MixtureSpec spec;
  for (double r : {1.0, 3.0, 42.0}) {
    spec.r_star = r;
    double prev_tpr = 2.0, prev_tnr = -1.0;
    for (int i = 0; i <= 100; ++i) {
      const auto m = analytic_metrics(spec, i / 100.0);
      EXPECT_LT(m.tpr, prev_tpr);
      EXPECT_GT(m.tnr, prev_tnr);
      EXPECT_GE(m.population.precision, 0.0);
      EXPECT_LE(m.population.precision, 1.0);
      EXPECT_LE(m.population.f1, 1.0);
      prev_tpr = m.tpr;
      prev_tnr = m.tnr;
    }
  }
}

TEST(SimulationTest, AgreesWithPopulationForms) {
  MixtureSpec spec;
  spec.r_star = 9.0;
  Rng rng(1);
  for (double gamma : {0.3, 0.5, 0.8}) {
    const auto sim = simulate_metrics(spec, gamma, 400000, rng);
    const auto m = analytic_metrics(spec, gamma);
    ASSERT_TRUE(sim.defined);
    EXPECT_NEAR(sim.tpr, m.tpr, 5 * sim.tpr_se);
    EXPECT_NEAR(sim.tnr, m.tnr, 5 * sim.tnr_se);
    EXPECT_NEAR(sim.value.precision, m.population.precision, 5 * sim.standard_error.precision);
    EXPECT_NEAR(sim.value.f1, m.population.f1, 5 * sim.standard_error.f1);
    EXPECT_NEAR(sim.value.balanced_accuracy, m.population.balanced_accuracy,
                5 * sim.standard_error.balanced_accuracy);
    EXPECT_EQ(sim.positives + sim.negatives, 400000);
  }
}

TEST(SimulationTest, TinySampleCanBeUndefined) {
  MixtureSpec spec;
  spec.r_star = 1e9;
  Rng rng(2);
  EXPECT_FALSE(simulate_metrics(spec, 0.5, 3, rng, 1).defined);
  EXPECT_THROW(simulate_metrics(spec, 0.5, 0, rng), InvalidParameter);
}

TEST(PrivateMeanTest, NoiselessMeanIsClippedAverage) {
  Rng rng(3);
  const std::vector<double> xs{1.0, 2.0, 50.0, -40.0};
  EXPECT_DOUBLE_EQ(private_mean(xs, 10.0, {0.5, 1e-5}, rng, NoiseMode::kDisabled), 0.75);
}

TEST(PrivateMeanTest, NoiseHasGaussianMechanismScale) {
  Rng rng(4);
  const std::vector<double> xs(100, 1.0);
  const PrivacyBudget budget{0.5, 1e-5};
  const double sigma = private_mean_sigma(100, 10.0, budget);
  EXPECT_DOUBLE_EQ(sigma, 0.2 * std::sqrt(2.0 * std::log(1.25e5)) / 0.5);
  double ss = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double v = private_mean(xs, 10.0, budget, rng) - 1.0;
    ss += v * v;
  }
  EXPECT_NEAR(std::sqrt(ss / n), sigma, 0.03 * sigma);
}

TEST(PrivateMeanTest, RejectsOutOfRangeBudget) {
  Rng rng(5);
  const std::vector<double> xs{1.0};
  EXPECT_THROW(private_mean(xs, 10.0, {1.0, 1e-5}, rng), OutOfRange);
  EXPECT_THROW(private_mean({}, 10.0, {0.5, 1e-5}, rng), InvalidParameter);
}

TEST(PrivateBocTest, SpendsTwiceThePerMeanBudget) {
  Rng rng(6);
  const auto ds = sample_mixture_1d(MixtureSpec{}, 500, rng);
  const auto res = private_boc(ds, MixtureSpec{}, {0.4, 1e-6}, rng);
  EXPECT_DOUBLE_EQ(res.spent.epsilon, 0.8);
  EXPECT_DOUBLE_EQ(res.spent.delta, 2e-6);
  EXPECT_DOUBLE_EQ(res.classifier.theta, 0.5 * (res.mu0_hat + res.mu1_hat));
}

TEST(PrivateBocTest, ReflectingTheDataReflectsTheThreshold) {
  Rng rng(7);
  MixtureSpec spec;
  auto ds = sample_mixture_1d(spec, 400, rng);
  Dataset mirrored = ds;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    mirrored.X(i, 0) = -ds.X(i, 0);
    mirrored.y[i] = 1 - ds.y[i];
  }
  Rng a(8), b(8);
  const auto t = private_boc(ds, spec, {0.5, 1e-5}, a, NoiseMode::kDisabled).classifier.theta;
  const auto u = private_boc(mirrored, spec, {0.5, 1e-5}, b, NoiseMode::kDisabled).classifier.theta;
  EXPECT_NEAR(t, -u, 1e-12);
}

TEST(BoundsTest, GoldenValues) {
  const MixtureSpec spec;
  EXPECT_NEAR(min_clip_radius(spec, 1250, 0.05), 6.798525912188081, 1e-12);
  EXPECT_NEAR(boc_error_bound(spec, 1000, 4, {0.5, 1e-5}, 0.05), 1.6986203396725092, 1e-12);
  EXPECT_NEAR(mle_lower_bound(spec, 2000, 1, 0.05), 0.06197950323045615, 1e-14);
}

TEST(BoundsTest, RejectsSmallClipRadius) {
  MixtureSpec spec;
  spec.R = 5.0;
  EXPECT_THROW(boc_error_bound(spec, 1000, 4, {0.5, 1e-5}, 0.05), InvalidParameter);
}

TEST(BoundsTest, BoundGrowsWithImbalanceProperty) {
  const MixtureSpec spec;
  double prev = 0.0;
  for (double r = 1.0; r <= 64.0; r *= 2.0) {
    const double b = boc_error_bound(spec, 5000, r, {0.5, 1e-5}, 0.05);
    EXPECT_GT(b, prev);
    EXPECT_GT(b, mle_lower_bound(spec, 5000, r, 0.05));
    prev = b;
  }
}

TEST(BoundsTest, EmpiricalCoverage) {
  const MixtureSpec base;
  MixtureSpec spec = base;
  spec.r_star = 4.0;
  const PrivacyBudget budget{0.5, 1e-5};
  const double bound = boc_error_bound(base, 1000, 4, budget, 0.05);
  Rng rng(9);
  int inside = 0;
  const int trials = 300;
  for (int t = 0; t < trials; ++t) {
    const auto ds = sample_mixture_1d(spec, 1250, rng);
    ASSERT_EQ(ds.n1(), 250u);
    const double theta = private_boc(ds, spec, budget, rng).classifier.theta;
    inside += std::abs(theta - 1.0) <= bound;
  }
  EXPECT_GE(inside, static_cast<int>(0.95 * trials));
}

TEST(SampleMixtureTest, ExactPositiveCount) {
  MixtureSpec spec;
  spec.r_star = 42.0;
  Rng rng(10);
  const auto ds = sample_mixture_1d(spec, 4300, rng);
  EXPECT_EQ(ds.n1(), 100u);
  EXPECT_EQ(ds.n(), 4300u);
}

TEST(AnalyticMetricsTest, BalancedAccuracyPeaksAtMidpointProperty) {
  for (double mu1 : {0.5, 1.0, 2.0}) {
    MixtureSpec spec;
    spec.mu1 = mu1;
    spec.r_star = 5.0;
    const double best = analytic_metrics(spec, 0.5).population.balanced_accuracy;
    for (int i = 0; i <= 20; ++i) {
      const double g = i / 20.0;
      EXPECT_LE(analytic_metrics(spec, g).population.balanced_accuracy, best + 1e-15) << g;
    }
  }
}

TEST(AnalyticMetricsTest, PopulationPrecisionRisesWithGammaProperty) {
  for (double r : {1.0, 5.0, 20.0}) {
    MixtureSpec spec;
    spec.r_star = r;
    double prev = 0.0;
    for (int i = 0; i <= 20; ++i) {
      const double p = analytic_metrics(spec, i / 20.0).population.precision;
      EXPECT_GT(p, prev);
      prev = p;
    }
  }
}

TEST(BoundsTest, MleRadiusAtImbalanceNine) {
  // sigma sqrt(10 / 1e4) * 1.959963984540054.
  EXPECT_NEAR(mle_lower_bound(MixtureSpec{}, 1e4, 9.0, 0.05), 0.06197950323045615, 1e-15);
}

}  // namespace
}  // namespace dpimb::analytic
