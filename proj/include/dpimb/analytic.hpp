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
#include <utility>
#include <vector>

#include "dpimb/dataset.hpp"
#include "dpimb/dp_core.hpp"
#include "dpimb/error.hpp"
#include "dpimb/normal.hpp"
#include "dpimb/random.hpp"

namespace dpimb::analytic {

// One-dimensional two-component Gaussian mixture with shared scale.
struct MixtureSpec {
  double mu0 = 0.0;
  double mu1 = 2.0;
  double sigma = 1.0;
  double r_star = 1.0;  // Pr(y = 0) / Pr(y = 1)
  double B = 2.0;       // public bound on |mu0|, |mu1|
  double R = 10.0;      // clipping radius

  double separation() const { return (mu1 - mu0) / sigma; }

  void validate() const {
    if (!(sigma > 0.0)) throw InvalidParameter("MixtureSpec: sigma must be positive");
    if (!(r_star >= 1.0)) throw InvalidParameter("MixtureSpec: r_star must be >= 1");
    if (!(R > 0.0)) throw InvalidParameter("MixtureSpec: R must be positive");
    if (!(std::max(std::abs(mu0), std::abs(mu1)) <= B)) {
      throw InvalidParameter("MixtureSpec: |mu| exceeds the public bound B");
    }
  }
};

// Threshold between the class means, weighted by gamma toward mu1.
inline double theta_gamma(double mu0, double mu1, double gamma) {
  return gamma * mu1 + (1.0 - gamma) * mu0;
}

struct ThresholdClassifier {
  double theta = 0.0;
  double gamma = 0.5;

  int predict(double x) const { return x >= theta ? 1 : 0; }
};

// Clipped empirical mean plus N(0, sigma_dp^2), sigma_dp from the Gaussian
// mechanism at L2 sensitivity 2R/n.
inline double private_mean(std::span<const double> samples, double R, const PrivacyBudget& budget,
                           Rng& rng, NoiseMode noise = NoiseMode::kEnabled) {
  if (samples.empty()) throw InvalidParameter("private_mean: no samples");
  if (!(R > 0.0)) throw InvalidParameter("private_mean: R must be positive");
  const double n = static_cast<double>(samples.size());
  const double sigma_dp = gaussian_noise_sigma(2.0 * R / n, budget);
  double total = 0.0;
  for (double x : samples) total += std::clamp(x, -R, R);
  const double mean = total / n;
  return noise == NoiseMode::kEnabled ? mean + sigma_dp * rng.normal() : mean;
}

inline double private_mean_sigma(std::size_t n, double R, const PrivacyBudget& budget) {
  return gaussian_noise_sigma(2.0 * R / static_cast<double>(n), budget);
}

struct BocResult {
  ThresholdClassifier classifier;
  PrivacyBudget spent;
  double mu0_hat = 0.0;
  double mu1_hat = 0.0;
};

// Midpoint of two private class means; spends the per-mean budget twice.
inline BocResult private_boc(const Dataset& ds, const MixtureSpec& spec, const PrivacyBudget& budget,
                             Rng& rng, NoiseMode noise = NoiseMode::kEnabled) {
  if (ds.d() != 1) throw InvalidParameter("private_boc: expects one feature");
  std::vector<double> xs[2];
  for (std::size_t i = 0; i < ds.n(); ++i) xs[ds.y[i]].push_back(ds.X(i, 0));
  if (xs[0].empty() || xs[1].empty()) throw InvalidParameter("private_boc: both classes must be non-empty");
  BocResult res;
  res.mu0_hat = private_mean(xs[0], spec.R, budget, rng, noise);
  res.mu1_hat = private_mean(xs[1], spec.R, budget, rng, noise);
  res.classifier = {0.5 * (res.mu0_hat + res.mu1_hat), 0.5};
  const PrivacyBudget parts[2] = {budget, budget};
  res.spent = compose_basic(parts);
  return res;
}

// Smallest admissible clipping radius for the accuracy bound on n points.
inline double min_clip_radius(const MixtureSpec& spec, double n, double beta) {
  return spec.B + spec.sigma * std::sqrt(2.0 * std::log(4.0 * n / beta));
}

// High-probability radius for |theta_hat - theta| with sample ratio r = n0/n1:
//   2 sqrt(ln(4/beta)) sqrt(sigma^2 (1+r)/n0 + 2 R^2 ln(1.25/delta)(1+r^2)/(n0^2 eps^2)).
inline double boc_error_bound(const MixtureSpec& spec, double n0, double r, const PrivacyBudget& budget,
                              double beta) {
  spec.validate();
  if (!(n0 > 0.0) || !(r >= 1.0)) throw InvalidParameter("boc_error_bound: need n0 > 0 and r >= 1");
  if (!(beta > 0.0 && beta < 1.0)) throw InvalidParameter("boc_error_bound: beta must lie in (0, 1)");
  if (!(budget.epsilon > 0.0) || !(budget.delta > 0.0 && budget.delta < 1.0)) {
    throw InvalidParameter("boc_error_bound: need epsilon > 0 and delta in (0, 1)");
  }
  const double n = n0 + n0 / r;
  if (!(spec.R > min_clip_radius(spec, n, beta))) {
    throw InvalidParameter("boc_error_bound: R must exceed B + sigma sqrt(2 ln(4n/beta))");
  }
  const double s2 = spec.sigma * spec.sigma;
  const double eps = budget.epsilon;
  const double var = s2 * (1.0 + r) / n0 +
                     2.0 * spec.R * spec.R * std::log(1.25 / budget.delta) * (1.0 + r * r) /
                         (n0 * n0 * eps * eps);
  return 2.0 * std::sqrt(std::log(4.0 / beta)) * std::sqrt(var);
}

// Non-private lower-bound radius sigma sqrt((1+r)/n0) Phi^{-1}(1 - beta/2).
// TODO: the MLE variance sigma^2 (1+r)/(4 n0) suggests a further factor 1/2;
// revisit once the derivation is settled.
inline double mle_lower_bound(const MixtureSpec& spec, double n0, double r, double beta) {
  if (!(spec.sigma > 0.0)) throw InvalidParameter("mle_lower_bound: sigma must be positive");
  if (!(n0 > 0.0) || !(r > 0.0)) throw InvalidParameter("mle_lower_bound: need n0 > 0 and r > 0");
  if (!(beta > 0.0 && beta < 1.0)) throw InvalidParameter("mle_lower_bound: beta must lie in (0, 1)");
  return spec.sigma * std::sqrt((1.0 + r) / n0) * normal::quantile(1.0 - beta / 2.0);
}

struct ImbalancedMetrics {
  double recall = 0.0;
  double precision = 0.0;
  double balanced_accuracy = 0.0;
  double f1 = 0.0;
};

struct AnalyticMetrics {
  double tpr = 0.0;  // Phi((1 - gamma) D)
  double tnr = 0.0;  // Phi(gamma D)
  // The closed forms as tabulated for the weighted threshold classifier.
  ImbalancedMetrics tabulated;
  // Population values of the same metrics for prevalence 1/(1 + r*).
  ImbalancedMetrics population;
};

// Closed-form metrics of the classifier x >= theta_gamma, D = (mu1 - mu0)/sigma.
inline AnalyticMetrics analytic_metrics(const MixtureSpec& spec, double gamma) {
  if (!(spec.sigma > 0.0)) throw InvalidParameter("analytic_metrics: sigma must be positive");
  const double D = spec.separation();
  const double a = normal::cdf((1.0 - gamma) * D);
  const double b = normal::cdf(gamma * D);
  const double r = spec.r_star;
  AnalyticMetrics m;
  m.tpr = a;
  m.tnr = b;
  m.tabulated.recall = (1.0 + r) * a;
  m.tabulated.precision = a / (a + (1.0 + r) * (1.0 - b));
  m.tabulated.balanced_accuracy = 0.5 * (a + b);
  m.tabulated.f1 = a / (a + 0.5 * (1.0 - b));

  m.population.recall = a;
  m.population.precision = a / (a + r * (1.0 - b));
  m.population.balanced_accuracy = 0.5 * (a + b);
  m.population.f1 = 2.0 * a / (a + 1.0 + r * (1.0 - b));
  return m;
}

struct SimulatedMetrics {
  std::int64_t n = 0;
  std::int64_t positives = 0;
  std::int64_t negatives = 0;
  double tpr = 0.0;
  double tnr = 0.0;
  ImbalancedMetrics value;
  // Batch-means standard errors of the values above.
  ImbalancedMetrics standard_error;
  double tpr_se = 0.0;
  double tnr_se = 0.0;
  bool defined = false;  // false when a class received no draws
};

namespace detail {

struct Tally {
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;

  double tpr() const { return static_cast<double>(tp) / static_cast<double>(tp + fn); }
  double tnr() const { return static_cast<double>(tn) / static_cast<double>(tn + fp); }
  bool defined() const { return tp + fn > 0 && tn + fp > 0; }

  ImbalancedMetrics metrics() const {
    ImbalancedMetrics m;
    m.recall = tpr();
    m.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    m.balanced_accuracy = 0.5 * (tpr() + tnr());
    const double denom = m.precision + m.recall;
    m.f1 = denom > 0.0 ? 2.0 * m.precision * m.recall / denom : 0.0;
    return m;
  }
};

inline double batch_se(const std::vector<double>& v) {
  const double k = static_cast<double>(v.size());
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= k;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (k - 1.0) / k);
}

}  // namespace detail

// Draws n labelled points with Pr(y = 1) = 1/(1 + r*), classifies with the
// true-mean threshold theta_gamma and tallies the confusion matrix.
inline SimulatedMetrics simulate_metrics(const MixtureSpec& spec, double gamma, std::int64_t n, Rng& rng,
                                         int batches = 50) {
  if (n < 1) throw InvalidParameter("simulate_metrics: n must be positive");
  if (!(spec.sigma > 0.0)) throw InvalidParameter("simulate_metrics: sigma must be positive");
  if (batches < 1) throw InvalidParameter("simulate_metrics: batches must be positive");
  const double p1 = 1.0 / (1.0 + spec.r_star);
  const double theta = theta_gamma(spec.mu0, spec.mu1, gamma);
  detail::Tally total;
  std::vector<detail::Tally> per(static_cast<std::size_t>(batches));
  for (std::int64_t i = 0; i < n; ++i) {
    const int y = rng.bernoulli(p1) ? 1 : 0;
    const double x = (y == 1 ? spec.mu1 : spec.mu0) + spec.sigma * rng.normal();
    const int yhat = x >= theta ? 1 : 0;
    auto& t = per[static_cast<std::size_t>(i % batches)];
    if (y == 1) {
      (yhat == 1 ? t.tp : t.fn) += 1;
    } else {
      (yhat == 1 ? t.fp : t.tn) += 1;
    }
  }
  for (const auto& t : per) {
    total.tp += t.tp;
    total.fp += t.fp;
    total.tn += t.tn;
    total.fn += t.fn;
  }
  SimulatedMetrics out;
  out.n = n;
  out.positives = total.tp + total.fn;
  out.negatives = total.tn + total.fp;
  out.defined = total.defined();
  if (!out.defined) return out;
  out.tpr = total.tpr();
  out.tnr = total.tnr();
  out.value = total.metrics();

  std::vector<double> re, pre, ba, f1, tp, tn;
  for (const auto& t : per) {
    if (!t.defined()) continue;
    const auto m = t.metrics();
    re.push_back(m.recall);
    pre.push_back(m.precision);
    ba.push_back(m.balanced_accuracy);
    f1.push_back(m.f1);
    tp.push_back(t.tpr());
    tn.push_back(t.tnr());
  }
  out.standard_error = {detail::batch_se(re), detail::batch_se(pre), detail::batch_se(ba),
                        detail::batch_se(f1)};
  out.tpr_se = detail::batch_se(tp);
  out.tnr_se = detail::batch_se(tn);
  return out;
}

// n points with exactly round(n / (1 + r)) positives, in random order.
inline Dataset sample_mixture_1d(const MixtureSpec& spec, std::int64_t n, Rng& rng) {
  if (n < 2) throw InvalidParameter("sample_mixture_1d: n must be at least 2");
  const auto n1 = std::clamp<std::int64_t>(
      std::llround(static_cast<double>(n) / (1.0 + spec.r_star)), 1, n - 1);
  Dataset ds;
  ds.X = Matrix(0, 1);
  ds.bounds = {{-spec.R, spec.R}};
  ds.feature_names = {"x"};
  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  std::fill(labels.begin(), labels.begin() + n1, 1);
  for (std::size_t i = labels.size(); i > 1; --i) {
    std::swap(labels[i - 1], labels[rng.uniform_index(i)]);
  }
  for (int y : labels) {
    const double x = (y == 1 ? spec.mu1 : spec.mu0) + spec.sigma * rng.normal();
    const double row[1] = {x};
    ds.append(row, y, RowOrigin::kOriginal);
  }
  return ds;
}

}  // namespace dpimb::analytic
