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
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "dpimb/dataset.hpp"
#include "dpimb/dp_core.hpp"
#include "dpimb/error.hpp"
#include "dpimb/models.hpp"
#include "dpimb/preprocess.hpp"
#include "dpimb/random.hpp"
#include "dpimb/synth.hpp"

namespace dpimb {

// ---------------------------------------------------------------------------
// Metrics

struct Confusion {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;
  std::int64_t fn = 0;

  std::int64_t positives() const { return tp + fn; }
  std::int64_t negatives() const { return tn + fp; }
  std::int64_t total() const { return tp + fp + tn + fn; }
};

struct Metrics {
  std::optional<double> auc;  // unset when labels hold a single class
  double f1 = 0.0;
  double balanced_accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double worst_class_accuracy = 0.0;
  double macro_avg_accuracy = 0.0;
  double g_mean = 0.0;
  double mcc = 0.0;
  double accuracy = 0.0;
  Confusion confusion;
  // One entry per undefined quantity that fell back to its convention.
  std::vector<std::string> notes;
};

inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{"auc",       "f1",     "balanced_accuracy",
                                              "precision", "recall", "worst_class_accuracy",
                                              "macro_avg_accuracy",  "g_mean", "mcc"};
  return names;
}

inline std::optional<double> metric_value(const Metrics& m, const std::string& name) {
  if (name == "auc") return m.auc;
  if (name == "f1") return m.f1;
  if (name == "balanced_accuracy") return m.balanced_accuracy;
  if (name == "precision") return m.precision;
  if (name == "recall") return m.recall;
  if (name == "worst_class_accuracy") return m.worst_class_accuracy;
  if (name == "macro_avg_accuracy") return m.macro_avg_accuracy;
  if (name == "g_mean") return m.g_mean;
  if (name == "mcc") return m.mcc;
  if (name == "accuracy") return m.accuracy;
  throw InvalidParameter("unknown metric '" + name + "'");
}

// Mann-Whitney statistic with midranks for tied scores.
inline std::optional<double> auc_rank(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw InvalidParameter("auc_rank: length mismatch");
  const std::size_t n = scores.size();
  std::int64_t n1 = 0;
  for (int v : labels) n1 += (v == 1);
  const std::int64_t n0 = static_cast<std::int64_t>(n) - n1;
  if (n1 == 0 || n0 == 0) return std::nullopt;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the positive rank sum keeps midranks integral.
  std::int64_t twice_rank_sum = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const auto twice_mid = static_cast<std::int64_t>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1) twice_rank_sum += twice_mid;
    }
    i = j + 1;
  }
  const std::int64_t twice_u = twice_rank_sum - n1 * (n1 + 1);
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(n0) * static_cast<double>(n1));
}

inline Metrics metrics_from_confusion(const Confusion& c) {
  Metrics m;
  m.confusion = c;
  const auto ratio = [&](std::int64_t a, std::int64_t b, const char* what) {
    if (b == 0) {
      m.notes.emplace_back(std::string(what) + " undefined, reported as 0");
      return 0.0;
    }
    return static_cast<double>(a) / static_cast<double>(b);
  };
  const double tpr = ratio(c.tp, c.positives(), "recall");
  const double tnr = ratio(c.tn, c.negatives(), "specificity");
  m.recall = tpr;
  m.precision = ratio(c.tp, c.tp + c.fp, "precision");
  m.accuracy = ratio(c.tp + c.tn, c.total(), "accuracy");
  m.balanced_accuracy = 0.5 * (tpr + tnr);
  m.macro_avg_accuracy = (tpr + tnr) / 2.0;
  m.worst_class_accuracy = std::min(tpr, tnr);
  m.g_mean = std::sqrt(tpr * tnr);
  const double pr = m.precision + m.recall;
  m.f1 = pr > 0.0 ? 2.0 * m.precision * m.recall / pr : 0.0;
  const double denom = static_cast<double>(c.tp + c.fp) * static_cast<double>(c.tp + c.fn) *
                       static_cast<double>(c.tn + c.fp) * static_cast<double>(c.tn + c.fn);
  if (denom == 0.0) {
    m.notes.emplace_back("mcc undefined, reported as 0");
    m.mcc = 0.0;
  } else {
    m.mcc = (static_cast<double>(c.tp) * static_cast<double>(c.tn) -
             static_cast<double>(c.fp) * static_cast<double>(c.fn)) /
            std::sqrt(denom);
  }
  return m;
}

inline Metrics metrics_from_predictions(std::span<const double> scores, std::span<const int> predicted,
                                        std::span<const int> labels) {
  if (labels.empty()) throw InvalidParameter("compute_metrics: no labels");
  if (scores.size() != labels.size() || predicted.size() != labels.size()) {
    throw InvalidParameter("compute_metrics: length mismatch");
  }
  Confusion c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      (predicted[i] == 1 ? c.tp : c.fn) += 1;
    } else {
      (predicted[i] == 1 ? c.fp : c.tn) += 1;
    }
  }
  Metrics m = metrics_from_confusion(c);
  m.auc = auc_rank(scores, labels);
  if (!m.auc) m.notes.emplace_back("auc undefined: single-class labels");
  return m;
}

// Predicts 1 iff score >= threshold.
inline Metrics compute_metrics(std::span<const double> scores, std::span<const int> labels, double threshold) {
  std::vector<int> predicted(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) predicted[i] = scores[i] >= threshold ? 1 : 0;
  return metrics_from_predictions(scores, predicted, labels);
}

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single value
  std::size_t count = 0;
};

inline MetricSummary summarize(std::span<const double> values) {
  MetricSummary s;
  s.count = values.size();
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Splitting

struct Split {
  Dataset train;
  Dataset test;
};

// Per class, round(f * n_c) rows (clamped to [1, n_c - 1]) go to the test
// split. Row order within each split follows the input.
inline Split stratified_split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw InvalidParameter("stratified_split: test fraction must lie in (0, 1)");
  }
  Rng rng(seed);
  std::vector<char> in_test(ds.n(), 0);
  for (int cls : {0, 1}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < ds.n(); ++i) {
      if (ds.y[i] == cls) idx.push_back(i);
    }
    if (idx.size() < 2) {
      throw InvalidParameter("stratified_split: class " + std::to_string(cls) + " has fewer than 2 rows");
    }
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.uniform_index(i)]);
    const auto want = std::clamp<std::int64_t>(
        std::llround(test_fraction * static_cast<double>(idx.size())), 1,
        static_cast<std::int64_t>(idx.size()) - 1);
    for (std::int64_t k = 0; k < want; ++k) in_test[idx[static_cast<std::size_t>(k)]] = 1;
  }
  std::vector<std::size_t> tr, te;
  for (std::size_t i = 0; i < ds.n(); ++i) (in_test[i] ? te : tr).push_back(i);
  return {ds.subset(tr), ds.subset(te)};
}

// ---------------------------------------------------------------------------
// Ranking

// One (dataset, epsilon, metric) cell: a value per method, unset if missing.
struct RankCell {
  std::string label;
  std::map<std::string, std::optional<double>> values;
};

struct RankResult {
  std::map<std::string, double> mean_rank;
  std::size_t cells_used = 0;
  std::size_t cells_excluded = 0;
};

// Ranks methods within each complete cell (1 = largest value, ties share the
// average rank) and averages over cells.
inline RankResult average_ranks(std::span<const RankCell> cells, std::span<const std::string> methods) {
  if (methods.size() < 2) throw InvalidParameter("average_ranks: need at least two methods");
  RankResult res;
  std::map<std::string, double> sums;
  for (const auto& cell : cells) {
    std::vector<std::pair<double, std::string>> vals;
    for (const auto& m : methods) {
      const auto it = cell.values.find(m);
      if (it == cell.values.end() || !it->second || std::isnan(*it->second)) break;
      vals.emplace_back(*it->second, m);
    }
    if (vals.size() != methods.size()) {
      ++res.cells_excluded;
      continue;
    }
    std::sort(vals.begin(), vals.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; i < vals.size();) {
      std::size_t j = i;
      while (j + 1 < vals.size() && vals[j + 1].first == vals[i].first) ++j;
      const double rank = 0.5 * static_cast<double>(i + 1 + j + 1);
      for (std::size_t k = i; k <= j; ++k) sums[vals[k].second] += rank;
      i = j + 1;
    }
    ++res.cells_used;
  }
  for (const auto& m : methods) {
    res.mean_rank[m] = res.cells_used == 0 ? std::nan("") : sums[m] / static_cast<double>(res.cells_used);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Classifiers over raw features

// A trained pipeline: maps raw feature rows to scores and labels.
struct Classifier {
  std::size_t d = 0;
  std::function<Predictions(const Matrix&)> predict_fn;

  Predictions predict(const Matrix& X) const {
    if (X.rows() > 0 && X.cols() != d) throw InvalidParameter("Classifier: feature width mismatch");
    return predict_fn(X);
  }
};

inline Classifier make_classifier(LinearModel model) {
  const std::size_t d = model.d();
  return {d, [m = std::move(model)](const Matrix& X) { return predict(m, X); }};
}

inline Classifier make_classifier(FeatureScaler scaler, LinearModel model) {
  const std::size_t d = model.d();
  return {d, [s = std::move(scaler), m = std::move(model)](const Matrix& X) {
            return predict(m, s.transform(X));
          }};
}

inline Classifier make_classifier(FeatureScaler scaler, BaggingEnsemble ensemble) {
  const std::size_t d = scaler.bounds.size();
  return {d, [s = std::move(scaler), e = std::move(ensemble)](const Matrix& X) {
            return e.predict(s.transform(X));
          }};
}

struct GridPoint {
  double x = 0.0;
  double y = 0.0;
  double score = 0.0;
  int label = 0;
};

// Cell-centre predictions, row-major with y outer and x inner.
inline std::vector<GridPoint> boundary_grid(const Classifier& clf, std::pair<double, double> x_range,
                                            std::pair<double, double> y_range, std::size_t nx,
                                            std::size_t ny) {
  if (clf.d != 2) throw InvalidParameter("boundary_grid: classifier must take exactly 2 features");
  if (nx == 0 || ny == 0) throw InvalidParameter("boundary_grid: resolution must be positive");
  if (!(x_range.second > x_range.first) || !(y_range.second > y_range.first)) {
    throw InvalidParameter("boundary_grid: ranges must be increasing");
  }
  Matrix pts(nx * ny, 2);
  const double dx = (x_range.second - x_range.first) / static_cast<double>(nx);
  const double dy = (y_range.second - y_range.first) / static_cast<double>(ny);
  for (std::size_t r = 0; r < ny; ++r) {
    for (std::size_t c = 0; c < nx; ++c) {
      pts(r * nx + c, 0) = x_range.first + (static_cast<double>(c) + 0.5) * dx;
      pts(r * nx + c, 1) = y_range.first + (static_cast<double>(r) + 0.5) * dy;
    }
  }
  const Predictions p = clf.predict(pts);
  std::vector<GridPoint> out(pts.rows());
  for (std::size_t i = 0; i < pts.rows(); ++i) out[i] = {pts(i, 0), pts(i, 1), p.scores[i], p.labels[i]};
  return out;
}

inline std::vector<GridPoint> boundary_grid(const LinearModel& model, std::pair<double, double> x_range,
                                            std::pair<double, double> y_range, std::size_t nx,
                                            std::size_t ny) {
  return boundary_grid(make_classifier(model), x_range, y_range, nx, ny);
}

// ---------------------------------------------------------------------------
// Experiments

enum class Preprocess { kNone, kOversample, kSmote, kSynth };
enum class TrainerKind { kBaseline, kErm, kDpSgd, kBagging };

// kAdjusted: the trainer gets the configured epsilon divided by the
// augmentation factor, so the pipeline total equals the configured value.
// kUnadjusted: the trainer gets the configured epsilon and the receipt shows
// the inflated total.
enum class AugmentBudgetMode { kAdjusted, kUnadjusted };

struct MethodSpec {
  std::string name;
  Preprocess pre = Preprocess::kNone;
  TrainerKind trainer = TrainerKind::kBaseline;
  bool weighted = false;
};

// Parses "[pre+]trainer[-weighted]", e.g. "erm-weighted", "smote+erm",
// "synth+baseline".
inline MethodSpec parse_method(const std::string& name) {
  MethodSpec m;
  m.name = name;
  std::string rest = name;
  const auto plus = rest.find('+');
  if (plus != std::string::npos) {
    const std::string pre = rest.substr(0, plus);
    rest = rest.substr(plus + 1);
    if (pre == "none") {
      m.pre = Preprocess::kNone;
    } else if (pre == "oversample") {
      m.pre = Preprocess::kOversample;
    } else if (pre == "smote") {
      m.pre = Preprocess::kSmote;
    } else if (pre == "synth") {
      m.pre = Preprocess::kSynth;
    } else {
      throw InvalidParameter("unknown pre-processing '" + pre + "' in method '" + name + "'");
    }
  }
  const std::string suffix = "-weighted";
  if (rest.size() > suffix.size() && rest.compare(rest.size() - suffix.size(), suffix.size(), suffix) == 0) {
    m.weighted = true;
    rest.resize(rest.size() - suffix.size());
  }
  if (rest == "baseline") {
    m.trainer = TrainerKind::kBaseline;
  } else if (rest == "erm") {
    m.trainer = TrainerKind::kErm;
  } else if (rest == "dpsgd") {
    m.trainer = TrainerKind::kDpSgd;
  } else if (rest == "bagging") {
    m.trainer = TrainerKind::kBagging;
  } else {
    throw InvalidParameter("unknown trainer '" + rest + "' in method '" + name + "'");
  }
  return m;
}

struct PipelineParams {
  double baseline_lambda = 1e-3;
  ErmConfig erm;  // epsilon is overwritten per cell
  DpSgdConfig dpsgd;  // target is overwritten per cell
  std::int64_t bagging_m = 25;
  double bagging_subsample = 0.5;
  // Rows generated by oversampling or SMOTE; unset balances the classes.
  std::optional<std::int64_t> augment_count;
  int smote_k = 5;
  AugmentBudgetMode augment_budget = AugmentBudgetMode::kAdjusted;
  int synth_bins = 10;
  SamplingMode synth_mode = SamplingMode::kConditional;
  // Synthetic rows; unset uses twice the training majority count.
  std::optional<std::int64_t> synth_count;
  // When set, class weights come from Laplace-noised counts at this epsilon.
  std::optional<double> weights_epsilon;
};

struct NamedDataset {
  std::string name;
  Dataset data;
};

struct ExperimentConfig {
  std::vector<NamedDataset> datasets;
  std::vector<MethodSpec> methods;
  std::vector<double> epsilons{0.05, 0.1, 0.5, 1.0, 5.0};
  double delta = 1e-5;
  int seeds = 10;
  std::uint64_t master_seed = 0;
  double test_fraction = 0.2;
  PipelineParams params;

  void validate() const {
    if (datasets.empty()) throw InvalidParameter("experiment: no datasets");
    if (methods.empty()) throw InvalidParameter("experiment: no methods");
    if (epsilons.empty()) throw InvalidParameter("experiment: empty epsilon grid");
    for (double e : epsilons) {
      if (!(e > 0.0)) throw InvalidParameter("experiment: epsilons must be positive");
    }
    if (seeds < 1) throw InvalidParameter("experiment: seeds must be at least 1");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
      throw InvalidParameter("experiment: split fraction must lie in (0, 1)");
    }
    if (!(delta > 0.0 && delta < 1.0)) throw InvalidParameter("experiment: delta must lie in (0, 1)");
  }
};

struct CellResult {
  std::string dataset;
  std::string method;
  double epsilon = 0.0;  // configured
  int seed = 0;
  Metrics metrics;
  PrivacyBudget receipt;          // whole-pipeline guarantee
  PrivacyBudget trainer_budget;   // what the trainer itself was given
  std::vector<std::string> notes;
};

struct PipelineRun {
  Classifier classifier;
  PrivacyBudget receipt;
  PrivacyBudget trainer_budget;
  Dataset train;  // as handed to the trainer, in raw feature space
  std::vector<std::string> notes;
  // The fitted model in scaled coordinates: one of linear or ensemble is set.
  FeatureScaler scaler;
  std::optional<LinearModel> linear;
  std::optional<BaggingEnsemble> ensemble;
  double gradient_norm = 0.0;  // solver certificate, 0 for DP-SGD and bagging
  int iterations = 0;
};

namespace detail {

template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    rethrow_with_context(e, std::string("stage '") + name + "'");
  }
}

inline std::int64_t balancing_count(const Dataset& ds) {
  const auto n0 = static_cast<std::int64_t>(ds.n0());
  const auto n1 = static_cast<std::int64_t>(ds.n1());
  return std::max<std::int64_t>(0, n0 - n1);
}

}  // namespace detail

// Pre-processes the training split, trains, and accounts the whole pipeline.
// epsilon = +inf runs every stage without noise.
inline PipelineRun run_pipeline(const Dataset& train, const MethodSpec& method, double epsilon, double delta,
                                const PipelineParams& params, Rng& rng) {
  PipelineRun run;
  const bool private_trainer = method.trainer != TrainerKind::kBaseline;
  const double d = static_cast<double>(train.d());

  // Multiplicative inflation of the trainer's guarantee caused by
  // augmentation; 1 when the pipeline adds no correlated rows.
  double inflation = 1.0;
  Dataset data = detail::stage("preprocess", [&]() -> Dataset {
    switch (method.pre) {
      case Preprocess::kNone:
        return train;
      case Preprocess::kOversample: {
        const auto N = params.augment_count.value_or(detail::balancing_count(train));
        inflation = static_cast<double>(replication_factor(N, static_cast<std::int64_t>(train.n1()))) + 1.0;
        return oversample_deterministic(train, N);
      }
      case Preprocess::kSmote: {
        const auto N = params.augment_count.value_or(detail::balancing_count(train));
        SmoteAdjustment adj{static_cast<int>(d), params.smote_k, static_cast<std::int64_t>(train.n1()), N, 0.0};
        inflation = smote_adjusted_epsilon_pure(1.0, adj);
        return smote_augment(train, N, params.smote_k, rng);
      }
      case Preprocess::kSynth: {
        const auto N = params.synth_count.value_or(2 * static_cast<std::int64_t>(train.n0()));
        const Discretizer disc(train.bounds, params.synth_bins);
        auto [balanced, spent] = end_to_end_private_balance(train, disc, {epsilon, 0.0}, N, params.synth_mode, rng);
        run.receipt = spent;
        return balanced;
      }
    }
    throw InvalidParameter("unknown pre-processing");
  });

  const bool synth = method.pre == Preprocess::kSynth;
  if (method.pre == Preprocess::kSmote && private_trainer && method.trainer == TrainerKind::kDpSgd) {
    throw ConfigurationError("stage 'account': SMOTE inflation is defined for pure-epsilon trainers only");
  }
  if (params.weights_epsilon && method.pre != Preprocess::kNone) {
    throw ConfigurationError("stage 'account': private class weights are supported without pre-processing only");
  }

  // Trainer budget. Synthetic training data carries no further privacy cost.
  PrivacyBudget trainer{epsilon, delta};
  if (!std::isfinite(epsilon) || synth || !private_trainer) {
    trainer = non_private_budget();
  } else if (params.augment_budget == AugmentBudgetMode::kAdjusted && inflation != 1.0) {
    trainer.epsilon = epsilon / inflation;
    if (method.pre == Preprocess::kOversample) trainer.delta = delta / inflation;
  }
  // The SMOTE inflation covers pure guarantees only.
  if (method.pre == Preprocess::kSmote) trainer.delta = 0.0;
  run.trainer_budget = trainer;

  const FeatureScaler scaler{train.bounds};
  run.scaler = scaler;
  const Dataset scaled = scaler.transform(data);
  PrivacyBudget weights_budget{0.0, 0.0};
  const ClassWeights w = detail::stage("weights", [&]() -> ClassWeights {
    if (!method.weighted) return unit_weights(scaled);
    if (params.weights_epsilon && std::isfinite(epsilon)) {
      auto [cw, spent] = private_class_weights(scaled, *params.weights_epsilon, rng);
      weights_budget = spent;
      return cw;
    }
    return class_weights(scaled);
  });

  PrivacyBudget spent_by_trainer = non_private_budget();
  run.classifier = detail::stage("train", [&]() -> Classifier {
    switch (private_trainer && std::isfinite(trainer.epsilon) ? method.trainer : TrainerKind::kBaseline) {
      case TrainerKind::kBaseline: {
        if (private_trainer && method.trainer == TrainerKind::kErm) {
          ErmConfig cfg = params.erm;
          cfg.epsilon = std::numeric_limits<double>::infinity();
          auto res = train_erm_objective_perturbation(scaled, w, cfg, rng);
          run.gradient_norm = res.certificate.gradient_norm;
          run.iterations = res.certificate.iterations;
          run.linear = res.model;
          return make_classifier(scaler, res.model);
        }
        auto res = train_logreg_baseline(scaled, w, params.baseline_lambda, params.erm.solver);
        run.gradient_norm = res.solver.gradient_norm;
        run.iterations = res.solver.iterations;
        run.linear = res.model;
        return make_classifier(scaler, res.model);
      }
      case TrainerKind::kErm: {
        ErmConfig cfg = params.erm;
        cfg.epsilon = trainer.epsilon;
        auto res = train_erm_objective_perturbation(scaled, w, cfg, rng);
        spent_by_trainer = res.budget;
        run.gradient_norm = res.certificate.gradient_norm;
        run.iterations = res.certificate.iterations;
        run.linear = res.model;
        return make_classifier(scaler, res.model);
      }
      case TrainerKind::kDpSgd: {
        DpSgdConfig cfg = params.dpsgd;
        cfg.target = trainer;
        cfg.delta_prime = trainer.delta / 2.0;
        auto res = train_dpsgd(scaled, w, cfg, rng);
        spent_by_trainer = res.budget;
        run.iterations = static_cast<int>(res.trace.releases);
        run.linear = res.model;
        return make_classifier(scaler, res.model);
      }
      case TrainerKind::kBagging: {
        ErmConfig cfg = params.erm;
        auto res = train_private_bagging(scaled, w, params.bagging_m, params.bagging_subsample, trainer,
                                         trainer.delta, cfg, rng);
        spent_by_trainer = res.budget;
        run.ensemble = res.ensemble;
        return make_classifier(scaler, std::move(res.ensemble));
      }
    }
    throw InvalidParameter("unknown trainer");
  });

  run.receipt = detail::stage("account", [&]() -> PrivacyBudget {
    if (synth) return run.receipt;
    if (!std::isfinite(spent_by_trainer.epsilon)) return non_private_budget();
    PrivacyBudget total = spent_by_trainer;
    const auto n1 = static_cast<std::int64_t>(train.n1());
    if (method.pre == Preprocess::kOversample) {
      total = oversampling_adjusted_budget(spent_by_trainer, params.augment_count.value_or(detail::balancing_count(train)), n1);
    } else if (method.pre == Preprocess::kSmote) {
      SmoteAdjustment adj{static_cast<int>(d), params.smote_k, n1,
                          params.augment_count.value_or(detail::balancing_count(train)), 0.0};
      total = {smote_adjusted_epsilon_pure(spent_by_trainer.epsilon, adj), 0.0};
    }
    if (weights_budget.epsilon > 0.0) {
      const PrivacyBudget parts[2] = {total, weights_budget};
      total = compose_basic(parts);
    }
    return total;
  });
  run.train = std::move(data);
  return run;
}

// Seed of one (dataset, method, epsilon, seed) cell.
inline std::uint64_t cell_seed(std::uint64_t master, std::size_t dataset, std::size_t method, std::size_t eps,
                               int seed) {
  return derive_seed(master, {1, dataset, method, eps, static_cast<std::uint64_t>(seed)});
}

// The split depends on the dataset and seed only, so every method sees the
// same partition.
inline std::uint64_t split_seed(std::uint64_t master, std::size_t dataset, int seed) {
  return derive_seed(master, {2, dataset, static_cast<std::uint64_t>(seed)});
}

inline std::vector<CellResult> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<CellResult> out;
  for (std::size_t di = 0; di < cfg.datasets.size(); ++di) {
    const auto& named = cfg.datasets[di];
    for (int s = 0; s < cfg.seeds; ++s) {
      const Split split = detail::stage("split", [&]() {
        return stratified_split(named.data, cfg.test_fraction, split_seed(cfg.master_seed, di, s));
      });
      for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
        for (std::size_t ei = 0; ei < cfg.epsilons.size(); ++ei) {
          const auto& method = cfg.methods[mi];
          Rng rng(cell_seed(cfg.master_seed, di, mi, ei, s));
          PipelineRun run;
          try {
            run = run_pipeline(split.train, method, cfg.epsilons[ei], cfg.delta, cfg.params, rng);
          } catch (const Error& e) {
            rethrow_with_context(e, named.name + "/" + method.name);
          }
          for (auto o : split.test.origin) {
            if (o != RowOrigin::kOriginal) throw DataError("test split contains augmented rows");
          }
          const Predictions p = run.classifier.predict(split.test.X);
          CellResult cell;
          cell.dataset = named.name;
          cell.method = method.name;
          cell.epsilon = cfg.epsilons[ei];
          cell.seed = s;
          cell.metrics = metrics_from_predictions(p.scores, p.labels, split.test.y);
          cell.receipt = run.receipt;
          cell.trainer_budget = run.trainer_budget;
          cell.notes = std::move(run.notes);
          out.push_back(std::move(cell));
        }
      }
    }
  }
  return out;
}

// Per (dataset, method, epsilon): mean and std of every metric over seeds.
struct SummaryRow {
  std::string dataset;
  std::string method;
  double epsilon = 0.0;
  std::map<std::string, MetricSummary> metrics;
};

inline std::vector<SummaryRow> summarize_cells(const std::vector<CellResult>& cells) {
  std::vector<SummaryRow> rows;
  std::map<std::tuple<std::string, std::string, double>, std::size_t> index;
  std::vector<std::map<std::string, std::vector<double>>> values;
  for (const auto& c : cells) {
    const auto key = std::make_tuple(c.dataset, c.method, c.epsilon);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, rows.size()).first;
      rows.push_back({c.dataset, c.method, c.epsilon, {}});
      values.emplace_back();
    }
    for (const auto& name : metric_names()) {
      if (const auto v = metric_value(c.metrics, name)) values[it->second][name].push_back(*v);
    }
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (const auto& [name, v] : values[i]) rows[i].metrics[name] = summarize(v);
  }
  return rows;
}

// Rank cells for every (dataset, epsilon, metric) from seed means.
inline std::vector<RankCell> rank_cells(const std::vector<SummaryRow>& rows) {
  std::map<std::tuple<std::string, double, std::string>, RankCell> cells;
  for (const auto& r : rows) {
    for (const auto& [metric, s] : r.metrics) {
      auto& cell = cells[std::make_tuple(r.dataset, r.epsilon, metric)];
      cell.label = r.dataset + "/" + metric;
      cell.values[r.method] = s.mean;
    }
  }
  std::vector<RankCell> out;
  for (auto& [key, cell] : cells) out.push_back(std::move(cell));
  return out;
}

}  // namespace dpimb
