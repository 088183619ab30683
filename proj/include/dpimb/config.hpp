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

// JSON configuration and report serialisation. Requires nlohmann/json.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "dpimb/data.hpp"
#include "dpimb/dp_core.hpp"
#include "dpimb/error.hpp"
#include "dpimb/eval.hpp"
#include "dpimb/models.hpp"
#include "dpimb/synth.hpp"

namespace dpimb::config {

using Json = nlohmann::ordered_json;

// Rejects keys outside the allowed set.
inline void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigurationError(where + ": expected a JSON object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!ok.count(it.key())) throw ConfigurationError(where + ": unknown key '" + it.key() + "'");
  }
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigurationError(where + ": key '" + key + "' has the wrong type");
  }
}

template <typename T>
T require(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigurationError(where + ": missing key '" + key + "'");
  return get_or<T>(j, key, T{}, where);
}

// Infinite epsilon serialises as null.
inline Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json budget_json(const PrivacyBudget& b) {
  return Json{{"epsilon", number_or_null(b.epsilon)}, {"delta", b.delta}, {"private", b.is_finite()}};
}

// ---------------------------------------------------------------------------
// Dataset sources

struct CsvSource {
  std::string path;
  CsvOptions options;
  std::optional<std::int64_t> max_n0;
  std::optional<std::int64_t> max_n1;
  std::uint64_t subsample_seed = 0;
};

struct DatasetSource {
  std::string name;
  std::optional<MixtureGenSpec> mixture;
  std::optional<CsvSource> csv;
};

inline MixtureGenSpec parse_mixture(const Json& j, const std::string& where) {
  check_keys(j, {"mean0", "mean1", "variance", "p1", "n", "seed"}, where);
  MixtureGenSpec s;
  s.mean0 = get_or(j, "mean0", s.mean0, where);
  s.mean1 = get_or(j, "mean1", s.mean1, where);
  s.variance = get_or(j, "variance", s.variance, where);
  s.p1 = get_or(j, "p1", s.p1, where);
  s.n = get_or(j, "n", s.n, where);
  s.seed = get_or(j, "seed", s.seed, where);
  s.validate();
  return s;
}

inline Json mixture_json(const MixtureGenSpec& s) {
  return Json{{"mean0", s.mean0}, {"mean1", s.mean1}, {"variance", s.variance},
              {"p1", s.p1},       {"n", s.n},         {"seed", s.seed}};
}

inline CsvSource parse_csv_source(const Json& j, const std::string& where) {
  check_keys(j, {"path", "label_column", "positive_label", "bounds", "max_n0", "max_n1", "subsample_seed"}, where);
  CsvSource s;
  s.path = require<std::string>(j, "path", where);
  s.options.label_column = get_or<std::string>(j, "label_column", "label", where);
  if (j.contains("positive_label")) s.options.positive_label = require<std::string>(j, "positive_label", where);
  if (j.contains("bounds")) {
    const auto& b = j.at("bounds");
    if (!b.is_object()) throw ConfigurationError(where + ": bounds must map feature names to [lo, hi]");
    for (auto it = b.begin(); it != b.end(); ++it) {
      if (!it.value().is_array() || it.value().size() != 2) {
        throw ConfigurationError(where + ": bounds for '" + it.key() + "' must be [lo, hi]");
      }
      s.options.bounds[it.key()] = {it.value()[0].get<double>(), it.value()[1].get<double>()};
    }
  }
  if (j.contains("max_n0")) s.max_n0 = require<std::int64_t>(j, "max_n0", where);
  if (j.contains("max_n1")) s.max_n1 = require<std::int64_t>(j, "max_n1", where);
  s.subsample_seed = get_or<std::uint64_t>(j, "subsample_seed", 0, where);
  return s;
}

inline Json csv_source_json(const CsvSource& s) {
  Json j{{"path", s.path}, {"label_column", s.options.label_column}};
  if (s.options.positive_label) j["positive_label"] = *s.options.positive_label;
  if (!s.options.bounds.empty()) {
    Json b = Json::object();
    for (const auto& [name, fb] : s.options.bounds) b[name] = Json::array({fb.lo, fb.hi});
    j["bounds"] = b;
  }
  if (s.max_n0) j["max_n0"] = *s.max_n0;
  if (s.max_n1) j["max_n1"] = *s.max_n1;
  j["subsample_seed"] = s.subsample_seed;
  return j;
}

inline DatasetSource parse_dataset_source(const Json& j, const std::string& where) {
  check_keys(j, {"name", "mixture", "csv"}, where);
  DatasetSource s;
  s.name = require<std::string>(j, "name", where);
  if (j.contains("mixture")) s.mixture = parse_mixture(j.at("mixture"), where + ".mixture");
  if (j.contains("csv")) s.csv = parse_csv_source(j.at("csv"), where + ".csv");
  if (s.mixture.has_value() == s.csv.has_value()) {
    throw ConfigurationError(where + ": give exactly one of 'mixture' or 'csv'");
  }
  return s;
}

inline Json dataset_source_json(const DatasetSource& s) {
  Json j{{"name", s.name}};
  if (s.mixture) j["mixture"] = mixture_json(*s.mixture);
  if (s.csv) j["csv"] = csv_source_json(*s.csv);
  return j;
}

struct LoadedDataset {
  NamedDataset named;
  std::vector<std::string> warnings;
  ClipReport clips;
};

inline LoadedDataset load_dataset(const DatasetSource& s) {
  LoadedDataset out;
  out.named.name = s.name;
  if (s.mixture) {
    out.named.data = generate_mixture(*s.mixture);
    return out;
  }
  auto res = load_csv(s.csv->path, s.csv->options);
  out.warnings = res.warnings;
  out.clips = res.clips;
  out.named.data = std::move(res.data);
  if (ensure_minority_positive(out.named.data)) out.warnings.push_back("labels flipped so that class 1 is the minority");
  if (s.csv->max_n0 || s.csv->max_n1) {
    out.named.data = subsample_classes(out.named.data,
                                       s.csv->max_n0.value_or(static_cast<std::int64_t>(out.named.data.n0())),
                                       s.csv->max_n1.value_or(static_cast<std::int64_t>(out.named.data.n1())),
                                       s.csv->subsample_seed);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline parameters

inline const char* augment_budget_name(AugmentBudgetMode m) {
  return m == AugmentBudgetMode::kAdjusted ? "adjusted" : "unadjusted";
}

inline const char* sampling_mode_name(SamplingMode m) {
  return m == SamplingMode::kConditional ? "conditional" : "rejection";
}

inline SamplingMode parse_sampling_mode(const std::string& s, const std::string& where) {
  if (s == "conditional") return SamplingMode::kConditional;
  if (s == "rejection") return SamplingMode::kRejection;
  throw ConfigurationError(where + ": sampling mode must be 'conditional' or 'rejection'");
}

inline PipelineParams parse_params(const Json& j, const std::string& where) {
  check_keys(j, {"baseline_lambda", "erm", "dpsgd", "bagging", "augment_count", "smote_k", "augment_budget", "synth",
                 "weights_epsilon"},
             where);
  PipelineParams p;
  p.baseline_lambda = get_or(j, "baseline_lambda", p.baseline_lambda, where);
  if (j.contains("erm")) {
    const auto& e = j.at("erm");
    const std::string w = where + ".erm";
    check_keys(e, {"lambda", "c", "tolerance", "max_iterations", "fit_intercept"}, w);
    p.erm.lambda = get_or(e, "lambda", p.erm.lambda, w);
    p.erm.c = get_or(e, "c", p.erm.c, w);
    p.erm.solver.tolerance = get_or(e, "tolerance", p.erm.solver.tolerance, w);
    p.erm.solver.max_iterations = get_or(e, "max_iterations", p.erm.solver.max_iterations, w);
    p.erm.fit_intercept = get_or(e, "fit_intercept", p.erm.fit_intercept, w);
  }
  if (j.contains("dpsgd")) {
    const auto& e = j.at("dpsgd");
    const std::string w = where + ".dpsgd";
    check_keys(e, {"clip_norm", "learning_rate", "expected_batch", "minibatch", "iterations", "policy"}, w);
    p.dpsgd.clip_norm = get_or(e, "clip_norm", p.dpsgd.clip_norm, w);
    p.dpsgd.learning_rate = get_or(e, "learning_rate", p.dpsgd.learning_rate, w);
    p.dpsgd.expected_batch = get_or(e, "expected_batch", p.dpsgd.expected_batch, w);
    p.dpsgd.minibatch = get_or(e, "minibatch", p.dpsgd.minibatch, w);
    p.dpsgd.iterations = get_or(e, "iterations", p.dpsgd.iterations, w);
    const auto policy = get_or<std::string>(e, "policy", "strict", w);
    if (policy == "strict") {
      p.dpsgd.policy = StepBudgetPolicy::kStrict;
    } else if (policy == "cap") {
      p.dpsgd.policy = StepBudgetPolicy::kCapPerStep;
    } else {
      throw ConfigurationError(w + ": policy must be 'strict' or 'cap'");
    }
  }
  if (j.contains("bagging")) {
    const auto& e = j.at("bagging");
    const std::string w = where + ".bagging";
    check_keys(e, {"m", "subsample"}, w);
    p.bagging_m = get_or(e, "m", p.bagging_m, w);
    p.bagging_subsample = get_or(e, "subsample", p.bagging_subsample, w);
  }
  if (j.contains("augment_count")) p.augment_count = require<std::int64_t>(j, "augment_count", where);
  p.smote_k = get_or(j, "smote_k", p.smote_k, where);
  const auto ab = get_or<std::string>(j, "augment_budget", "adjusted", where);
  if (ab == "adjusted") {
    p.augment_budget = AugmentBudgetMode::kAdjusted;
  } else if (ab == "unadjusted") {
    p.augment_budget = AugmentBudgetMode::kUnadjusted;
  } else {
    throw ConfigurationError(where + ": augment_budget must be 'adjusted' or 'unadjusted'");
  }
  if (j.contains("synth")) {
    const auto& e = j.at("synth");
    const std::string w = where + ".synth";
    check_keys(e, {"bins", "mode", "count"}, w);
    p.synth_bins = get_or(e, "bins", p.synth_bins, w);
    p.synth_mode = parse_sampling_mode(get_or<std::string>(e, "mode", "conditional", w), w);
    if (e.contains("count")) p.synth_count = require<std::int64_t>(e, "count", w);
  }
  if (j.contains("weights_epsilon")) p.weights_epsilon = require<double>(j, "weights_epsilon", where);
  return p;
}

inline Json params_json(const PipelineParams& p) {
  Json j;
  j["baseline_lambda"] = p.baseline_lambda;
  j["erm"] = Json{{"lambda", p.erm.lambda},
                  {"c", p.erm.c},
                  {"tolerance", p.erm.solver.tolerance},
                  {"max_iterations", p.erm.solver.max_iterations},
                  {"fit_intercept", p.erm.fit_intercept}};
  j["dpsgd"] = Json{{"clip_norm", p.dpsgd.clip_norm},
                    {"learning_rate", p.dpsgd.learning_rate},
                    {"expected_batch", p.dpsgd.expected_batch},
                    {"minibatch", p.dpsgd.minibatch},
                    {"iterations", p.dpsgd.iterations},
                    {"policy", p.dpsgd.policy == StepBudgetPolicy::kStrict ? "strict" : "cap"}};
  j["bagging"] = Json{{"m", p.bagging_m}, {"subsample", p.bagging_subsample}};
  if (p.augment_count) j["augment_count"] = *p.augment_count;
  j["smote_k"] = p.smote_k;
  j["augment_budget"] = augment_budget_name(p.augment_budget);
  Json synth{{"bins", p.synth_bins}, {"mode", sampling_mode_name(p.synth_mode)}};
  if (p.synth_count) synth["count"] = *p.synth_count;
  j["synth"] = synth;
  if (p.weights_epsilon) j["weights_epsilon"] = *p.weights_epsilon;
  return j;
}

// ---------------------------------------------------------------------------
// Experiment file

struct OutputPaths {
  std::string json;
  std::string csv;
};

struct ExperimentFile {
  std::vector<DatasetSource> datasets;
  std::vector<std::string> methods;
  std::vector<double> epsilons{0.05, 0.1, 0.5, 1.0, 5.0};
  double delta = 1e-5;
  int seeds = 10;
  std::uint64_t master_seed = 0;
  double test_fraction = 0.2;
  PipelineParams params;
  OutputPaths output;
};

inline ExperimentFile parse_experiment(const Json& j) {
  const std::string where = "config";
  check_keys(j, {"datasets", "methods", "epsilons", "delta", "seeds", "master_seed", "test_fraction", "params",
                 "output"},
             where);
  ExperimentFile f;
  if (!j.contains("datasets") || !j.at("datasets").is_array()) {
    throw ConfigurationError(where + ": 'datasets' must be an array");
  }
  for (std::size_t i = 0; i < j.at("datasets").size(); ++i) {
    f.datasets.push_back(parse_dataset_source(j.at("datasets")[i], where + ".datasets[" + std::to_string(i) + "]"));
  }
  f.methods = require<std::vector<std::string>>(j, "methods", where);
  for (const auto& m : f.methods) parse_method(m);
  f.epsilons = get_or(j, "epsilons", f.epsilons, where);
  f.delta = get_or(j, "delta", f.delta, where);
  f.seeds = get_or(j, "seeds", f.seeds, where);
  f.master_seed = get_or(j, "master_seed", f.master_seed, where);
  f.test_fraction = get_or(j, "test_fraction", f.test_fraction, where);
  if (j.contains("params")) f.params = parse_params(j.at("params"), where + ".params");
  if (j.contains("output")) {
    const auto& o = j.at("output");
    check_keys(o, {"json", "csv"}, where + ".output");
    f.output.json = get_or<std::string>(o, "json", "", where + ".output");
    f.output.csv = get_or<std::string>(o, "csv", "", where + ".output");
  }
  return f;
}

inline Json experiment_json(const ExperimentFile& f) {
  Json j;
  Json ds = Json::array();
  for (const auto& s : f.datasets) ds.push_back(dataset_source_json(s));
  j["datasets"] = ds;
  j["methods"] = f.methods;
  j["epsilons"] = f.epsilons;
  j["delta"] = f.delta;
  j["seeds"] = f.seeds;
  j["master_seed"] = f.master_seed;
  j["test_fraction"] = f.test_fraction;
  j["params"] = params_json(f.params);
  j["output"] = Json{{"json", f.output.json}, {"csv", f.output.csv}};
  return j;
}

inline ExperimentConfig build_experiment(const ExperimentFile& f, std::vector<std::string>* warnings = nullptr) {
  ExperimentConfig cfg;
  for (const auto& s : f.datasets) {
    auto loaded = load_dataset(s);
    if (warnings) {
      for (const auto& w : loaded.warnings) warnings->push_back(s.name + ": " + w);
    }
    cfg.datasets.push_back(std::move(loaded.named));
  }
  for (const auto& m : f.methods) cfg.methods.push_back(parse_method(m));
  cfg.epsilons = f.epsilons;
  cfg.delta = f.delta;
  cfg.seeds = f.seeds;
  cfg.master_seed = f.master_seed;
  cfg.test_fraction = f.test_fraction;
  cfg.params = f.params;
  return cfg;
}

// ---------------------------------------------------------------------------
// Reports

inline Json metrics_json(const Metrics& m) {
  Json j;
  j["auc"] = m.auc ? Json(*m.auc) : Json(nullptr);
  j["f1"] = m.f1;
  j["balanced_accuracy"] = m.balanced_accuracy;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["worst_class_accuracy"] = m.worst_class_accuracy;
  j["macro_avg_accuracy"] = m.macro_avg_accuracy;
  j["g_mean"] = m.g_mean;
  j["mcc"] = m.mcc;
  j["accuracy"] = m.accuracy;
  j["confusion"] = Json{{"tp", m.confusion.tp}, {"fp", m.confusion.fp}, {"tn", m.confusion.tn}, {"fn", m.confusion.fn}};
  if (!m.notes.empty()) j["notes"] = m.notes;
  return j;
}

inline Json report_json(const Json& resolved_config, const std::vector<CellResult>& cells,
                        const std::vector<std::string>& warnings) {
  Json j;
  j["config"] = resolved_config;
  j["warnings"] = warnings;
  Json jc = Json::array();
  for (const auto& c : cells) {
    jc.push_back(Json{{"dataset", c.dataset},
                      {"method", c.method},
                      {"epsilon", c.epsilon},
                      {"seed", c.seed},
                      {"metrics", metrics_json(c.metrics)},
                      {"receipt", budget_json(c.receipt)},
                      {"trainer_budget", budget_json(c.trainer_budget)}});
  }
  j["cells"] = jc;
  const auto summary = summarize_cells(cells);
  Json js = Json::array();
  std::set<std::string> methods;
  for (const auto& row : summary) {
    methods.insert(row.method);
    Json m;
    for (const auto& [name, s] : row.metrics) m[name] = Json{{"mean", s.mean}, {"std", s.std}, {"count", s.count}};
    js.push_back(Json{{"dataset", row.dataset}, {"method", row.method}, {"epsilon", row.epsilon}, {"metrics", m}});
  }
  j["summary"] = js;
  if (methods.size() >= 2) {
    const std::vector<std::string> ms(methods.begin(), methods.end());
    const auto cellsr = rank_cells(summary);
    const auto ranks = average_ranks(cellsr, ms);
    Json jr;
    for (const auto& [m, r] : ranks.mean_rank) jr[m] = number_or_null(r);
    j["average_ranks"] = Json{{"mean_rank", jr}, {"cells_used", ranks.cells_used}, {"cells_excluded", ranks.cells_excluded}};
  }
  return j;
}

inline std::string report_csv(const std::vector<CellResult>& cells) {
  std::string out = "dataset,method,epsilon,seed";
  for (const auto& name : metric_names()) out += "," + name;
  out += ",receipt_epsilon,receipt_delta,trainer_epsilon,trainer_delta\n";
  for (const auto& c : cells) {
    out += c.dataset + "," + c.method + "," + format_double(c.epsilon) + "," + std::to_string(c.seed);
    for (const auto& name : metric_names()) {
      const auto v = metric_value(c.metrics, name);
      out += "," + (v ? format_double(*v) : std::string("nan"));
    }
    out += "," + format_double(c.receipt.epsilon) + "," + format_double(c.receipt.delta) + "," +
           format_double(c.trainer_budget.epsilon) + "," + format_double(c.trainer_budget.delta) + "\n";
  }
  return out;
}

inline Json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigurationError(source + ": invalid JSON: " + e.what());
  }
}

}  // namespace dpimb::config
