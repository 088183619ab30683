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
// Command-line front end for the dpimb library.
//
// Exit codes: 0 success, 1 usage or invalid parameter, 2 data error,
// 3 convergence failure, 4 configuration or budget infeasible.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dpimb/config.hpp"
#include "dpimb/dpimb.hpp"
#include "dpimb/format.hpp"
#include "dpimb/io.hpp"

namespace {

using dpimb::config::Json;

int exit_code(const dpimb::Error& e) {
  switch (e.kind()) {
    case dpimb::ErrorKind::kInvalidParameter:
    case dpimb::ErrorKind::kOutOfRange:
      return 1;
    case dpimb::ErrorKind::kData:
      return 2;
    case dpimb::ErrorKind::kConvergence:
      return 3;
    case dpimb::ErrorKind::kConfiguration:
      return 4;
  }
  return 1;
}

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto pos = text.find(',', start);
    const std::string item = text.substr(start, pos == std::string::npos ? std::string::npos : pos - start);
    double v = 0.0;
    if (!dpimb::parse_double(item, v)) throw dpimb::InvalidParameter(flag + ": '" + item + "' is not a number");
    out.push_back(v);
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::pair<double, double> parse_range(const std::string& text, const std::string& flag) {
  const auto v = parse_list(text, flag);
  if (v.size() != 2 || !(v[1] > v[0])) throw dpimb::InvalidParameter(flag + ": expected 'lo,hi' with lo < hi");
  return {v[0], v[1]};
}

// Writes to path atomically, or to stdout when path is empty.
void emit(const std::string& path, const std::string& content) {
  if (path.empty()) {
    std::cout << content;
  } else {
    dpimb::write_file_atomic(path, content);
  }
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json read_json(const std::string& path) { return dpimb::config::parse_json_text(dpimb::read_file(path), path); }

Json bounds_json(const std::vector<dpimb::FeatureBounds>& bounds) {
  Json out = Json::array();
  for (const auto& b : bounds) out.push_back(Json::array({b.lo, b.hi}));
  return out;
}

Json stats_json(const dpimb::Dataset& ds) {
  return Json{{"n", ds.n()},
              {"d", ds.d()},
              {"n0", ds.n0()},
              {"n1", ds.n1()},
              {"r", dpimb::config::number_or_null(ds.imbalance_ratio())},
              {"feature_names", ds.feature_names},
              {"bounds", bounds_json(ds.bounds)}};
}

Json loaded_stats_json(const dpimb::config::LoadedDataset& loaded) {
  Json j = stats_json(loaded.named.data);
  j["clips"] = Json{{"per_feature", loaded.clips.per_feature}, {"total", loaded.clips.total}};
  j["warnings"] = loaded.warnings;
  return j;
}

// CSV source options shared by the data-reading subcommands.
struct CsvFlags {
  std::string path;
  std::string label_column = "label";
  std::string positive_label;
  std::vector<std::string> bounds;

  void add(CLI::App* cmd) {
    cmd->add_option("--data", path, "Input CSV file")->required();
    cmd->add_option("--label-column", label_column, "Label column name")->capture_default_str();
    cmd->add_option("--positive-label", positive_label, "Label text read as class 1 (default: labels are 0/1)");
    cmd->add_option("--bounds", bounds, "Public feature bounds as name=lo:hi (repeatable)");
  }

  Json to_json() const {
    Json j{{"path", path}, {"label_column", label_column}};
    if (!positive_label.empty()) j["positive_label"] = positive_label;
    if (!bounds.empty()) {
      Json b = Json::object();
      for (const auto& spec : bounds) {
        const auto eq = spec.find('=');
        const auto colon = spec.find(':', eq == std::string::npos ? 0 : eq);
        double lo = 0.0, hi = 0.0;
        if (eq == std::string::npos || colon == std::string::npos ||
            !dpimb::parse_double(std::string_view(spec).substr(eq + 1, colon - eq - 1), lo) ||
            !dpimb::parse_double(std::string_view(spec).substr(colon + 1), hi)) {
          throw dpimb::InvalidParameter("--bounds: expected name=lo:hi, got '" + spec + "'");
        }
        b[spec.substr(0, eq)] = Json::array({lo, hi});
      }
      j["bounds"] = b;
    }
    return j;
  }
};

// Loads a CSV described by a JSON source object (path plus csv options).
dpimb::config::LoadedDataset load_source(const Json& src, const std::string& where) {
  dpimb::config::DatasetSource s;
  s.name = "data";
  s.csv = dpimb::config::parse_csv_source(src, where);
  return dpimb::config::load_dataset(s);
}

// ---------------------------------------------------------------------------
// adjust-eps

struct AdjustFlags {
  int d = 25;
  int k = 5;
  std::int64_t n1 = 100;
  std::int64_t generated = 100;
  double gamma = 0.0;
  std::string eps_list = "1,5,10";
  std::string target_list = "1,5,10";
  std::string out;
};

std::string adjust_row(const std::string& direction, const std::string& variant, double trainer,
                       const dpimb::PrivacyBudget& total, bool vacuous) {
  return direction + "," + variant + "," + dpimb::format_double(trainer) + "," +
         dpimb::format_double(total.epsilon) + "," + dpimb::format_double(total.delta) + "," +
         (vacuous ? "true" : "false") + "\n";
}

void cmd_adjust_eps(const AdjustFlags& f) {
  const dpimb::SmoteAdjustment adj{f.d, f.k, f.n1, f.generated, f.gamma};
  adj.validate();
  const double ceil_ratio = static_cast<double>(adj.replication());
  const double growth = adj.kissing_growth() * ceil_ratio;
  std::string out = "direction,variant,trainer_epsilon,total_epsilon,total_delta,vacuous\n";
  for (double eps : parse_list(f.eps_list, "--eps-list")) {
    if (!(eps > 0.0)) throw dpimb::InvalidParameter("--eps-list: values must be positive");
    out += adjust_row("forward", "oversample", eps, dpimb::oversampling_adjusted_budget({eps, 0.0}, f.generated, f.n1),
                      false);
    out += adjust_row("forward", "smote_pure", eps, {dpimb::smote_adjusted_epsilon_pure(eps, adj), 0.0}, false);
    const auto approx = dpimb::smote_adjusted_budget_approx(eps, adj);
    out += adjust_row("forward", "smote_approx", eps, approx.budget, approx.vacuous);
  }
  for (double target : parse_list(f.target_list, "--target-eps")) {
    if (!(target > 0.0)) throw dpimb::InvalidParameter("--target-eps: values must be positive");
    const double over = target / (ceil_ratio + 1.0);
    out += adjust_row("inverse", "oversample", over, dpimb::oversampling_adjusted_budget({over, 0.0}, f.generated, f.n1),
                      false);
    const double pure = target / (growth + 1.0);
    out += adjust_row("inverse", "smote_pure", pure, {dpimb::smote_adjusted_epsilon_pure(pure, adj), 0.0}, false);
    const double approx_eps = target * f.k / ((1.0 + f.gamma) * growth);
    const auto approx = dpimb::smote_adjusted_budget_approx(approx_eps, adj);
    out += adjust_row("inverse", "smote_approx", approx_eps, approx.budget, approx.vacuous);
  }
  emit(f.out, out);
}

// ---------------------------------------------------------------------------
// run

struct RunFlags {
  std::string config;
  std::string json_out;
  std::string csv_out;
};

void cmd_run(const RunFlags& f) {
  auto file = dpimb::config::parse_experiment(read_json(f.config));
  // Relative CSV paths are read against the config file's directory.
  const auto base = std::filesystem::path(f.config).parent_path();
  for (auto& d : file.datasets) {
    if (d.csv && std::filesystem::path(d.csv->path).is_relative()) d.csv->path = (base / d.csv->path).string();
  }
  if (!f.json_out.empty()) file.output.json = f.json_out;
  if (!f.csv_out.empty()) file.output.csv = f.csv_out;
  std::vector<std::string> warnings;
  const auto cfg = dpimb::config::build_experiment(file, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  const auto cells = dpimb::run_experiment(cfg);
  const std::string csv = dpimb::config::report_csv(cells);
  if (!file.output.json.empty()) {
    dpimb::write_file_atomic(file.output.json,
                             dump(dpimb::config::report_json(dpimb::config::experiment_json(file), cells, warnings)));
  }
  if (!file.output.csv.empty() || file.output.json.empty()) emit(file.output.csv, csv);
}

// ---------------------------------------------------------------------------
// train

struct TrainFlags {
  CsvFlags csv;
  std::string config;
  std::string out;
};

Json linear_json(const dpimb::LinearModel& m) {
  return Json{{"beta", m.beta}, {"intercept", m.intercept}, {"threshold", m.threshold}};
}

void cmd_train(const TrainFlags& f) {
  const Json cfg = read_json(f.config);
  dpimb::config::check_keys(cfg, {"method", "epsilon", "delta", "seed", "params"}, "config");
  const auto method_name = dpimb::config::require<std::string>(cfg, "method", "config");
  const auto method = dpimb::parse_method(method_name);
  const double epsilon = dpimb::config::require<double>(cfg, "epsilon", "config");
  const double delta = dpimb::config::get_or(cfg, "delta", 1e-5, "config");
  const auto seed = dpimb::config::get_or<std::uint64_t>(cfg, "seed", 0, "config");
  const auto params =
      cfg.contains("params") ? dpimb::config::parse_params(cfg.at("params"), "config.params") : dpimb::PipelineParams{};
  if (!(epsilon > 0.0)) throw dpimb::InvalidParameter("config: epsilon must be positive");

  const Json source = f.csv.to_json();
  const auto loaded = load_source(source, "data");
  dpimb::Rng rng(seed);
  const auto run = dpimb::run_pipeline(loaded.named.data, method, epsilon, delta, params, rng);

  Json model{{"scaler", Json{{"bounds", bounds_json(run.scaler.bounds)}, {"radius", run.scaler.radius}}},
             {"feature_names", loaded.named.data.feature_names}};
  if (run.linear) {
    model["kind"] = "linear";
    model["linear"] = linear_json(*run.linear);
  } else {
    model["kind"] = "ensemble";
    Json learners = Json::array();
    for (const auto& m : run.ensemble->learners) learners.push_back(linear_json(m));
    model["learners"] = learners;
  }
  const auto p = run.classifier.predict(loaded.named.data.X);
  const auto fit = dpimb::metrics_from_predictions(p.scores, p.labels, loaded.named.data.y);

  Json resolved{{"data", source},
                {"method", method_name},
                {"epsilon", epsilon},
                {"delta", delta},
                {"seed", seed},
                {"params", dpimb::config::params_json(params)}};
  Json out{{"config", resolved},
           {"dataset", loaded_stats_json(loaded)},
           {"model", model},
           {"receipt", dpimb::config::budget_json(run.receipt)},
           {"trainer_budget", dpimb::config::budget_json(run.trainer_budget)},
           {"certificate", Json{{"gradient_norm", run.gradient_norm}, {"iterations", run.iterations}}},
           {"training_metrics", dpimb::config::metrics_json(fit)}};
  emit(f.out, dump(out));
}

// Rebuilds the classifier stored by `train`.
dpimb::Classifier classifier_from_json(const Json& doc) {
  try {
    const Json& m = doc.at("model");
    dpimb::FeatureScaler scaler;
    for (const auto& b : m.at("scaler").at("bounds")) scaler.bounds.push_back({b.at(0).get<double>(), b.at(1).get<double>()});
    scaler.radius = m.at("scaler").at("radius").get<double>();
    auto linear = [](const Json& j) {
      dpimb::LinearModel lm;
      lm.beta = j.at("beta").get<std::vector<double>>();
      lm.intercept = j.at("intercept").get<double>();
      lm.threshold = j.at("threshold").get<double>();
      return lm;
    };
    if (m.at("kind").get<std::string>() == "linear") return dpimb::make_classifier(scaler, linear(m.at("linear")));
    dpimb::BaggingEnsemble e;
    for (const auto& l : m.at("learners")) e.learners.push_back(linear(l));
    return dpimb::make_classifier(scaler, e);
  } catch (const nlohmann::json::exception& e) {
    throw dpimb::ConfigurationError(std::string("model file: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// boundary

struct BoundaryFlags {
  std::string model;
  std::string x_range;
  std::string y_range;
  std::size_t nx = 50;
  std::size_t ny = 50;
  std::string out;
};

void cmd_boundary(const BoundaryFlags& f) {
  const Json doc = read_json(f.model);
  const auto clf = classifier_from_json(doc);
  if (clf.d != 2) throw dpimb::InvalidParameter("boundary: the model must have exactly 2 features");
  const auto& bounds = doc.at("model").at("scaler").at("bounds");
  const auto xr = f.x_range.empty() ? std::pair{bounds[0][0].get<double>(), bounds[0][1].get<double>()}
                                    : parse_range(f.x_range, "--x-range");
  const auto yr = f.y_range.empty() ? std::pair{bounds[1][0].get<double>(), bounds[1][1].get<double>()}
                                    : parse_range(f.y_range, "--y-range");
  const auto grid = dpimb::boundary_grid(clf, xr, yr, f.nx, f.ny);
  std::string out = "x,y,score,label\n";
  for (const auto& g : grid) {
    out += dpimb::format_double(g.x) + "," + dpimb::format_double(g.y) + "," + dpimb::format_double(g.score) + "," +
           std::to_string(g.label) + "\n";
  }
  emit(f.out, out);
}

// ---------------------------------------------------------------------------
// synth

struct SynthFlags {
  CsvFlags csv;
  std::string config;
  std::string out;
  std::string receipt;
};

void cmd_synth(const SynthFlags& f) {
  const Json cfg = read_json(f.config);
  dpimb::config::check_keys(cfg, {"epsilon", "bins", "count", "mode", "seed"}, "config");
  const double epsilon = dpimb::config::require<double>(cfg, "epsilon", "config");
  const int bins = dpimb::config::get_or(cfg, "bins", 10, "config");
  const auto mode = dpimb::config::parse_sampling_mode(
      dpimb::config::get_or<std::string>(cfg, "mode", "conditional", "config"), "config");
  const auto seed = dpimb::config::get_or<std::uint64_t>(cfg, "seed", 0, "config");

  const Json source = f.csv.to_json();
  const auto loaded = load_source(source, "data");
  const auto& ds = loaded.named.data;
  const auto count =
      dpimb::config::get_or<std::int64_t>(cfg, "count", 2 * static_cast<std::int64_t>(ds.n0()), "config");
  dpimb::Rng rng(seed);
  const auto model = dpimb::fit_marginal_synth(ds, dpimb::Discretizer(ds.bounds, bins), {epsilon, 0.0}, rng);
  dpimb::SamplingStats stats;
  dpimb::Dataset balanced = dpimb::balance_with_synth(model, count, mode, rng, &stats);
  balanced.feature_names = ds.feature_names;

  Json resolved{{"data", source}, {"epsilon", epsilon}, {"bins", bins}, {"count", count},
                {"mode", dpimb::config::sampling_mode_name(mode)}, {"seed", seed}};
  Json receipt{{"config", resolved},
               {"input", loaded_stats_json(loaded)},
               {"output", stats_json(balanced)},
               {"sampling", Json{{"draws", stats.draws}, {"discarded", stats.discarded}}},
               {"receipt", dpimb::config::budget_json(model.budget_spent)}};
  emit(f.out, dpimb::csv_string(balanced, f.csv.label_column));
  if (!f.receipt.empty()) dpimb::write_file_atomic(f.receipt, dump(receipt));
}

// ---------------------------------------------------------------------------
// preprocess

struct PreprocessFlags {
  CsvFlags csv;
  std::string method = "smote";
  std::optional<std::int64_t> count;
  int k = 5;
  std::uint64_t seed = 0;
  std::optional<double> epsilon;
  std::string out;
  std::string report;
};

void cmd_preprocess(const PreprocessFlags& f) {
  const Json source = f.csv.to_json();
  const auto loaded = load_source(source, "data");
  const auto& ds = loaded.named.data;
  const auto n1 = static_cast<std::int64_t>(ds.n1());
  const auto count = f.count.value_or(std::max<std::int64_t>(0, static_cast<std::int64_t>(ds.n0()) - n1));
  dpimb::Rng rng(f.seed);
  dpimb::Dataset out;
  double factor = 1.0;
  if (f.method == "none") {
    out = ds;
  } else if (f.method == "oversample") {
    out = dpimb::oversample_deterministic(ds, count);
    factor = static_cast<double>(dpimb::replication_factor(count, n1)) + 1.0;
  } else if (f.method == "smote") {
    out = dpimb::smote_augment(ds, count, f.k, rng);
    factor = dpimb::smote_adjusted_epsilon_pure(1.0, {static_cast<int>(ds.d()), f.k, n1, count, 0.0});
  } else {
    throw dpimb::InvalidParameter("--method must be none, oversample or smote");
  }

  Json resolved{{"data", source}, {"method", f.method}, {"count", count}, {"k", f.k}, {"seed", f.seed}};
  Json adjustment{{"epsilon_factor", factor}};
  if (f.epsilon) {
    resolved["epsilon"] = *f.epsilon;
    adjustment["trainer_epsilon"] = *f.epsilon;
    adjustment["pipeline_epsilon"] = *f.epsilon * factor;
  }
  Json report{{"config", resolved},
              {"input", loaded_stats_json(loaded)},
              {"output", stats_json(out)},
              {"budget_adjustment", adjustment}};
  emit(f.out, dpimb::csv_string(out, f.csv.label_column));
  if (!f.report.empty()) dpimb::write_file_atomic(f.report, dump(report));
}

// ---------------------------------------------------------------------------
// warmup-sim

struct WarmupFlags {
  std::string spec;
  std::optional<std::uint64_t> seed;
  std::string out_csv;
  std::string out_json;
};

void cmd_warmup_sim(const WarmupFlags& f) {
  using dpimb::config::get_or;
  const Json j = f.spec.empty() ? Json::object() : read_json(f.spec);
  dpimb::config::check_keys(j, {"mu0", "mu1", "sigma", "r_star", "B", "R", "gammas", "n", "batches", "seed", "coverage"},
                            "spec");
  dpimb::analytic::MixtureSpec spec;
  spec.mu0 = get_or(j, "mu0", spec.mu0, "spec");
  spec.mu1 = get_or(j, "mu1", spec.mu1, "spec");
  spec.sigma = get_or(j, "sigma", spec.sigma, "spec");
  spec.r_star = get_or(j, "r_star", spec.r_star, "spec");
  spec.B = get_or(j, "B", spec.B, "spec");
  spec.R = get_or(j, "R", spec.R, "spec");
  spec.validate();
  const auto gammas = get_or(j, "gammas", std::vector<double>{0.25, 0.5, 0.75}, "spec");
  const auto n = get_or<std::int64_t>(j, "n", 1000000, "spec");
  const int batches = get_or(j, "batches", 50, "spec");
  const auto seed = f.seed.value_or(get_or<std::uint64_t>(j, "seed", 0, "spec"));

  Json resolved{{"mu0", spec.mu0}, {"mu1", spec.mu1}, {"sigma", spec.sigma}, {"r_star", spec.r_star},
                {"B", spec.B},     {"R", spec.R},     {"gammas", gammas},     {"n", n},
                {"batches", batches}, {"seed", seed}};

  std::string csv = "gamma,metric,tabulated,population,simulated,standard_error,gap_tabulated,gap_population\n";
  double max_tab = 0.0, max_pop = 0.0;
  for (std::size_t g = 0; g < gammas.size(); ++g) {
    dpimb::Rng rng(dpimb::derive_seed(seed, {1, g}));
    const auto a = dpimb::analytic::analytic_metrics(spec, gammas[g]);
    const auto s = dpimb::analytic::simulate_metrics(spec, gammas[g], n, rng, batches);
    if (!s.defined) throw dpimb::InvalidParameter("warmup-sim: n too small, a class received no draws");
    const struct {
      const char* name;
      double tab, pop, sim, se;
    } rows[] = {
        {"recall", a.tabulated.recall, a.population.recall, s.value.recall, s.standard_error.recall},
        {"precision", a.tabulated.precision, a.population.precision, s.value.precision, s.standard_error.precision},
        {"balanced_accuracy", a.tabulated.balanced_accuracy, a.population.balanced_accuracy,
         s.value.balanced_accuracy, s.standard_error.balanced_accuracy},
        {"f1", a.tabulated.f1, a.population.f1, s.value.f1, s.standard_error.f1},
    };
    for (const auto& r : rows) {
      const double gt = std::abs(r.tab - r.sim), gp = std::abs(r.pop - r.sim);
      max_tab = std::max(max_tab, gt);
      max_pop = std::max(max_pop, gp);
      csv += dpimb::format_double(gammas[g]) + "," + r.name + "," + dpimb::format_double(r.tab) + "," +
             dpimb::format_double(r.pop) + "," + dpimb::format_double(r.sim) + "," + dpimb::format_double(r.se) + "," +
             dpimb::format_double(gt) + "," + dpimb::format_double(gp) + "\n";
    }
  }
  Json report{{"config", resolved}, {"max_abs_gap", Json{{"tabulated", max_tab}, {"population", max_pop}}}};

  if (j.contains("coverage")) {
    const Json& c = j.at("coverage");
    dpimb::config::check_keys(c, {"n", "epsilon", "delta", "beta", "trials"}, "spec.coverage");
    const auto cn = get_or<std::int64_t>(c, "n", 10000, "spec.coverage");
    const dpimb::PrivacyBudget budget{get_or(c, "epsilon", 0.5, "spec.coverage"),
                                      get_or(c, "delta", 1e-5, "spec.coverage")};
    const double beta = get_or(c, "beta", 0.1, "spec.coverage");
    const int trials = get_or(c, "trials", 1000, "spec.coverage");
    if (trials < 1) throw dpimb::InvalidParameter("spec.coverage: trials must be positive");
    dpimb::Rng rng(dpimb::derive_seed(seed, {2}));
    const double theta = 0.5 * (spec.mu0 + spec.mu1);
    double bound = 0.0;
    int exceed = 0;
    for (int t = 0; t < trials; ++t) {
      const auto ds = dpimb::analytic::sample_mixture_1d(spec, cn, rng);
      if (t == 0) {
        const double n0 = static_cast<double>(ds.n0());
        bound = dpimb::analytic::boc_error_bound(spec, n0, n0 / static_cast<double>(ds.n1()), budget, beta);
      }
      const auto boc = dpimb::analytic::private_boc(ds, spec, budget, rng);
      exceed += std::abs(boc.classifier.theta - theta) > bound;
    }
    report["coverage"] = Json{{"n", cn},
                              {"budget", dpimb::config::budget_json(budget)},
                              {"beta", beta},
                              {"trials", trials},
                              {"bound", bound},
                              {"exceed_fraction", static_cast<double>(exceed) / trials},
                              {"within_beta", static_cast<double>(exceed) / trials <= beta}};
    report["receipt"] = dpimb::config::budget_json({2 * budget.epsilon, 2 * budget.delta});
  }
  emit(f.out_csv, csv);
  if (!f.out_json.empty()) dpimb::write_file_atomic(f.out_json, dump(report));
}

// ---------------------------------------------------------------------------
// bagging-audit

struct BaggingFlags {
  std::int64_t n = 0;
  std::optional<double> c;
  std::optional<std::int64_t> m;
  std::optional<std::int64_t> k_sub;
  std::string out;
};

void cmd_bagging_audit(const BaggingFlags& f) {
  if (f.n < 2) throw dpimb::InvalidParameter("--n must be at least 2");
  const double inv_n = 1.0 / static_cast<double>(f.n);
  std::string out = "n = " + std::to_string(f.n) + "\n";
  double mk = 0.0;
  if (f.c) {
    if (f.m || f.k_sub) throw dpimb::InvalidParameter("give either --c or --m with --k-sub");
    mk = dpimb::bagging_inverted_mk(f.n, *f.c);
    out += "target delta = n^-c = " + dpimb::format_double(std::pow(static_cast<double>(f.n), -*f.c)) +
           " (c = " + dpimb::format_double(*f.c) + ")\n";
    out += "inverted m*k = " + dpimb::format_double(mk) + "\n";
  } else {
    if (!f.m || !f.k_sub) throw dpimb::InvalidParameter("give either --c or --m with --k-sub");
    const auto b = dpimb::bagging_intrinsic_budget({*f.m, *f.k_sub, f.n});
    (void)b;
    mk = static_cast<double>(*f.m) * static_cast<double>(*f.k_sub);
    out += "m*k = " + dpimb::format_double(mk) + "\n";
  }
  const auto budget = dpimb::bagging_budget_for_product(mk, f.n);
  const bool ok = budget.epsilon <= inv_n;
  out += std::string("verdict: epsilon <= 1/n = ") + dpimb::format_double(inv_n) + (ok ? " holds" : " fails") + "\n";
  out += "epsilon = " + dpimb::format_double(budget.epsilon) + "\n";
  out += "delta = " + dpimb::format_double(budget.delta) + "\n";
  emit(f.out, out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private imbalanced binary classification"};
  app.require_subcommand(1);
  std::function<void()> action;

  AdjustFlags adjust;
  auto* a = app.add_subcommand("adjust-eps", "Privacy budget adjustments for oversampling and SMOTE");
  a->add_option("--d", adjust.d, "Data dimension")->capture_default_str();
  a->add_option("--k", adjust.k, "SMOTE neighbours")->capture_default_str();
  a->add_option("--n1", adjust.n1, "Minority count")->capture_default_str();
  a->add_option("--N", adjust.generated, "Generated points")->capture_default_str();
  a->add_option("--gamma", adjust.gamma, "Chernoff slack")->capture_default_str();
  a->add_option("--eps-list", adjust.eps_list, "Trainer epsilons to inflate")->capture_default_str();
  a->add_option("--target-eps", adjust.target_list, "Pipeline epsilons to deflate")->capture_default_str();
  a->add_option("--out", adjust.out, "Output CSV (default stdout)");
  a->callback([&] { action = [&] { cmd_adjust_eps(adjust); }; });

  RunFlags run;
  auto* r = app.add_subcommand("run", "Run an experiment grid from a JSON config");
  r->add_option("--config", run.config, "Experiment JSON")->required()->check(CLI::ExistingFile);
  r->add_option("--json", run.json_out, "JSON report path (overrides the config)");
  r->add_option("--csv", run.csv_out, "CSV report path (overrides the config)");
  r->callback([&] { action = [&] { cmd_run(run); }; });

  TrainFlags train;
  auto* t = app.add_subcommand("train", "Train one pipeline on a CSV and write the model");
  train.csv.add(t);
  t->add_option("--config", train.config, "Training JSON (method, epsilon, delta, seed, params)")
      ->required()
      ->check(CLI::ExistingFile);
  t->add_option("--out", train.out, "Model JSON (default stdout)");
  t->callback([&] { action = [&] { cmd_train(train); }; });

  SynthFlags synth;
  auto* s = app.add_subcommand("synth", "Balance a CSV with private marginal synthetic data");
  synth.csv.add(s);
  s->add_option("--config", synth.config, "Synth JSON (epsilon, bins, count, mode, seed)")
      ->required()
      ->check(CLI::ExistingFile);
  s->add_option("--out", synth.out, "Balanced CSV (default stdout)");
  s->add_option("--receipt", synth.receipt, "Budget receipt JSON");
  s->callback([&] { action = [&] { cmd_synth(synth); }; });

  PreprocessFlags pre;
  auto* p = app.add_subcommand("preprocess", "Oversample or SMOTE a CSV and report the budget factor");
  pre.csv.add(p);
  p->add_option("--method", pre.method, "none, oversample or smote")->capture_default_str();
  p->add_option("--count", pre.count, "Generated rows (default n0 - n1)");
  p->add_option("--k", pre.k, "SMOTE neighbours")->capture_default_str();
  p->add_option("--seed", pre.seed, "Random seed")->capture_default_str();
  p->add_option("--epsilon", pre.epsilon, "Trainer epsilon to inflate in the report");
  p->add_option("--out", pre.out, "Augmented CSV (default stdout)");
  p->add_option("--report", pre.report, "Report JSON");
  p->callback([&] { action = [&] { cmd_preprocess(pre); }; });

  WarmupFlags warm;
  auto* w = app.add_subcommand("warmup-sim", "Analytic vs simulated metrics of the 1-d threshold classifier");
  w->add_option("--spec", warm.spec, "Spec JSON (defaults when omitted)")->check(CLI::ExistingFile);
  w->add_option("--seed", warm.seed, "Seed override");
  w->add_option("--out", warm.out_csv, "Table CSV (default stdout)");
  w->add_option("--report", warm.out_json, "Report JSON");
  w->callback([&] { action = [&] { cmd_warmup_sim(warm); }; });

  BaggingFlags bag;
  auto* b = app.add_subcommand("bagging-audit", "Intrinsic privacy of bagging");
  b->add_option("--n", bag.n, "Dataset size")->required();
  b->add_option("--c", bag.c, "Target delta exponent, delta = n^-c");
  b->add_option("--m", bag.m, "Base models");
  b->add_option("--k-sub", bag.k_sub, "Subsample size");
  b->add_option("--out", bag.out, "Output file (default stdout)");
  b->callback([&] { action = [&] { cmd_bagging_audit(bag); }; });

  BoundaryFlags bound;
  auto* g = app.add_subcommand("boundary", "Decision grid of a trained 2-feature model");
  g->add_option("--model", bound.model, "Model JSON from train")->required()->check(CLI::ExistingFile);
  g->add_option("--x-range", bound.x_range, "lo,hi (default: feature bounds)");
  g->add_option("--y-range", bound.y_range, "lo,hi (default: feature bounds)");
  g->add_option("--nx", bound.nx, "Cells along x")->capture_default_str();
  g->add_option("--ny", bound.ny, "Cells along y")->capture_default_str();
  g->add_option("--out", bound.out, "Grid CSV (default stdout)");
  g->callback([&] { action = [&] { cmd_boundary(bound); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  try {
    action();
  } catch (const dpimb::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
