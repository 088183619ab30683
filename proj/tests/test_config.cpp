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
#include <algorithm>
#include <filesystem>
#include <string>

#include "dpimb/config.hpp"
#include "dpimb/io.hpp"
#include "gtest/gtest.h"

namespace dpimb::config {
namespace {

Json minimal() {
  return Json::parse(R"({
    "datasets": [{"name": "mix", "mixture": {"n": 400, "seed": 3}}],
    "methods": ["erm", "oversample+erm"],
    "epsilons": [1.0],
    "seeds": 2
  })");
}

TEST(ConfigTest, ParsesDefaultsAndRoundTrips) {
  const auto f = parse_experiment(minimal());
  EXPECT_EQ(f.datasets.size(), 1u);
  EXPECT_EQ(f.datasets[0].mixture->n, 400);
  EXPECT_EQ(f.delta, 1e-5);
  EXPECT_EQ(f.params.smote_k, 5);
  const Json resolved = experiment_json(f);
  const auto again = parse_experiment(resolved);
  EXPECT_EQ(experiment_json(again), resolved);
}

TEST(ConfigTest, ParsesNestedParams) {
  Json j = minimal();
  j["params"] = Json::parse(R"({
    "erm": {"lambda": 0.05}, "dpsgd": {"policy": "cap", "iterations": 10},
    "bagging": {"m": 5}, "synth": {"mode": "rejection", "count": 100},
    "augment_budget": "unadjusted", "weights_epsilon": 0.1
  })");
  const auto p = parse_experiment(j).params;
  EXPECT_EQ(p.erm.lambda, 0.05);
  EXPECT_EQ(p.dpsgd.policy, StepBudgetPolicy::kCapPerStep);
  EXPECT_EQ(p.dpsgd.iterations, 10);
  EXPECT_EQ(p.bagging_m, 5);
  EXPECT_EQ(p.synth_mode, SamplingMode::kRejection);
  EXPECT_EQ(*p.synth_count, 100);
  EXPECT_EQ(p.augment_budget, AugmentBudgetMode::kUnadjusted);
  EXPECT_EQ(*p.weights_epsilon, 0.1);
  EXPECT_EQ(parse_params(params_json(p), "p").bagging_m, 5);
}

TEST(ConfigTest, RejectsUnknownKeysAndBadValues) {
  Json j = minimal();
  j["epsilonz"] = 1;
  EXPECT_THROW(parse_experiment(j), ConfigurationError);
  j = minimal();
  j["seeds"] = "many";
  EXPECT_THROW(parse_experiment(j), ConfigurationError);
  j = minimal();
  j["methods"] = {"erm", "warp"};
  EXPECT_THROW(parse_experiment(j), InvalidParameter);
  j = minimal();
  j["params"] = Json::parse(R"({"dpsgd": {"policy": "loose"}})");
  EXPECT_THROW(parse_experiment(j), ConfigurationError);
  j = minimal();
  j["datasets"][0] = Json::parse(R"({"name": "x"})");
  EXPECT_THROW(parse_experiment(j), ConfigurationError);
  EXPECT_THROW(parse_json_text("{", "cfg.json"), ConfigurationError);
}

TEST(ConfigTest, BuildsAndReportsExperiment) {
  const auto f = parse_experiment(minimal());
  const auto cfg = build_experiment(f);
  const auto cells = run_experiment(cfg);
  ASSERT_EQ(cells.size(), 4u);
  const Json report = report_json(experiment_json(f), cells, {});
  EXPECT_EQ(report["cells"].size(), 4u);
  EXPECT_EQ(report["summary"].size(), 2u);
  EXPECT_TRUE(report.contains("average_ranks"));
  EXPECT_EQ(report["cells"][0]["receipt"]["epsilon"], 1.0);
  const std::string csv = report_csv(cells);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_EQ(csv.rfind("dataset,method,epsilon,seed,auc", 0), 0u);
}

TEST(ConfigTest, InfiniteEpsilonSerialisesAsNull) {
  const Json b = budget_json(non_private_budget());
  EXPECT_TRUE(b["epsilon"].is_null());
  EXPECT_FALSE(b["private"].get<bool>());
}

TEST(ConfigTest, CsvSourceFlipsAndSubsamples) {
  const auto dir = std::filesystem::temp_directory_path() / "dpimb_test_config";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "d.csv").string();
  std::string text = "x,label\n";
  for (int i = 0; i < 30; ++i) text += std::to_string(i) + "," + (i < 10 ? "0" : "1") + "\n";
  write_file_atomic(path, text);
  Json src = {{"name", "d"}, {"csv", {{"path", path}, {"max_n0", 8}, {"max_n1", 3}, {"bounds", {{"x", {0, 29}}}}}}};
  const auto loaded = load_dataset(parse_dataset_source(src, "ds"));
  EXPECT_EQ(loaded.named.data.n0(), 8u);
  EXPECT_EQ(loaded.named.data.n1(), 3u);
  ASSERT_FALSE(loaded.warnings.empty());
  EXPECT_NE(loaded.warnings[0].find("flipped"), std::string::npos);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace dpimb::config
