// Copyright 2026 The Hy-Q Lab Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hyq/harness.h"

namespace hyq {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string ReadFile(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json HardInstanceDoc() {
  return json::parse(R"({
    "id": "hard",
    "env": {"kind": "hard_instance", "variant": "M1"},
    "dataset": {"kind": "hard_instance", "m_off": 20},
    "algorithm": {"kind": "hyq", "T": 10, "m_on": 1,
                  "function_class": {"kind": "tabular", "unvisited": "optimistic"},
                  "tie_break": {"kind": "adversarial", "adversary": {"hard_instance": {"A": "R", "C": "L"}}}},
    "replicate_seeds": [0, 1, 2, 3, 4]
  })");
}

std::string ConfigErrorOf(const json& doc) {
  try {
    ParseExperimentConfig(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("hyq_harness_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

TEST(Config, ParsesHardInstance) {
  const ExperimentConfig c = ParseExperimentConfig(HardInstanceDoc());
  EXPECT_EQ(c.id, "hard");
  EXPECT_EQ(c.output_dir, "hard");
  EXPECT_EQ(c.env.kind, EnvKind::kHardInstance);
  EXPECT_EQ(c.env.horizon, 2);
  EXPECT_EQ(c.dataset.m_off, 20);
  EXPECT_EQ(c.algorithm.hyq.T, 10);
  EXPECT_EQ(c.algorithm.hyq.function_class.unvisited, UnvisitedFill::kOptimistic);
  ASSERT_TRUE(c.algorithm.hyq.tie_break.adversary);
  EXPECT_EQ(*c.algorithm.hyq.tie_break.adversary, HardInstancePolicy(kActionR, kActionL));
  EXPECT_EQ(c.replicate_seeds.size(), 5u);
}

TEST(Config, ErrorsNameTheField) {
  json d = HardInstanceDoc();
  d["algorithm"]["T"] = "ten";
  EXPECT_NE(ConfigErrorOf(d).find("algorithm.T"), std::string::npos);

  d = HardInstanceDoc();
  d["algorithm"]["function_class"]["kind"] = "mlp";
  EXPECT_NE(ConfigErrorOf(d).find("algorithm.function_class.kind"), std::string::npos);

  d = HardInstanceDoc();
  d["env"]["colour"] = 1;
  EXPECT_NE(ConfigErrorOf(d).find("env.colour: unknown field"), std::string::npos);

  d = HardInstanceDoc();
  d["replicate_seeds"] = json::array();
  EXPECT_NE(ConfigErrorOf(d).find("replicate_seeds"), std::string::npos);

  d = HardInstanceDoc();
  d["replicate_seeds"][2] = -1;
  EXPECT_NE(ConfigErrorOf(d).find("replicate_seeds[2]"), std::string::npos);

  d = HardInstanceDoc();
  d["algorithm"]["tie_break"]["adversary"]["hard_instance"]["A"] = "X";
  EXPECT_NE(ConfigErrorOf(d).find("algorithm.tie_break.adversary.hard_instance.A"), std::string::npos);

  d = HardInstanceDoc();
  d.erase("id");
  EXPECT_NE(ConfigErrorOf(d).find("id: missing"), std::string::npos);

  d = HardInstanceDoc();
  d["dataset"]["kind"] = "expert";
  EXPECT_NE(ConfigErrorOf(d).find("dataset.kind"), std::string::npos);

  d = HardInstanceDoc();
  d["algorithm"]["function_class"]["kind"] = "locknet";
  EXPECT_NE(ConfigErrorOf(d).find("comb_lock"), std::string::npos);
}

TEST(Config, LoadReportsMissingFileAndBadJson) {
  EXPECT_THROW(LoadExperimentConfig("/nonexistent/config.json"), ConfigError);
  const fs::path p = fs::temp_directory_path() / "hyq_bad_config.json";
  std::ofstream(p) << "{ not json";
  EXPECT_THROW(LoadExperimentConfig(p.string()), ConfigError);
  fs::remove(p);
}

TEST(Config, ToJsonRoundTripsThroughRunEcho) {
  const ExperimentConfig c = ParseExperimentConfig(HardInstanceDoc());
  const json j = ToJson(c);
  EXPECT_EQ(j["env"]["kind"], "hard_instance");
  EXPECT_EQ(j["algorithm"]["hyq"]["tie_break"]["kind"], "adversarial");
}

TEST(Quantile, LinearInterpolation) {
  EXPECT_DOUBLE_EQ(Quantile({1, 2, 3, 4, 5}, 0.5), 3.0);
  EXPECT_DOUBLE_EQ(Quantile({5, 1, 4, 2, 3}, 0.2), 1.8);
  EXPECT_DOUBLE_EQ(Quantile({1, 2, 3, 4, 5}, 0.8), 4.2);
  EXPECT_DOUBLE_EQ(Quantile({7}, 0.2), 7.0);
  EXPECT_DOUBLE_EQ(Quantile({0, 10}, 0.25), 2.5);
  EXPECT_THROW(Quantile({}, 0.5), std::invalid_argument);
}

TEST(Aggregate, SingleReplicateIsItsCurve) {
  RunRecord r;
  r.rows = {{0, 0, 5, 0.1, 0, 0}, {1, 10, 5, 0.4, 0, 0}};
  const AggregateCurve c = Aggregate(std::span(&r, 1));
  ASSERT_EQ(c.points.size(), 2u);
  EXPECT_EQ(c.points[1].x, 15.0);
  EXPECT_EQ(c.points[1].median, 0.4);
  EXPECT_EQ(c.points[1].p20, 0.4);
  EXPECT_EQ(c.points[1].p80, 0.4);
}

TEST(Aggregate, OrderedQuantilesAndTruncation) {
  Rng rng = MakeRng(1);
  std::vector<RunRecord> recs(5);
  for (size_t i = 0; i < recs.size(); ++i) {
    for (int t = 0; t < 10 - static_cast<int>(i); ++t) {
      recs[i].rows.push_back({t, t * 10L, 0, Uniform01(rng), 0, 0});
    }
  }
  const AggregateCurve c = Aggregate(recs);
  EXPECT_EQ(c.points.size(), 6u);
  for (const AggregatePoint& p : c.points) {
    EXPECT_LE(p.p20, p.median);
    EXPECT_LE(p.median, p.p80);
  }
  const AggregateCurve back = AggregateFromCsv(AggregateToCsv(c));
  ASSERT_EQ(back.points.size(), c.points.size());
  for (size_t i = 0; i < c.points.size(); ++i) {
    EXPECT_EQ(back.points[i].median, c.points[i].median);
    EXPECT_EQ(back.points[i].p80, c.points[i].p80);
  }
  EXPECT_THROW(AggregateFromCsv("x,median\n1,2\n"), std::invalid_argument);
}

TEST_F(TempDir, RunExperimentWritesArtifacts) {
  const ExperimentConfig c = ParseExperimentConfig(HardInstanceDoc());
  const ExperimentResult r = run_experiment(c, dir_.string());
  EXPECT_EQ(r.records.size(), 5u);
  for (uint64_t s = 0; s < 5; ++s) EXPECT_TRUE(fs::exists(dir_ / "hard" / ("replicate_" + std::to_string(s) + ".csv")));
  EXPECT_TRUE(fs::exists(dir_ / "hard" / "aggregate.csv"));
  const json echo = json::parse(ReadFile(dir_ / "hard" / "config.json"));
  EXPECT_EQ(echo["tool_version"], kToolVersion);
  for (const RunRecord& rec : r.records) EXPECT_EQ(rec.final_return(), 1.0);
  EXPECT_EQ(r.aggregate.points.front().median, 0.0);
}

TEST_F(TempDir, RerunIsByteIdentical) {
  json d = json::parse(R"({
    "id": "lock", "env": {"kind": "comb_lock", "horizon": 4},
    "dataset": {"kind": "optimal_trajectory", "m_off": 30},
    "algorithm": {"kind": "hyq", "variant": "vtype", "T": 3, "m_on": 5,
                  "function_class": {"kind": "locknet", "n_updates": 10, "batch_size": 16},
                  "eval": {"kind": "monte_carlo", "n_episodes": 10}},
    "replicate_seeds": [3, 4]})");
  const ExperimentConfig c = ParseExperimentConfig(d);
  run_experiment(c, (dir_ / "a").string());
  run_experiment(c, (dir_ / "b").string());
  for (const char* f : {"replicate_3.csv", "replicate_4.csv", "aggregate.csv", "config.json"}) {
    EXPECT_EQ(ReadFile(dir_ / "a" / "lock" / f), ReadFile(dir_ / "b" / "lock" / f)) << f;
  }
}

TEST(RunReplicate, Baselines) {
  json d = HardInstanceDoc();
  d["algorithm"] = json::parse(R"({"kind": "offline_fqi", "n_sweeps": 1,
      "function_class": {"kind": "tabular", "unvisited": "optimistic"},
      "tie_break": {"kind": "adversarial", "adversary": {"hard_instance": {"A": "R", "C": "L"}}}})");
  const RunRecord fqi = RunReplicate(ParseExperimentConfig(d), 0);
  ASSERT_EQ(fqi.rows.size(), 1u);
  EXPECT_EQ(fqi.final_return(), 0.0);
  EXPECT_EQ(fqi.rows[0].offline_samples, 40);

  d["algorithm"] = json::parse(R"({"kind": "behavior_cloning", "mode": "tabular"})");
  const RunRecord bc = RunReplicate(ParseExperimentConfig(d), 0);
  EXPECT_EQ(bc.rows.size(), 1u);

  d["algorithm"] = json::parse(R"({"kind": "online_fqi", "T": 10, "function_class": {"unvisited": "optimistic"}})");
  EXPECT_EQ(RunReplicate(ParseExperimentConfig(d), 0).final_return(), 1.0);

  d["algorithm"] = json::parse(R"({"kind": "hyq_discounted", "total_steps": 200})");
  EXPECT_FALSE(RunReplicate(ParseExperimentConfig(d), 0).rows.empty());
}

TEST(RunReplicate, OtherEnvironments) {
  json d = json::parse(R"({
    "id": "lr", "env": {"kind": "low_rank", "horizon": 3, "n_states": 5, "n_actions": 3, "rank": 2, "seed": 1},
    "dataset": {"kind": "from_distribution", "m_off": 500},
    "algorithm": {"kind": "hyq", "T": 3, "m_on": 10, "function_class": {"kind": "linear", "features": "low_rank"}},
    "replicate_seeds": [0]})");
  EXPECT_EQ(RunReplicate(ParseExperimentConfig(d), 0).rows.size(), 4u);
  d["env"] = json::parse(R"({"kind": "random_tabular", "horizon": 3, "n_states": 4, "n_actions": 2})");
  d["algorithm"]["function_class"] = json::parse(R"({"kind": "tabular"})");
  EXPECT_EQ(RunReplicate(ParseExperimentConfig(d), 0).rows.size(), 4u);
}

TEST_F(TempDir, PropertySuitePassesAndEchoesSeed) {
  PropertyOptions o;
  o.corpus = 200;
  o.seed = 42;
  o.output_dir = dir_.string();
  const PropertyReport r = run_property_suite(o);
  EXPECT_TRUE(r.passed);
  EXPECT_EQ(r.seed, 42u);
  EXPECT_EQ(ToJson(r)["seed"], 42);
  for (const PropertyCheck& c : r.checks) {
    if (!c.informational) EXPECT_EQ(c.failures, 0) << c.name;
  }
}

TEST_F(TempDir, InjectedFaultFailsWithReproducer) {
  PropertyOptions o;
  o.corpus = 20;
  o.inject_fault = true;
  o.output_dir = dir_.string();
  const PropertyReport r = run_property_suite(o);
  EXPECT_FALSE(r.passed);
  const fs::path repro = dir_ / "reproducer_performance_difference_equality.json";
  ASSERT_TRUE(fs::exists(repro));
  const json j = json::parse(ReadFile(repro));
  EXPECT_TRUE(j.contains("mdp"));
  EXPECT_TRUE(j.contains("f"));
  EXPECT_NO_THROW(MdpFromJson(j["mdp"]));
}

TEST(Plot, EmptyAggregateDrawsAxes) {
  const std::string svg = PlotSvg({}, {});
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  EXPECT_NE(svg.find("no data"), std::string::npos);
  EXPECT_EQ(svg.find("<polyline"), std::string::npos);
}

TEST(Plot, SinglePointIsMarker) {
  AggregateCurve c;
  c.points.push_back({100, 0.5, 0.4, 0.6});
  const std::string svg = PlotSvg(c, {});
  EXPECT_NE(svg.find("<circle"), std::string::npos);
  EXPECT_EQ(svg.find("<polyline"), std::string::npos);
}

TEST(Plot, MatchesGolden) {
  AggregateCurve c;
  for (int i = 0; i <= 10; ++i) {
    const double m = std::min(1.0, i * 0.12);
    c.points.push_back({20000.0 + 27500.0 * i, m, std::max(0.0, m - 0.1), std::min(1.0, m + 0.05)});
  }
  const std::vector<BaselineLine> b = {{"BC", 0.1}, {"offline FQI", 0.1}};
  const std::string svg = PlotSvg(c, b);
  EXPECT_NE(svg.find("stroke-dasharray"), std::string::npos);
  const std::string golden = ReadFile(fs::path(HYQ_GOLDEN_DIR) / "plot.svg");
  EXPECT_EQ(svg, golden);
}

int RunCli(const std::string& args, const fs::path& root) {
  const std::string cmd = "HYQ_OUTPUT_ROOT='" + root.string() + "' '" + HYQ_CLI_PATH + "' " + args +
                          " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST_F(TempDir, CliExitCodes) {
  const fs::path cfg = dir_ / "c.json";
  std::ofstream(cfg) << HardInstanceDoc().dump();
  EXPECT_EQ(RunCli("run " + cfg.string(), dir_), 0);
  EXPECT_TRUE(fs::exists(dir_ / "hard" / "aggregate.csv"));

  json bad = HardInstanceDoc();
  bad["algorithm"]["m_on"] = 0;
  std::ofstream(dir_ / "bad.json") << bad.dump();
  EXPECT_EQ(RunCli("run " + (dir_ / "bad.json").string(), dir_), 2);
  EXPECT_EQ(RunCli("run " + (dir_ / "missing.json").string(), dir_), 2);
  EXPECT_EQ(RunCli("bogus", dir_), 2);

  EXPECT_EQ(RunCli("props --corpus 30 --seed 3", dir_), 0);
  EXPECT_TRUE(fs::exists(dir_ / "props" / "report.json"));
  EXPECT_EQ(RunCli("props --corpus 5 --inject-fault", dir_), 1);

  const fs::path agg = dir_ / "hard" / "aggregate.csv";
  EXPECT_EQ(RunCli("plot " + agg.string() + " --baseline BC=0.1 --baseline FQI=0.0 -o " +
                       (dir_ / "p.svg").string(), dir_), 0);
  EXPECT_TRUE(fs::exists(dir_ / "p.svg"));
  EXPECT_EQ(RunCli("plot " + agg.string() + " --baseline BC -o " + (dir_ / "q.svg").string(), dir_), 2);
}

}  // namespace
}  // namespace hyq
