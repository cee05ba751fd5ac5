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

// hyq_cli run <config.json>
// hyq_cli props [--corpus N] [--seed S]
// hyq_cli plot <aggregate.csv> [--baseline name=value ...] -o out.svg
//
// Exit codes: 0 ok, 1 property or replicate failure, 2 bad config/arguments.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "hyq/format.h"
#include "hyq/harness.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;

int Run(const std::string& config_path) {
  hyq::ExperimentConfig config;
  try {
    config = hyq::LoadExperimentConfig(config_path);
  } catch (const hyq::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  const std::string root = hyq::OutputRootFromEnv();
  try {
    const hyq::ExperimentResult result = hyq::run_experiment(config, root);
    for (size_t i = 0; i < result.records.size(); ++i) {
      const hyq::RunRecord& r = result.records[i];
      std::cout << "seed " << config.replicate_seeds[i] << ": final return "
                << hyq::FormatDouble(r.final_return()) << " after "
                << (r.rows.empty() ? 0 : r.rows.back().samples()) << " samples\n";
      if (r.empty_offline_warning) std::cerr << "warning: empty offline dataset\n";
    }
    for (const std::string& f : result.written_files) std::cout << "wrote " << f << "\n";
  } catch (const hyq::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

int Props(int corpus, uint64_t seed, bool inject_fault) {
  hyq::PropertyOptions opts;
  opts.corpus = corpus;
  opts.seed = seed;
  opts.inject_fault = inject_fault;
  opts.output_dir = (std::filesystem::path(hyq::OutputRootFromEnv()) / "props").string();
  const hyq::PropertyReport report = hyq::run_property_suite(opts);
  for (const hyq::PropertyCheck& c : report.checks) {
    std::printf("%-36s %s  %d/%d failed  worst %.3e%s\n", c.name.c_str(),
                c.failures == 0 ? "PASS" : (c.informational ? "INFO" : "FAIL"), c.failures,
                c.cases, c.worst, c.informational ? "  (informational)" : "");
  }
  std::filesystem::create_directories(opts.output_dir);
  const std::string path = (std::filesystem::path(opts.output_dir) / "report.json").string();
  std::ofstream(path) << hyq::ToJson(report).dump(2) << "\n";
  for (const std::string& r : report.reproducers) std::cout << "reproducer " << r << "\n";
  std::cout << (report.passed ? "all properties hold" : "property failures") << "\n";
  return report.passed ? kExitOk : kExitFailure;
}

int Plot(const std::string& csv_path, const std::vector<std::string>& baseline_args,
         const std::string& out_path) {
  std::vector<hyq::BaselineLine> baselines;
  for (const std::string& arg : baseline_args) {
    const size_t eq = arg.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::cerr << "--baseline expects name=value, got '" << arg << "'\n";
      return kExitConfig;
    }
    try {
      baselines.push_back({arg.substr(0, eq), hyq::ParseDouble(arg.substr(eq + 1))});
    } catch (const std::exception&) {
      std::cerr << "--baseline " << arg << ": value is not a number\n";
      return kExitConfig;
    }
  }
  std::ifstream in(csv_path);
  if (!in) {
    std::cerr << "cannot open " << csv_path << "\n";
    return kExitConfig;
  }
  std::stringstream buf;
  buf << in.rdbuf();
  hyq::AggregateCurve curve;
  try {
    curve = hyq::AggregateFromCsv(buf.str());
  } catch (const std::exception& e) {
    std::cerr << csv_path << ": " << e.what() << "\n";
    return kExitConfig;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) {
    std::cerr << "cannot write " << out_path << "\n";
    return kExitConfig;
  }
  out << hyq::PlotSvg(curve, baselines);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hy-Q lab: hybrid RL experiments, property checks and plots"};
  app.set_version_flag("--version", hyq::kToolVersion);
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run an experiment config");
  run->add_option("config", config_path, "Experiment config (JSON)")->required();

  int corpus = 1000;
  uint64_t seed = 0;
  bool inject_fault = false;
  auto* props = app.add_subcommand("props", "Check the analytic identities on a random corpus");
  props->add_option("--corpus", corpus, "Number of random instances")->check(CLI::PositiveNumber);
  props->add_option("--seed", seed, "Corpus seed");
  props->add_flag("--inject-fault", inject_fault, "Perturb one case; the suite must fail");

  std::string csv_path, out_path;
  std::vector<std::string> baselines;
  auto* plot = app.add_subcommand("plot", "Render an aggregate CSV as SVG");
  plot->add_option("aggregate", csv_path, "aggregate.csv")->required();
  plot->add_option("--baseline", baselines, "name=value horizontal line")->allow_extra_args(false);
  plot->add_option("-o,--output", out_path, "Output SVG")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  if (*run) return Run(config_path);
  if (*props) return Props(corpus, seed, inject_fault);
  if (*plot) return Plot(csv_path, baselines, out_path);
  return kExitConfig;
}
