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

// Config-driven experiment runner, replicate aggregation, the property
// corpus, and SVG learning-curve plots.

#ifndef HYQ_HARNESS_H_
#define HYQ_HARNESS_H_

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hyq/baselines.h"
#include "hyq/hyq.h"
#include "json.hpp"

namespace hyq {

inline constexpr const char* kToolVersion = "hyq-lab 0.1.0";
inline constexpr const char* kOutputRootEnv = "HYQ_OUTPUT_ROOT";

// Invalid configuration; the message starts with the path to the field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A replicate threw; `seed` identifies it.
class ReplicateError : public std::runtime_error {
 public:
  ReplicateError(uint64_t seed, const std::string& what)
      : std::runtime_error("replicate seed " + std::to_string(seed) + ": " + what), seed(seed) {}
  uint64_t seed;
};

enum class EnvKind { kCombLock, kHardInstance, kRandomTabular, kLowRank };
enum class AlgorithmKind { kHyQ, kOfflineFqi, kBehaviorCloning, kOnlineFqi, kHyQDiscounted };

struct EnvSpec {
  EnvKind kind = EnvKind::kCombLock;
  int horizon = 10;
  // Fixed environment seed; the replicate seed is used when unset.
  std::optional<uint64_t> seed;
  double noise_std = kLockNoiseStd;
  HardInstanceVariant variant = HardInstanceVariant::kM1;
  int n_states = 4;
  int n_actions = 3;
  int rank = 2;
};

struct DatasetSpec {
  DatasetKind kind = DatasetKind::kEmpty;
  int m_off = 0;
  std::optional<uint64_t> seed;
};

struct AlgorithmSpec {
  AlgorithmKind kind = AlgorithmKind::kHyQ;
  HyQConfig hyq;
  DiscountedConfig discounted;
  int n_sweeps = 1;
  // Behavior cloning on latent states instead of observations.
  bool bc_tabular = false;
  SoftmaxPolicyConfig bc;
};

struct ExperimentConfig {
  std::string id;
  EnvSpec env;
  DatasetSpec dataset;
  AlgorithmSpec algorithm;
  std::vector<uint64_t> replicate_seeds;
  std::string output_dir;
};

// Throws ConfigError with a path-to-field message.
ExperimentConfig ParseExperimentConfig(const nlohmann::json& doc);
ExperimentConfig LoadExperimentConfig(const std::string& path);
nlohmann::json ToJson(const ExperimentConfig& config);

struct AggregatePoint {
  double x = 0.0;
  double median = 0.0;
  double p20 = 0.0;
  double p80 = 0.0;
};

struct AggregateCurve {
  std::vector<AggregatePoint> points;
};

// Linear-interpolation quantile (q in [0, 1]) of unsorted values.
double Quantile(std::vector<double> values, double q);

// Aligns records by row index (truncating to the shortest); x is the median
// sample count at each row.
AggregateCurve Aggregate(std::span<const RunRecord> records);
std::string AggregateToCsv(const AggregateCurve& curve);
AggregateCurve AggregateFromCsv(const std::string& csv);

struct ExperimentResult {
  AggregateCurve aggregate;
  std::vector<RunRecord> records;
  std::vector<std::string> written_files;
};

// One replicate, without writing anything.
RunRecord RunReplicate(const ExperimentConfig& config, uint64_t seed);

// Runs every replicate and writes replicate_<seed>.csv, aggregate.csv and
// config.json under output_root/output_dir (skipped when output_root is
// empty).
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const std::string& output_root);

// Output root from the environment, "out" by default.
std::string OutputRootFromEnv();

struct PropertyCheck {
  std::string name;
  int cases = 0;
  int failures = 0;
  double worst = 0.0;  // largest gap or violation margin seen
  // Reported but not counted against the suite.
  bool informational = false;
};

struct PropertyReport {
  uint64_t seed = 0;
  int corpus = 0;
  std::vector<PropertyCheck> checks;
  std::vector<std::string> reproducers;
  bool passed = true;
};

struct PropertyOptions {
  int corpus = 1000;
  uint64_t seed = 0;
  // Perturbs one performance-difference residual; the suite must fail.
  bool inject_fault = false;
  // Reproducers are written here; empty disables writing.
  std::string output_dir;
};

// Random instances shared by the property corpus and the acceptance checks.
struct IdentityCase {
  TabularMDP mdp;
  StateActionTable f;  // entries uniform in [0, V_max]
  StateActionTable g;
  Policy pi_e;
};
IdentityCase MakeIdentityCase(Rng& rng);

struct ChainCase {
  TabularMDP mdp;
  Policy pi;
  StateActionTable nu;  // uniform over (s, a) at every step
  std::vector<StateActionTable> f_class;  // Q* and random tables
};
ChainCase MakeChainCase(Rng& rng);

struct EllipticalCase {
  std::vector<Eigen::VectorXd> xs;
  double lambda = 1.0;
};
EllipticalCase MakeEllipticalCase(Rng& rng);

PropertyReport run_property_suite(const PropertyOptions& options);
nlohmann::json ToJson(const PropertyReport& report);

struct BaselineLine {
  std::string name;
  double value = 0.0;
};

// Median curve with a shaded 20/80 band and dashed horizontal baselines.
std::string PlotSvg(const AggregateCurve& curve, std::span<const BaselineLine> baselines);

}  // namespace hyq

#endif  // HYQ_HARNESS_H_
