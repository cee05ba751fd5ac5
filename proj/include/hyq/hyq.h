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

// Hy-Q: fitted Q-iteration over a fixed offline dataset plus all online data
// collected so far by the greedy policies. Q-type, V-type and a discounted
// minibatch variant.

#ifndef HYQ_HYQ_H_
#define HYQ_HYQ_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hyq/datasets.h"
#include "hyq/envs.h"
#include "hyq/function_approx.h"
#include "hyq/mdp.h"
#include "json.hpp"

namespace hyq {

// ---------------------------------------------------------------------------
// Greedy extraction

enum class TieBreakKind { kLowestIndex, kRandomSeeded, kAdversarial };

struct TieBreak {
  TieBreakKind kind = TieBreakKind::kLowestIndex;
  uint64_t seed = 0;
  // Used by kAdversarial: among tied maximizers, pick the adversary's action
  // when it is one of them (lowest index otherwise).
  std::optional<Policy> adversary;

  static TieBreak LowestIndex() { return {}; }
  static TieBreak RandomSeeded(uint64_t seed) {
    return {TieBreakKind::kRandomSeeded, seed, std::nullopt};
  }
  static TieBreak AdversarialTo(Policy pi) {
    return {TieBreakKind::kAdversarial, 0, std::move(pi)};
  }
};

// Values within this of the row maximum count as tied.
inline constexpr double kTieTolerance = 1e-12;

// Index into `q` chosen by the rule; `h`, `s` locate the row for the
// adversarial and seeded rules.
int ArgmaxWithTieBreak(std::span<const double> q, int h, int s, const TieBreak& tb);

// Deterministic greedy policy of a (h, s, a) table.
Policy greedy_policy(const StateActionTable& f, const TieBreak& tie_break);
Policy greedy_policy(const TabularQ& f, const TieBreak& tie_break);

// ---------------------------------------------------------------------------
// Environments and buffers

// A finite-horizon environment: a latent tabular MDP, optionally observed
// through a rich-observation emitter.
struct Environment {
  TabularMDP mdp;
  std::optional<ObservationEmitter> emitter;

  static Environment Tabular(TabularMDP mdp) { return {std::move(mdp), std::nullopt}; }
  static Environment Lock(const CombLock& lock) { return {lock.mdp, lock.emitter}; }

  int obs_dim() const { return emitter ? emitter->dim() : 0; }
  int horizon() const { return mdp.horizon(); }
};

// Tuples at one step, with observations of s and s' when the environment has
// an emitter (next observations at the last step are zero).
struct StepBuffer {
  int obs_dim = 0;
  std::vector<Transition> tuples;
  std::vector<double> obs;
  std::vector<double> next_obs;

  size_t size() const { return tuples.size(); }
  std::span<const double> obs_at(size_t i) const {
    return std::span<const double>(obs).subspan(i * obs_dim, obs_dim);
  }
  std::span<const double> next_obs_at(size_t i) const {
    return std::span<const double>(next_obs).subspan(i * obs_dim, obs_dim);
  }
  void Append(const Transition& t, std::span<const double> x,
              std::span<const double> x_next);
};

// Per-step buffers for an offline dataset; observations are emitted with a
// stream derived from `seed`.
std::vector<StepBuffer> AttachObservations(const Environment& env,
                                           const OfflineDataset& dataset,
                                           uint64_t seed);

// ---------------------------------------------------------------------------
// Function classes

enum class FunctionClassKind { kTabular, kLinear, kLockNet };

const char* FunctionClassName(FunctionClassKind kind);
FunctionClassKind FunctionClassFromName(const std::string& name);

struct FunctionClassConfig {
  FunctionClassKind kind = FunctionClassKind::kTabular;
  // Tabular
  UnvisitedFill unvisited = UnvisitedFill::kZero;
  // Linear; defaults to one-hot features when unset.
  std::optional<FeatureMap> features;
  double ridge_lambda = 1e-6;
  std::optional<double> weight_bound;
  // LockNet minibatch Adam
  int n_updates = 500;
  int batch_size = 512;
  double lr = 2e-2;
};

// Regression data for one step: offline and online buffers with their
// precomputed Bellman targets.
struct RegressionInput {
  const StepBuffer* offline = nullptr;
  std::span<const double> offline_targets;
  const StepBuffer* online = nullptr;
  std::span<const double> online_targets;
  // Minibatch probability of drawing an offline example.
  double offline_prob = 0.0;
};

struct RegressionStats {
  double mse_offline = 0.0;
  double mse_online = 0.0;
  size_t pool_size = 0;
};

// A per-step Q-function family with its regression oracle.
class QModel {
 public:
  virtual ~QModel() = default;

  virtual FunctionClassKind kind() const = 0;
  virtual int horizon() const = 0;
  virtual int n_actions() const = 0;
  virtual double v_max() const = 0;

  // Clipped values of every action at (h, s, obs).
  virtual void Values(int h, int s, std::span<const double> obs,
                      std::span<double> q) const = 0;
  double MaxValue(int h, int s, std::span<const double> obs) const;

  // Called once per backward pass, before the step H-1 fit.
  virtual void BeginPass() {}
  virtual RegressionStats FitStep(int h, const RegressionInput& input, Rng& rng) = 0;

  // Greedy policy as a latent Markov policy, when the model only reads the
  // latent state.
  virtual std::optional<Policy> LatentPolicy(const TieBreak& tie_break) const {
    (void)tie_break;
    return std::nullopt;
  }

  virtual nlohmann::json Checkpoint() const = 0;
};

// f^1 is zero for tabular and linear models and the random initialization for
// lock nets.
std::unique_ptr<QModel> MakeQModel(const Environment& env,
                                   const FunctionClassConfig& config, Rng& rng);

// Bellman targets r + max_a' f_{h+1}(s', a') for every tuple of `buffer`.
std::vector<double> ComputeTargets(const QModel& model, int h, const StepBuffer& buffer);

// ---------------------------------------------------------------------------
// Acting and evaluation

// The greedy policy of a model: exact latent policy when available, otherwise
// argmax over observation-based values.
class GreedyActor {
 public:
  GreedyActor(const QModel& model, const TieBreak& tie_break);

  int Act(int h, int s, std::span<const double> obs) const;
  const std::optional<Policy>& latent_policy() const { return latent_; }

 private:
  const QModel* model_;
  TieBreak tie_break_;
  std::optional<Policy> latent_;
};

enum class EvalKind { kExactDP, kMonteCarlo };

struct EvalConfig {
  EvalKind kind = EvalKind::kExactDP;
  int n_episodes = 20;
};

// Average return of `act` over n_episodes Monte Carlo episodes.
using ActFn = std::function<int(int h, int s, std::span<const double> obs)>;
double MonteCarloReturn(const Environment& env, const ActFn& act, int n_episodes,
                        Rng& rng);

using VisitFn = std::function<void(const Transition& t, std::span<const double> obs,
                                   std::span<const double> next_obs)>;

// One V-type probe: roll in with `act` for steps 0..h-1, take a uniform action
// at step h, and visit only the step-h tuple.
void CollectVTypeEpisode(const Environment& env, const ActFn& act, int h, Rng& rng,
                         const VisitFn& visit);

// Exact DP when requested and the actor has a latent policy; Monte Carlo
// otherwise.
double EvaluateActor(const Environment& env, const GreedyActor& actor,
                     const EvalConfig& config, Rng& rng);

// ---------------------------------------------------------------------------
// Runs

enum class HyQVariant { kQType, kVType };

struct HyQConfig {
  int T = 1;
  int m_on = 1;
  HyQVariant variant = HyQVariant::kQType;
  FunctionClassConfig function_class;
  TieBreak tie_break;
  EvalConfig eval;
  uint64_t seed = 0;
  // Epsilon-greedy noise on the greedy actions during collection.
  double collect_epsilon = 0.0;
  // Stop once offline + online samples reach this many (0 = no limit).
  long sample_budget = 0;
};

// Row t evaluates the greedy policy of f^{t+1}, i.e. the policy produced
// after t rounds of collection; row 0 is the initial policy.
struct RunRow {
  int iter = 0;
  long online_steps = 0;
  long offline_samples = 0;
  double eval_return = 0.0;
  double bellman_residual_offline = 0.0;
  double bellman_residual_online = 0.0;

  long samples() const { return online_steps + offline_samples; }
};

struct RunRecord {
  std::vector<RunRow> rows;
  // Set when the offline dataset was empty (pure online FQI).
  bool empty_offline_warning = false;
  // Smallest regression pool over all fits, and the per-step offline count.
  size_t min_regression_size = 0;
  size_t offline_per_step_min = 0;
  nlohmann::json config;
  nlohmann::json final_model;

  double final_return() const { return rows.empty() ? 0.0 : rows.back().eval_return; }
};

std::string RunRecordToCsv(const RunRecord& record);
nlohmann::json ToJson(const HyQConfig& config);

RunRecord hyq_qtype(const Environment& env, const OfflineDataset& offline,
                    HyQConfig config);
RunRecord hyq_vtype(const Environment& env, const OfflineDataset& offline,
                    HyQConfig config);
// Dispatches on config.variant.
RunRecord run_hyq(const Environment& env, const OfflineDataset& offline,
                  const HyQConfig& config);

// ---------------------------------------------------------------------------
// Discounted minibatch variant

struct DiscountedConfig {
  double gamma = 0.99;
  // One gradient step every n_value env steps.
  int n_value = 4;
  // Target network refresh period in env steps.
  int n_target = 1000;
  double epsilon_start = 0.25;
  double epsilon_end = 0.001;
  double beta_start = 0.2;
  double beta_end = 0.01;
  size_t buffer_capacity = 100000;
  long total_steps = 10000;
  int minibatch = 32;
  double lr = 1e-3;
  FunctionClassKind function_class = FunctionClassKind::kTabular;
  uint64_t seed = 0;
  int record_every = 10;  // episodes per record row
  int moving_window = 100;
};

// Linear schedule from `start` at step 0 to `end` at `total`.
double LinearSchedule(double start, double end, long step, long total);

// The learner: one network over (h, s) or observations shared across steps,
// epsilon-greedy acting, and a frozen target copy.
class DiscountedHyQ {
 public:
  DiscountedHyQ(const Environment& env, const OfflineDataset& offline,
                DiscountedConfig config);

  // One environment step (plus any due gradient step and target refresh).
  void Step();
  RunRecord Run();

  long steps() const { return steps_; }
  double beta() const;
  double epsilon() const;
  // Max over actions of the target network at (h, s, obs).
  double TargetMax(int h, int s, std::span<const double> obs) const;
  double OnlineValue(int h, int s, std::span<const double> obs, int a) const;
  size_t online_size() const { return online_.size(); }

 private:
  struct Sample {
    Transition t;
    std::vector<double> obs;
    std::vector<double> next_obs;
  };

  void Values(bool target, int h, int s, std::span<const double> obs,
              std::span<double> q) const;
  void GradientStep();
  void EndEpisode();

  const Environment* env_;
  DiscountedConfig config_;
  std::vector<Sample> offline_;
  std::vector<Sample> online_;
  size_t online_head_ = 0;
  // Tabular: one value per (h, s, a). Lock: one network over observations,
  // which already encode h.
  std::vector<double> table_;
  std::vector<double> target_table_;
  LockNet net_;
  LockNet target_net_;
  AdamState adam_;
  double last_loss_ = 0.0;
  Rng rng_;
  long steps_ = 0;
  int h_ = 0;
  int s_ = 0;
  std::vector<double> obs_;
  double episode_return_ = 0.0;
  std::vector<double> returns_;
  RunRecord record_;
};

RunRecord hyq_discounted(const Environment& env, const OfflineDataset& offline,
                         const DiscountedConfig& config);

}  // namespace hyq

#endif  // HYQ_HYQ_H_
