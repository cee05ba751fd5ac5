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

// Finite-horizon tabular MDPs and their exact dynamic-programming oracles.
//
// Conventions used throughout the library:
//   * timesteps h run over [0, H-1]; the episode ends after step H-1;
//   * the value of anything past the last step is zero (f_H == 0);
//   * per-step tables are stored row-major as [h][s][a].

#ifndef HYQ_MDP_H_
#define HYQ_MDP_H_

#include <optional>
#include <span>
#include <vector>

#include "hyq/rng.h"
#include "json.hpp"

namespace hyq {

// Sentinel stored in Transition::s_next for the last step of an episode.
inline constexpr int kTerminalState = -1;

// Tolerance for probability vectors after construction.
inline constexpr double kProbTolerance = 1e-12;
// Rows off by at most this much are renormalized; larger errors are rejected.
inline constexpr double kRenormalizeTolerance = 1e-9;

// Checks that `probs` is a probability vector, renormalizing small drift in
// place. Throws std::invalid_argument naming `what` otherwise.
void ValidateProbabilities(std::span<double> probs, const char* what);

// A value per (h, s, a).
class StateActionTable {
 public:
  StateActionTable() = default;
  StateActionTable(int horizon, int n_states, int n_actions, double fill = 0.0);

  int horizon() const { return horizon_; }
  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }

  double& operator()(int h, int s, int a) { return data_[Index(h, s, a)]; }
  double operator()(int h, int s, int a) const { return data_[Index(h, s, a)]; }

  // All (s, a) entries at step h, laid out as s * n_actions + a.
  std::span<double> slice(int h);
  std::span<const double> slice(int h) const;
  std::span<double> row(int h, int s);
  std::span<const double> row(int h, int s) const;

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  bool operator==(const StateActionTable&) const = default;

 private:
  size_t Index(int h, int s, int a) const {
    return (static_cast<size_t>(h) * n_states_ + s) * n_actions_ + a;
  }

  int horizon_ = 0;
  int n_states_ = 0;
  int n_actions_ = 0;
  std::vector<double> data_;
};

// A value per (h, s).
class StateTable {
 public:
  StateTable() = default;
  StateTable(int horizon, int n_states, double fill = 0.0);

  int horizon() const { return horizon_; }
  int n_states() const { return n_states_; }

  double& operator()(int h, int s) { return data_[h * n_states_ + s]; }
  double operator()(int h, int s) const { return data_[h * n_states_ + s]; }
  std::span<const double> slice(int h) const;

 private:
  int horizon_ = 0;
  int n_states_ = 0;
  std::vector<double> data_;
};

struct Reward {
  enum class Kind { kDeterministic, kBernoulli };

  static Reward Deterministic(double value) {
    return {Kind::kDeterministic, value};
  }
  static Reward Bernoulli(double p) { return {Kind::kBernoulli, p}; }

  double mean() const { return param; }
  double Sample(Rng& rng) const;
  // Whether `r` is a value this distribution can produce.
  bool InSupport(double r) const;

  bool operator==(const Reward&) const = default;

  Kind kind = Kind::kDeterministic;
  double param = 0.0;
};

struct Transition {
  int h = 0;
  int s = 0;
  int a = 0;
  double r = 0.0;
  int s_next = kTerminalState;

  bool operator==(const Transition&) const = default;
};

class TabularMDP {
 public:
  // `transition` is laid out [h][s][a][s'] and `rewards` [h][s][a]. Rows
  // within kRenormalizeTolerance of a distribution are renormalized; anything
  // else throws std::invalid_argument. `v_max` defaults to the horizon.
  TabularMDP(int horizon, int n_states, int n_actions,
             std::vector<double> transition, std::vector<Reward> rewards,
             std::vector<double> init_dist,
             std::optional<double> v_max = std::nullopt);

  int horizon() const { return horizon_; }
  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  double v_max() const { return v_max_; }
  bool has_v_max_override() const { return v_max_override_; }

  std::span<const double> next_state_dist(int h, int s, int a) const;
  double transition_prob(int h, int s, int a, int s_next) const {
    return next_state_dist(h, s, a)[s_next];
  }
  const Reward& reward(int h, int s, int a) const {
    return rewards_[(static_cast<size_t>(h) * n_states_ + s) * n_actions_ + a];
  }
  double reward_mean(int h, int s, int a) const { return reward(h, s, a).mean(); }
  std::span<const double> init_dist() const { return init_dist_; }

  const std::vector<double>& transition_tensor() const { return transition_; }
  const std::vector<Reward>& rewards() const { return rewards_; }

  // Reward means as a table, convenient for inner products with occupancies.
  StateActionTable RewardMeans() const;

  bool operator==(const TabularMDP&) const = default;

 private:
  int horizon_;
  int n_states_;
  int n_actions_;
  std::vector<double> transition_;
  std::vector<Reward> rewards_;
  std::vector<double> init_dist_;
  double v_max_;
  bool v_max_override_;
};

// Markov policy: a distribution over actions for every (h, s).
class Policy {
 public:
  explicit Policy(StateActionTable probs);

  static Policy Uniform(int horizon, int n_states, int n_actions);
  // actions[h * n_states + s] is the action taken at (h, s).
  static Policy Deterministic(int horizon, int n_states, int n_actions,
                              std::span<const int> actions);

  int horizon() const { return probs_.horizon(); }
  int n_states() const { return probs_.n_states(); }
  int n_actions() const { return probs_.n_actions(); }

  double prob(int h, int s, int a) const { return probs_(h, s, a); }
  std::span<const double> row(int h, int s) const { return probs_.row(h, s); }
  const StateActionTable& table() const { return probs_; }

  bool IsDeterministic() const;
  // Most likely action at (h, s), lowest index on ties.
  int Action(int h, int s) const;
  int Sample(int h, int s, Rng& rng) const;

  bool operator==(const Policy&) const = default;

 private:
  StateActionTable probs_;
};

// d_h^pi over (s, a) for each step.
class OccupancyMeasure {
 public:
  explicit OccupancyMeasure(StateActionTable table) : table_(std::move(table)) {}

  int horizon() const { return table_.horizon(); }
  double operator()(int h, int s, int a) const { return table_(h, s, a); }
  std::span<const double> slice(int h) const { return table_.slice(h); }
  std::vector<double> StateMarginal(int h) const;
  const StateActionTable& table() const { return table_; }

 private:
  StateActionTable table_;
};

struct OptimalValues {
  StateActionTable q;
  StateTable v;
};

struct PolicyValues {
  StateActionTable q;
  StateTable v;
};

// Backward induction with f_H == 0.
OptimalValues value_iteration(const TabularMDP& mdp);

// (T f)_h(s, a) = E[R] + sum_s' P(s'|s,a) max_a' f_next(s', a'). `f_next` holds
// the step-(h+1) slice laid out s * n_actions + a; it is ignored at h = H-1.
std::vector<double> bellman_backup(const TabularMDP& mdp,
                                   std::span<const double> f_next, int h);

// Forward recursion of state-action occupancies.
OccupancyMeasure occupancy(const TabularMDP& mdp, const Policy& pi);

// Sum over h of <d_h^pi, mean reward>.
double policy_value(const TabularMDP& mdp, const Policy& pi);

// Backward evaluation of Q^pi and V^pi.
PolicyValues evaluate_policy(const TabularMDP& mdp, const Policy& pi);

// Expected initial value E_{s ~ d0}[V_0(s)] for a state-value table.
double InitialValue(const TabularMDP& mdp, const StateTable& v);

// Rolls out one episode of length H. The last transition carries
// kTerminalState as its next state.
std::vector<Transition> sample_episode(const TabularMDP& mdp, const Policy& pi,
                                       Rng& rng);

double EpisodeReturn(std::span<const Transition> episode);

nlohmann::json ToJson(const TabularMDP& mdp);
TabularMDP MdpFromJson(const nlohmann::json& doc);
nlohmann::json ToJson(const Policy& pi);
Policy PolicyFromJson(const nlohmann::json& doc);

}  // namespace hyq

#endif  // HYQ_MDP_H_
