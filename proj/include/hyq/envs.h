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

// Environment constructors: the rich-observation combination lock, the
// two-MDP offline hard instance, low-rank MDPs and plain random MDPs.

#ifndef HYQ_ENVS_H_
#define HYQ_ENVS_H_

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hyq/mdp.h"
#include "hyq/rng.h"
#include "json.hpp"

namespace hyq {

// ---------------------------------------------------------------------------
// Combination lock

inline constexpr int kLockLatentStates = 3;
inline constexpr int kLockActions = 10;
inline constexpr int kLockBadState = 2;
inline constexpr double kLockNoiseStd = 0.1;
inline constexpr double kLockAntiShapedReward = 0.1;

// Smallest power of two that fits onehot(3) ++ onehot(H + 1).
int LockObservationDim(int horizon);

// Sylvester construction of a dim x dim +-1 matrix, row-major. `dim` must be a
// power of two.
std::vector<int> SylvesterHadamard(int dim);

struct CombLockSpec {
  int horizon = 0;
  int n_latent = kLockLatentStates;
  int n_actions = kLockActions;
  // good_actions[i * horizon + h] for good latent state i in {0, 1}.
  std::vector<int> good_actions;
  double noise_std = kLockNoiseStd;
  int obs_dim = 0;
  std::vector<int> hadamard;
  uint64_t seed = 0;

  int good_action(int i, int h) const { return good_actions[i * horizon + h]; }
};

class ObservationEmitter {
 public:
  explicit ObservationEmitter(CombLockSpec spec);

  const CombLockSpec& spec() const { return spec_; }
  int dim() const { return spec_.obs_dim; }

  // Writes the observation of latent `z` at step `h` (h may equal H for the
  // post-terminal observation) into `out`, which must have dim() entries.
  void EmitInto(int z, int h, Rng& rng, std::span<double> out) const;

  // Noise-free pre-mixing vector: onehot(z) ++ onehot(h) ++ zeros.
  std::vector<double> LatentCode(int z, int h) const;

 private:
  CombLockSpec spec_;
};

std::vector<double> emit_observation(const ObservationEmitter& emitter, int z,
                                     int h, Rng& rng);

struct CombLock {
  TabularMDP mdp;
  ObservationEmitter emitter;
  Policy pi_star;
};

// Latent MDP with V_max = 1 (the best achievable return), its observation
// emitter and the optimal policy (action 0 in the bad state).
CombLock make_comb_lock(int horizon, uint64_t seed,
                        double noise_std = kLockNoiseStd);

nlohmann::json ToJson(const CombLockSpec& spec);
CombLockSpec CombLockSpecFromJson(const nlohmann::json& doc);

// ---------------------------------------------------------------------------
// Offline hard instance: states {A, B, C}, actions {L, R}, H = 2.

enum class HardInstanceVariant { kM1, kM2 };

inline constexpr int kStateA = 0;
inline constexpr int kStateB = 1;
inline constexpr int kStateC = 2;
inline constexpr int kActionL = 0;
inline constexpr int kActionR = 1;

struct HardInstance {
  TabularMDP mdp;
  Policy pi_star;
};

// V_max is 1 (at most one unit of reward is collected per episode). pi_star
// plays L at A, L at B and the rewarding action at C.
HardInstance make_hard_instance(HardInstanceVariant variant);

// Deterministic policy on the hard instance given the actions at A and C
// (B always plays L); the same action is used at every step.
Policy HardInstancePolicy(int action_at_a, int action_at_c);

// ---------------------------------------------------------------------------
// Low-rank MDPs

struct LowRankFactors {
  int rank = 0;
  int horizon = 0;
  int n_states = 0;
  int n_actions = 0;
  // phi[((h * S + s) * A + a) * d + k]
  std::vector<double> phi;
  // mu[(h * S + s_next) * d + k]
  std::vector<double> mu;

  std::span<const double> phi_at(int h, int s, int a) const;
  std::span<const double> mu_at(int h, int s_next) const;
  // mu_h(s')^T phi_h(s, a)
  double Product(int h, int s, int a, int s_next) const;
};

struct LowRankInstance {
  TabularMDP mdp;
  LowRankFactors factors;
};

// Random rank-`rank` MDP. phi rows live on the probability simplex (so
// ||phi||_2 <= 1), each mu_k is a distribution over next states, and the mean
// reward is <theta_h, phi> with theta_h in [0, 1]^d, making Q* linear in phi.
LowRankInstance make_low_rank(int rank, int n_states, int n_actions,
                              int horizon, uint64_t seed);

// Exact rank-|S| factorization of any tabular MDP: phi(s, a) = P(.|s, a) and
// mu(s') = onehot(s').
LowRankFactors identity_factorization(const TabularMDP& mdp);

nlohmann::json ToJson(const LowRankFactors& factors);
LowRankFactors LowRankFactorsFromJson(const nlohmann::json& doc);

// ---------------------------------------------------------------------------
// Random tabular MDPs for property corpora.

struct RandomMdpOptions {
  bool bernoulli_rewards = false;
  // Probability that a transition entry is forced to zero (row keeps at least
  // one successor).
  double sparsity = 0.0;
  bool random_init = true;
};

TabularMDP make_random_mdp(int n_states, int n_actions, int horizon, Rng& rng,
                           const RandomMdpOptions& options = {});

// Random stochastic (or deterministic when `deterministic`) policy.
Policy make_random_policy(int horizon, int n_states, int n_actions, Rng& rng,
                          bool deterministic = false);

}  // namespace hyq

#endif  // HYQ_ENVS_H_
