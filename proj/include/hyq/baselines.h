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

// Comparison learners: offline-only FQI, behavior cloning, online-only FQI.

#ifndef HYQ_BASELINES_H_
#define HYQ_BASELINES_H_

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hyq/datasets.h"
#include "hyq/hyq.h"

namespace hyq {

struct OfflineFqiResult {
  std::unique_ptr<QModel> model;
  // Greedy latent policy, when the class reads latent states.
  std::optional<Policy> policy;
  TieBreak tie_break;
  // Environment steps taken; offline FQI never interacts, so always 0.
  long env_steps = 0;

  double Evaluate(const Environment& env, const EvalConfig& eval, Rng& rng) const;
};

// Backward FQI over the offline buffers only, repeated n_sweeps times.
OfflineFqiResult offline_fqi(const Environment& env, const OfflineDataset& offline,
                             const FunctionClassConfig& function_class, int n_sweeps,
                             const TieBreak& tie_break, uint64_t seed);

// Per (h, s): most frequent action, lowest index on ties; uniform on unseen
// rows.
Policy behavior_cloning_tabular(const OfflineDataset& offline, int n_states,
                                int n_actions);

struct SoftmaxPolicyConfig {
  int steps = 2000;
  double lr = 1e-2;
};

// Per-step multinomial logistic regression of actions on observations (plus
// a bias), trained by full-batch gradient descent.
class SoftmaxPolicy {
 public:
  SoftmaxPolicy(int horizon, int obs_dim, int n_actions);

  // Logits W_h [x; 1].
  void Logits(int h, std::span<const double> obs, std::span<double> out) const;
  std::vector<double> Probs(int h, std::span<const double> obs) const;
  int Act(int h, std::span<const double> obs) const;

  std::vector<Eigen::MatrixXd>& weights() { return w_; }
  const std::vector<Eigen::MatrixXd>& weights() const { return w_; }

 private:
  std::vector<Eigen::MatrixXd> w_;  // n_actions x (obs_dim + 1) per step
};

SoftmaxPolicy behavior_cloning_softmax(const Environment& env, const OfflineDataset& offline,
                                       const SoftmaxPolicyConfig& config, uint64_t seed);

// Hy-Q with an empty offline dataset.
RunRecord online_fqi(const Environment& env, const HyQConfig& config);

}  // namespace hyq

#endif  // HYQ_BASELINES_H_
