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

#include "hyq/baselines.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hyq {

double OfflineFqiResult::Evaluate(const Environment& env, const EvalConfig& eval,
                                  Rng& rng) const {
  GreedyActor actor(*model, tie_break);
  return EvaluateActor(env, actor, eval, rng);
}

OfflineFqiResult offline_fqi(const Environment& env, const OfflineDataset& offline,
                             const FunctionClassConfig& function_class, int n_sweeps,
                             const TieBreak& tie_break, uint64_t seed) {
  if (offline.empty()) throw std::invalid_argument("offline_fqi: empty dataset");
  if (n_sweeps < 1) throw std::invalid_argument("offline_fqi: n_sweeps must be >= 1");
  const int H = env.horizon();
  Rng init_rng = MakeRng(seed, 51);
  Rng fit_rng = MakeRng(seed, 52);
  const std::vector<StepBuffer> off = AttachObservations(env, offline, seed);
  OfflineFqiResult result;
  result.model = MakeQModel(env, function_class, init_rng);
  result.tie_break = tie_break;
  for (int sweep = 0; sweep < n_sweeps; ++sweep) {
    result.model->BeginPass();
    for (int h = H - 1; h >= 0; --h) {
      const std::vector<double> y = ComputeTargets(*result.model, h, off[h]);
      RegressionInput in;
      in.offline = &off[h];
      in.offline_targets = y;
      in.offline_prob = 1.0;
      result.model->FitStep(h, in, fit_rng);
    }
  }
  result.policy = result.model->LatentPolicy(tie_break);
  return result;
}

Policy behavior_cloning_tabular(const OfflineDataset& offline, int n_states,
                                int n_actions) {
  if (offline.empty()) throw std::invalid_argument("behavior_cloning: empty dataset");
  const int H = offline.horizon();
  StateActionTable counts(H, n_states, n_actions);
  for (int h = 0; h < H; ++h) {
    for (const Transition& t : offline.at(h)) counts(h, t.s, t.a) += 1.0;
  }
  StateActionTable probs(H, n_states, n_actions);
  for (int h = 0; h < H; ++h) {
    for (int s = 0; s < n_states; ++s) {
      std::span<const double> row = counts.row(h, s);
      const auto best = std::max_element(row.begin(), row.end());
      if (*best == 0.0) {
        for (int a = 0; a < n_actions; ++a) probs(h, s, a) = 1.0 / n_actions;
      } else {
        probs(h, s, static_cast<int>(best - row.begin())) = 1.0;
      }
    }
  }
  return Policy(std::move(probs));
}

SoftmaxPolicy::SoftmaxPolicy(int horizon, int obs_dim, int n_actions)
    : w_(horizon, Eigen::MatrixXd::Zero(n_actions, obs_dim + 1)) {}

void SoftmaxPolicy::Logits(int h, std::span<const double> obs, std::span<double> out) const {
  const Eigen::MatrixXd& w = w_[h];
  const Eigen::Index D = w.cols() - 1;
  for (Eigen::Index a = 0; a < w.rows(); ++a) {
    double acc = w(a, D);
    for (Eigen::Index k = 0; k < D; ++k) acc += w(a, k) * obs[k];
    out[a] = acc;
  }
}

std::vector<double> SoftmaxPolicy::Probs(int h, std::span<const double> obs) const {
  std::vector<double> p(w_[h].rows());
  Logits(h, obs, p);
  const double m = *std::max_element(p.begin(), p.end());
  double z = 0.0;
  for (double& v : p) {
    v = std::exp(v - m);
    z += v;
  }
  for (double& v : p) v /= z;
  return p;
}

int SoftmaxPolicy::Act(int h, std::span<const double> obs) const {
  std::vector<double> l(w_[h].rows());
  Logits(h, obs, l);
  return static_cast<int>(std::max_element(l.begin(), l.end()) - l.begin());
}

SoftmaxPolicy behavior_cloning_softmax(const Environment& env, const OfflineDataset& offline,
                                       const SoftmaxPolicyConfig& config, uint64_t seed) {
  if (offline.empty()) throw std::invalid_argument("behavior_cloning: empty dataset");
  if (!env.emitter) throw std::invalid_argument("behavior_cloning: softmax mode needs observations");
  const int H = env.horizon();
  const int D = env.obs_dim();
  const int A = env.mdp.n_actions();
  const std::vector<StepBuffer> bufs = AttachObservations(env, offline, seed);
  SoftmaxPolicy pi(H, D, A);
  for (int h = 0; h < H; ++h) {
    const StepBuffer& b = bufs[h];
    const Eigen::Index n = static_cast<Eigen::Index>(b.size());
    if (n == 0) continue;
    Eigen::MatrixXd X(n, D + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      std::span<const double> x = b.obs_at(i);
      for (int k = 0; k < D; ++k) X(i, k) = x[k];
      X(i, D) = 1.0;
    }
    Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(n, A);
    for (Eigen::Index i = 0; i < n; ++i) Y(i, b.tuples[i].a) = 1.0;
    Eigen::MatrixXd& W = pi.weights()[h];
    for (int step = 0; step < config.steps; ++step) {
      Eigen::MatrixXd logits = X * W.transpose();
      for (Eigen::Index i = 0; i < n; ++i) {
        const double m = logits.row(i).maxCoeff();
        logits.row(i) = (logits.row(i).array() - m).exp();
        logits.row(i) /= logits.row(i).sum();
      }
      // Gradient of the mean cross-entropy.
      W -= config.lr * ((logits - Y).transpose() * X) / static_cast<double>(n);
    }
  }
  return pi;
}

RunRecord online_fqi(const Environment& env, const HyQConfig& config) {
  return run_hyq(env, OfflineDataset::Empty(env.horizon()), config);
}

}  // namespace hyq
