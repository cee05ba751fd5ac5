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

// Value-function classes and their regression solvers.

#ifndef HYQ_FUNCTION_APPROX_H_
#define HYQ_FUNCTION_APPROX_H_

#include <array>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hyq/envs.h"
#include "hyq/mdp.h"
#include "hyq/rng.h"
#include "json.hpp"

namespace hyq {

inline double Clip(double x, double lo, double hi) {
  return x < lo ? lo : (x > hi ? hi : x);
}

// ---------------------------------------------------------------------------
// Tabular class

// What an unvisited cell is set to after a tabular regression step.
enum class UnvisitedFill { kZero, kOptimistic };

struct TabularQ {
  StateActionTable values;
  double v_max = 1.0;

  // Clipped to [0, v_max].
  double Value(int h, int s, int a) const { return Clip(values(h, s, a), 0.0, v_max); }
  double MaxValue(int h, int s) const;
};

// Exact squared-loss minimizer over the tabular class at one step: each
// visited cell becomes the mean of r + max_a' f_next(s', a') over its tuples
// (f_next clipped to [0, v_max], zero after the last step). Unvisited cells get
// `unvisited_value`.
std::vector<double> tabular_fqi_step(
    std::span<const std::span<const Transition>> buffers,
    std::span<const double> f_next, int n_states, int n_actions, double v_max,
    double unvisited_value);

// Convenience overload for a single buffer.
std::vector<double> tabular_fqi_step(std::span<const Transition> buffer,
                                     std::span<const double> f_next,
                                     int n_states, int n_actions, double v_max,
                                     double unvisited_value);

// ---------------------------------------------------------------------------
// Linear class

// phi(h, s, a) in R^dim.
struct FeatureMap {
  int dim = 0;
  int horizon = 0;
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> values;

  std::span<const double> at(int h, int s, int a) const {
    const size_t idx = ((static_cast<size_t>(h) * n_states + s) * n_actions + a) * dim;
    return std::span<const double>(values).subspan(idx, dim);
  }
};

FeatureMap OneHotFeatures(int horizon, int n_states, int n_actions);
FeatureMap FeaturesFromLowRank(const LowRankFactors& factors);

struct RidgeResult {
  Eigen::VectorXd weights;
  // Set when lambda = 0 and X^T X was singular.
  bool used_pseudo_inverse = false;
  // ||(X^T X + lambda I) w - X^T y||_inf
  double normal_equation_residual = 0.0;
};

// w = (X^T X + lambda I)^{-1} X^T y. Falls back to the pseudo-inverse when
// lambda = 0 and the Gram matrix is singular.
RidgeResult ridge_solve(const Eigen::MatrixXd& features,
                        const Eigen::VectorXd& targets, double lambda);

struct LinearQ {
  FeatureMap features;
  std::vector<Eigen::VectorXd> weights;  // one per step
  std::optional<double> weight_bound;
  double v_max = 1.0;

  double Raw(int h, int s, int a) const;
  double Value(int h, int s, int a) const { return Clip(Raw(h, s, a), 0.0, v_max); }
  double MaxValue(int h, int s) const;
  // Projects w_h onto the ball of radius weight_bound, if one is set.
  void Project(int h);
};

// ---------------------------------------------------------------------------
// Lock network: q(x, a) = <decoder, softmax(encoder x) (x) onehot(a)>.

inline constexpr int kLockNetLatent = 3;

class LockNet {
 public:
  LockNet() = default;
  LockNet(int obs_dim, int n_actions);

  // Entries iid uniform in [-1/sqrt(D), 1/sqrt(D)].
  static LockNet Random(int obs_dim, int n_actions, Rng& rng);

  int obs_dim() const { return obs_dim_; }
  int n_actions() const { return n_actions_; }

  // Parameters are stored flat: encoder (3 x D, row-major) then decoder
  // (3 * n_actions, index i * n_actions + a).
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::span<double> encoder() { return params().subspan(0, EncoderSize()); }
  std::span<const double> encoder() const { return params().subspan(0, EncoderSize()); }
  std::span<double> decoder() { return params().subspan(EncoderSize()); }
  std::span<const double> decoder() const { return params().subspan(EncoderSize()); }

  size_t EncoderSize() const { return static_cast<size_t>(kLockNetLatent) * obs_dim_; }

  // softmax(encoder x)
  std::array<double, kLockNetLatent> Latent(std::span<const double> obs) const;
  double Forward(std::span<const double> obs, int a) const;
  // q(x, a) for every action.
  void ForwardAll(std::span<const double> obs, std::span<double> q) const;
  double MaxValue(std::span<const double> obs) const;

  bool operator==(const LockNet&) const = default;

 private:
  int obs_dim_ = 0;
  int n_actions_ = 0;
  std::vector<double> params_;
};

// Same as LockNet::Forward; the reference free function.
double locknet_forward(const LockNet& net, std::span<const double> obs, int a);

struct RegressionExample {
  std::span<const double> obs;
  int a = 0;
  double target = 0.0;
};

struct LockNetGradient {
  std::vector<double> grad;  // same layout as LockNet::params()
  double loss = 0.0;         // mean squared error on the batch
};

// Analytic gradient of (1/B) sum (q(x, a) - target)^2.
LockNetGradient locknet_grad(const LockNet& net,
                             std::span<const RegressionExample> batch);

struct AdamState {
  explicit AdamState(size_t n_params, double learning_rate = 2e-2);

  void Step(std::span<double> params, std::span<const double> grad);

  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
  double lr;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Initial network for step h-1: encoder from the step-h network fitted in the
// current iteration, decoder from the step-(h-1) network of the previous
// iteration. Requires 1 <= h < size.
LockNet warm_start(std::span<const LockNet> nets_current_iter,
                   std::span<const LockNet> nets_previous_iter, int h);

// ---------------------------------------------------------------------------
// Checkpoints

nlohmann::json ToJson(const LockNet& net);
LockNet LockNetFromJson(const nlohmann::json& doc);
nlohmann::json ToJson(const TabularQ& q);
TabularQ TabularQFromJson(const nlohmann::json& doc);
nlohmann::json ToJson(const LinearQ& q);

}  // namespace hyq

#endif  // HYQ_FUNCTION_APPROX_H_
