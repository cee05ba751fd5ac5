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

#include "hyq/function_approx.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hyq {

using nlohmann::json;

double TabularQ::MaxValue(int h, int s) const {
  double best = Value(h, s, 0);
  for (int a = 1; a < values.n_actions(); ++a) best = std::max(best, Value(h, s, a));
  return best;
}

std::vector<double> tabular_fqi_step(
    std::span<const std::span<const Transition>> buffers,
    std::span<const double> f_next, int n_states, int n_actions, double v_max,
    double unvisited_value) {
  const size_t cells = static_cast<size_t>(n_states) * n_actions;
  std::vector<double> sum(cells, 0.0);
  std::vector<long> count(cells, 0);
  // max_a' f_next(s', .) per next state, clipped.
  std::vector<double> next_max(n_states, 0.0);
  const bool has_next = !f_next.empty();
  if (has_next) {
    if (f_next.size() != cells) throw std::invalid_argument("tabular_fqi_step: f_next shape");
    for (int s = 0; s < n_states; ++s) {
      double m = Clip(f_next[s * n_actions], 0.0, v_max);
      for (int a = 1; a < n_actions; ++a) {
        m = std::max(m, Clip(f_next[s * n_actions + a], 0.0, v_max));
      }
      next_max[s] = m;
    }
  }
  for (std::span<const Transition> buffer : buffers) {
    for (const Transition& t : buffer) {
      const size_t idx = static_cast<size_t>(t.s) * n_actions + t.a;
      double y = t.r;
      if (has_next && t.s_next != kTerminalState) y += next_max[t.s_next];
      sum[idx] += y;
      ++count[idx];
    }
  }
  std::vector<double> out(cells, unvisited_value);
  for (size_t i = 0; i < cells; ++i) {
    if (count[i] > 0) out[i] = sum[i] / static_cast<double>(count[i]);
  }
  return out;
}

std::vector<double> tabular_fqi_step(std::span<const Transition> buffer,
                                     std::span<const double> f_next,
                                     int n_states, int n_actions, double v_max,
                                     double unvisited_value) {
  std::span<const Transition> one[1] = {buffer};
  return tabular_fqi_step(std::span<const std::span<const Transition>>(one), f_next,
                          n_states, n_actions, v_max, unvisited_value);
}

FeatureMap OneHotFeatures(int horizon, int n_states, int n_actions) {
  FeatureMap f;
  f.dim = n_states * n_actions;
  f.horizon = horizon;
  f.n_states = n_states;
  f.n_actions = n_actions;
  f.values.assign(static_cast<size_t>(horizon) * f.dim * f.dim, 0.0);
  for (int h = 0; h < horizon; ++h) {
    for (int i = 0; i < f.dim; ++i) {
      f.values[(static_cast<size_t>(h) * f.dim + i) * f.dim + i] = 1.0;
    }
  }
  return f;
}

FeatureMap FeaturesFromLowRank(const LowRankFactors& factors) {
  FeatureMap f;
  f.dim = factors.rank;
  f.horizon = factors.horizon;
  f.n_states = factors.n_states;
  f.n_actions = factors.n_actions;
  f.values = factors.phi;
  return f;
}

RidgeResult ridge_solve(const Eigen::MatrixXd& features,
                        const Eigen::VectorXd& targets, double lambda) {
  if (features.rows() < 1) throw std::invalid_argument("ridge_solve: no rows");
  if (features.rows() != targets.size()) throw std::invalid_argument("ridge_solve: shape");
  if (!(lambda >= 0.0)) throw std::invalid_argument("ridge_solve: lambda < 0");
  const Eigen::Index p = features.cols();
  Eigen::MatrixXd gram = features.transpose() * features;
  gram.diagonal().array() += lambda;
  const Eigen::VectorXd rhs = features.transpose() * targets;

  RidgeResult result;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  bool ok = ldlt.info() == Eigen::Success && ldlt.isPositive();
  if (ok) {
    // Reject near-singular pivots when nothing regularizes the system.
    const Eigen::VectorXd d = ldlt.vectorD().cwiseAbs();
    const double scale = std::max(1.0, gram.diagonal().cwiseAbs().maxCoeff());
    if (lambda == 0.0 && d.minCoeff() <= 1e-12 * scale * p) ok = false;
  }
  if (ok) {
    result.weights = ldlt.solve(rhs);
  } else {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(gram);
    result.weights = cod.solve(rhs);
    result.used_pseudo_inverse = true;
  }
  result.normal_equation_residual =
      p == 0 ? 0.0 : (gram * result.weights - rhs).cwiseAbs().maxCoeff();
  return result;
}

double LinearQ::Raw(int h, int s, int a) const {
  std::span<const double> phi = features.at(h, s, a);
  const Eigen::VectorXd& w = weights[h];
  double acc = 0.0;
  for (int k = 0; k < features.dim; ++k) acc += w[k] * phi[k];
  return acc;
}

double LinearQ::MaxValue(int h, int s) const {
  double best = Value(h, s, 0);
  for (int a = 1; a < features.n_actions; ++a) best = std::max(best, Value(h, s, a));
  return best;
}

void LinearQ::Project(int h) {
  if (!weight_bound) return;
  const double n = weights[h].norm();
  if (n > *weight_bound) weights[h] *= *weight_bound / n;
}

LockNet::LockNet(int obs_dim, int n_actions)
    : obs_dim_(obs_dim),
      n_actions_(n_actions),
      params_(static_cast<size_t>(kLockNetLatent) * (obs_dim + n_actions), 0.0) {
  if (obs_dim < 1 || n_actions < 1) throw std::invalid_argument("LockNet: bad shape");
}

LockNet LockNet::Random(int obs_dim, int n_actions, Rng& rng) {
  LockNet net(obs_dim, n_actions);
  const double bound = 1.0 / std::sqrt(static_cast<double>(obs_dim));
  for (double& p : net.params_) p = bound * (2.0 * Uniform01(rng) - 1.0);
  return net;
}

std::array<double, kLockNetLatent> LockNet::Latent(std::span<const double> obs) const {
  std::array<double, kLockNetLatent> logits{};
  const double* w = params_.data();
  for (int i = 0; i < kLockNetLatent; ++i) {
    double acc = 0.0;
    const double* row = w + static_cast<size_t>(i) * obs_dim_;
    for (int k = 0; k < obs_dim_; ++k) acc += row[k] * obs[k];
    logits[i] = acc;
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double& l : logits) {
    l = std::exp(l - m);
    z += l;
  }
  for (double& l : logits) l /= z;
  return logits;
}

double LockNet::Forward(std::span<const double> obs, int a) const {
  const auto p = Latent(obs);
  std::span<const double> dec = decoder();
  double q = 0.0;
  for (int i = 0; i < kLockNetLatent; ++i) q += p[i] * dec[i * n_actions_ + a];
  return q;
}

void LockNet::ForwardAll(std::span<const double> obs, std::span<double> q) const {
  const auto p = Latent(obs);
  std::span<const double> dec = decoder();
  for (int a = 0; a < n_actions_; ++a) {
    double acc = 0.0;
    for (int i = 0; i < kLockNetLatent; ++i) acc += p[i] * dec[i * n_actions_ + a];
    q[a] = acc;
  }
}

double LockNet::MaxValue(std::span<const double> obs) const {
  std::vector<double> q(n_actions_);
  ForwardAll(obs, q);
  return *std::max_element(q.begin(), q.end());
}

double locknet_forward(const LockNet& net, std::span<const double> obs, int a) {
  return net.Forward(obs, a);
}

LockNetGradient locknet_grad(const LockNet& net,
                             std::span<const RegressionExample> batch) {
  if (batch.empty()) throw std::invalid_argument("locknet_grad: empty batch");
  const int D = net.obs_dim();
  const int A = net.n_actions();
  LockNetGradient out;
  out.grad.assign(net.params().size(), 0.0);
  double* g_enc = out.grad.data();
  double* g_dec = out.grad.data() + net.EncoderSize();
  std::span<const double> dec = net.decoder();
  const double scale = 2.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const RegressionExample& ex : batch) {
    const auto p = net.Latent(ex.obs);
    std::array<double, kLockNetLatent> u{};
    double q = 0.0;
    for (int i = 0; i < kLockNetLatent; ++i) {
      u[i] = dec[i * A + ex.a];
      q += p[i] * u[i];
    }
    const double r = q - ex.target;
    loss += r * r;
    const double c = scale * r;
    for (int i = 0; i < kLockNetLatent; ++i) {
      g_dec[i * A + ex.a] += c * p[i];
      // softmax Jacobian: dq/dlogit_i = p_i (u_i - q)
      const double gl = c * p[i] * (u[i] - q);
      double* row = g_enc + static_cast<size_t>(i) * D;
      for (int k = 0; k < D; ++k) row[k] += gl * ex.obs[k];
    }
  }
  out.loss = loss / static_cast<double>(batch.size());
  return out;
}

AdamState::AdamState(size_t n_params, double learning_rate)
    : m(n_params, 0.0), v(n_params, 0.0), lr(learning_rate) {}

void AdamState::Step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m.size() || grad.size() != m.size()) {
    throw std::invalid_argument("AdamState::Step: shape mismatch");
  }
  ++step;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  for (size_t i = 0; i < params.size(); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
    const double mh = m[i] / bc1;
    const double vh = v[i] / bc2;
    params[i] -= lr * mh / (std::sqrt(vh) + eps);
  }
}

LockNet warm_start(std::span<const LockNet> nets_current_iter,
                   std::span<const LockNet> nets_previous_iter, int h) {
  if (h < 1 || h >= static_cast<int>(nets_current_iter.size()) ||
      h > static_cast<int>(nets_previous_iter.size())) {
    throw std::out_of_range("warm_start: step out of range");
  }
  const LockNet& enc_donor = nets_current_iter[h];
  const LockNet& dec_donor = nets_previous_iter[h - 1];
  if (enc_donor.obs_dim() != dec_donor.obs_dim() ||
      enc_donor.n_actions() != dec_donor.n_actions()) {
    throw std::invalid_argument("warm_start: donor shapes differ");
  }
  LockNet net(enc_donor.obs_dim(), enc_donor.n_actions());
  std::copy(enc_donor.encoder().begin(), enc_donor.encoder().end(), net.encoder().begin());
  std::copy(dec_donor.decoder().begin(), dec_donor.decoder().end(), net.decoder().begin());
  return net;
}

json ToJson(const LockNet& net) {
  json doc;
  doc["kind"] = "locknet";
  doc["obs_dim"] = net.obs_dim();
  doc["n_actions"] = net.n_actions();
  doc["latent"] = kLockNetLatent;
  doc["encoder"] = std::vector<double>(net.encoder().begin(), net.encoder().end());
  doc["decoder"] = std::vector<double>(net.decoder().begin(), net.decoder().end());
  return doc;
}

LockNet LockNetFromJson(const json& doc) {
  LockNet net(doc.at("obs_dim").get<int>(), doc.at("n_actions").get<int>());
  const auto enc = doc.at("encoder").get<std::vector<double>>();
  const auto dec = doc.at("decoder").get<std::vector<double>>();
  if (enc.size() != net.encoder().size() || dec.size() != net.decoder().size()) {
    throw std::invalid_argument("LockNetFromJson: parameter count mismatch");
  }
  std::copy(enc.begin(), enc.end(), net.encoder().begin());
  std::copy(dec.begin(), dec.end(), net.decoder().begin());
  return net;
}

json ToJson(const TabularQ& q) {
  json doc;
  doc["kind"] = "tabular";
  doc["horizon"] = q.values.horizon();
  doc["n_states"] = q.values.n_states();
  doc["n_actions"] = q.values.n_actions();
  doc["v_max"] = q.v_max;
  doc["values"] = std::vector<double>(q.values.data().begin(), q.values.data().end());
  return doc;
}

TabularQ TabularQFromJson(const json& doc) {
  TabularQ q{StateActionTable(doc.at("horizon").get<int>(), doc.at("n_states").get<int>(),
                              doc.at("n_actions").get<int>()),
             doc.at("v_max").get<double>()};
  const auto vals = doc.at("values").get<std::vector<double>>();
  if (vals.size() != q.values.data().size()) {
    throw std::invalid_argument("TabularQFromJson: value count mismatch");
  }
  std::copy(vals.begin(), vals.end(), q.values.data().begin());
  return q;
}

json ToJson(const LinearQ& q) {
  json doc;
  doc["kind"] = "linear";
  doc["dim"] = q.features.dim;
  doc["v_max"] = q.v_max;
  if (q.weight_bound) doc["weight_bound"] = *q.weight_bound;
  json w = json::array();
  for (const auto& wh : q.weights) w.push_back(std::vector<double>(wh.data(), wh.data() + wh.size()));
  doc["weights"] = std::move(w);
  return doc;
}

}  // namespace hyq
