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

#include "hyq/hyq.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "hyq/format.h"

namespace hyq {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

int ArgmaxWithTieBreak(std::span<const double> q, int h, int s, const TieBreak& tb) {
  if (q.empty()) throw std::invalid_argument("ArgmaxWithTieBreak: empty row");
  double best = q[0];
  for (double v : q) best = std::max(best, v);
  std::vector<int> tied;
  for (int a = 0; a < static_cast<int>(q.size()); ++a) {
    if (q[a] >= best - kTieTolerance) tied.push_back(a);
  }
  switch (tb.kind) {
    case TieBreakKind::kLowestIndex:
      return tied.front();
    case TieBreakKind::kRandomSeeded: {
      if (tied.size() == 1) return tied.front();
      Rng rng = MakeRng(tb.seed, (static_cast<uint64_t>(h) << 32) | static_cast<uint32_t>(s));
      return tied[UniformInt(rng, static_cast<int>(tied.size()))];
    }
    case TieBreakKind::kAdversarial: {
      if (!tb.adversary) throw std::invalid_argument("adversarial tie-break without a policy");
      const int bad = tb.adversary->Action(h, s);
      if (std::find(tied.begin(), tied.end(), bad) != tied.end()) return bad;
      return tied.front();
    }
  }
  return tied.front();
}

Policy greedy_policy(const StateActionTable& f, const TieBreak& tie_break) {
  const int H = f.horizon();
  const int S = f.n_states();
  std::vector<int> actions(static_cast<size_t>(H) * S);
  for (int h = 0; h < H; ++h) {
    for (int s = 0; s < S; ++s) {
      actions[h * S + s] = ArgmaxWithTieBreak(f.row(h, s), h, s, tie_break);
    }
  }
  return Policy::Deterministic(H, S, f.n_actions(), actions);
}

Policy greedy_policy(const TabularQ& f, const TieBreak& tie_break) {
  StateActionTable clipped = f.values;
  for (double& v : clipped.data()) v = Clip(v, 0.0, f.v_max);
  return greedy_policy(clipped, tie_break);
}

void StepBuffer::Append(const Transition& t, std::span<const double> x,
                        std::span<const double> x_next) {
  tuples.push_back(t);
  if (obs_dim > 0) {
    obs.insert(obs.end(), x.begin(), x.end());
    next_obs.insert(next_obs.end(), x_next.begin(), x_next.end());
  }
}

std::vector<StepBuffer> AttachObservations(const Environment& env,
                                           const OfflineDataset& dataset,
                                           uint64_t seed) {
  const int H = dataset.horizon();
  const int D = env.obs_dim();
  std::vector<StepBuffer> out(H);
  Rng rng = MakeRng(seed, 31);
  std::vector<double> x(D), x_next(D);
  for (int h = 0; h < H; ++h) {
    out[h].obs_dim = D;
    out[h].tuples.reserve(dataset.size(h));
    for (const Transition& t : dataset.at(h)) {
      if (D > 0) {
        env.emitter->EmitInto(t.s, h, rng, x);
        if (t.s_next != kTerminalState) {
          env.emitter->EmitInto(t.s_next, h + 1, rng, x_next);
        } else {
          std::fill(x_next.begin(), x_next.end(), 0.0);
        }
      }
      out[h].Append(t, x, x_next);
    }
  }
  return out;
}

const char* FunctionClassName(FunctionClassKind kind) {
  switch (kind) {
    case FunctionClassKind::kTabular: return "tabular";
    case FunctionClassKind::kLinear: return "linear";
    case FunctionClassKind::kLockNet: return "locknet";
  }
  return "unknown";
}

FunctionClassKind FunctionClassFromName(const std::string& name) {
  for (auto k : {FunctionClassKind::kTabular, FunctionClassKind::kLinear,
                 FunctionClassKind::kLockNet}) {
    if (name == FunctionClassName(k)) return k;
  }
  throw std::invalid_argument("unknown function class '" + name + "'");
}

double QModel::MaxValue(int h, int s, std::span<const double> obs) const {
  std::vector<double> q(n_actions());
  Values(h, s, obs, q);
  return *std::max_element(q.begin(), q.end());
}

namespace {

double MeanSquaredError(const QModel& model, int h, const StepBuffer* buffer,
                        std::span<const double> targets) {
  if (buffer == nullptr || buffer->size() == 0) return kNaN;
  std::vector<double> q(model.n_actions());
  double acc = 0.0;
  for (size_t i = 0; i < buffer->size(); ++i) {
    const Transition& t = buffer->tuples[i];
    model.Values(h, t.s, buffer->obs_dim > 0 ? buffer->obs_at(i) : std::span<const double>(), q);
    const double r = q[t.a] - targets[i];
    acc += r * r;
  }
  return acc / static_cast<double>(buffer->size());
}

size_t PoolSize(const RegressionInput& in) {
  return (in.offline ? in.offline->size() : 0) + (in.online ? in.online->size() : 0);
}

class TabularModel : public QModel {
 public:
  TabularModel(const TabularMDP& mdp, UnvisitedFill fill)
      : q_{StateActionTable(mdp.horizon(), mdp.n_states(), mdp.n_actions()), mdp.v_max()},
        fill_(fill) {}

  FunctionClassKind kind() const override { return FunctionClassKind::kTabular; }
  int horizon() const override { return q_.values.horizon(); }
  int n_actions() const override { return q_.values.n_actions(); }
  double v_max() const override { return q_.v_max; }

  void Values(int h, int s, std::span<const double>, std::span<double> q) const override {
    for (int a = 0; a < n_actions(); ++a) q[a] = q_.Value(h, s, a);
  }

  RegressionStats FitStep(int h, const RegressionInput& in, Rng&) override {
    std::vector<std::span<const Transition>> buffers;
    if (in.offline) buffers.push_back(in.offline->tuples);
    if (in.online) buffers.push_back(in.online->tuples);
    std::span<const double> f_next;
    if (h + 1 < horizon()) f_next = q_.values.slice(h + 1);
    const double fill = fill_ == UnvisitedFill::kOptimistic ? q_.v_max : 0.0;
    const std::vector<double> cells =
        tabular_fqi_step(buffers, f_next, q_.values.n_states(), n_actions(), q_.v_max, fill);
    std::copy(cells.begin(), cells.end(), q_.values.slice(h).begin());
    return {MeanSquaredError(*this, h, in.offline, in.offline_targets),
            MeanSquaredError(*this, h, in.online, in.online_targets), PoolSize(in)};
  }

  std::optional<Policy> LatentPolicy(const TieBreak& tb) const override {
    return greedy_policy(q_, tb);
  }

  json Checkpoint() const override { return ToJson(q_); }

 private:
  TabularQ q_;
  UnvisitedFill fill_;
};

class LinearModel : public QModel {
 public:
  LinearModel(const TabularMDP& mdp, const FunctionClassConfig& config)
      : lambda_(config.ridge_lambda), n_states_(mdp.n_states()) {
    q_.features = config.features
                      ? *config.features
                      : OneHotFeatures(mdp.horizon(), mdp.n_states(), mdp.n_actions());
    if (q_.features.horizon != mdp.horizon() || q_.features.n_states != mdp.n_states() ||
        q_.features.n_actions != mdp.n_actions()) {
      throw std::invalid_argument("linear class: feature map shape does not match the MDP");
    }
    q_.weights.assign(mdp.horizon(), Eigen::VectorXd::Zero(q_.features.dim));
    q_.weight_bound = config.weight_bound;
    q_.v_max = mdp.v_max();
  }

  FunctionClassKind kind() const override { return FunctionClassKind::kLinear; }
  int horizon() const override { return q_.features.horizon; }
  int n_actions() const override { return q_.features.n_actions; }
  double v_max() const override { return q_.v_max; }

  void Values(int h, int s, std::span<const double>, std::span<double> q) const override {
    for (int a = 0; a < n_actions(); ++a) q[a] = q_.Value(h, s, a);
  }

  RegressionStats FitStep(int h, const RegressionInput& in, Rng&) override {
    const size_t n = PoolSize(in);
    const int p = q_.features.dim;
    if (n == 0) {
      q_.weights[h].setZero();
      return {kNaN, kNaN, 0};
    }
    Eigen::MatrixXd X(n, p);
    Eigen::VectorXd y(n);
    size_t row = 0;
    auto add = [&](const StepBuffer* b, std::span<const double> targets) {
      if (!b) return;
      for (size_t i = 0; i < b->size(); ++i, ++row) {
        const Transition& t = b->tuples[i];
        std::span<const double> phi = q_.features.at(h, t.s, t.a);
        for (int k = 0; k < p; ++k) X(row, k) = phi[k];
        y[row] = targets[i];
      }
    };
    add(in.offline, in.offline_targets);
    add(in.online, in.online_targets);
    q_.weights[h] = ridge_solve(X, y, lambda_).weights;
    q_.Project(h);
    return {MeanSquaredError(*this, h, in.offline, in.offline_targets),
            MeanSquaredError(*this, h, in.online, in.online_targets), n};
  }

  std::optional<Policy> LatentPolicy(const TieBreak& tb) const override {
    StateActionTable table(horizon(), n_states_, n_actions());
    for (int h = 0; h < horizon(); ++h) {
      for (int s = 0; s < n_states_; ++s) {
        for (int a = 0; a < n_actions(); ++a) table(h, s, a) = q_.Value(h, s, a);
      }
    }
    return greedy_policy(table, tb);
  }

  json Checkpoint() const override { return ToJson(q_); }

 private:
  LinearQ q_;
  double lambda_;
  int n_states_;
};

class LockNetModel : public QModel {
 public:
  LockNetModel(const Environment& env, const FunctionClassConfig& config, Rng& rng)
      : config_(config), v_max_(env.mdp.v_max()) {
    const int H = env.horizon();
    for (int h = 0; h < H; ++h) {
      nets_.push_back(LockNet::Random(env.obs_dim(), env.mdp.n_actions(), rng));
    }
    prev_ = nets_;
  }

  FunctionClassKind kind() const override { return FunctionClassKind::kLockNet; }
  int horizon() const override { return static_cast<int>(nets_.size()); }
  int n_actions() const override { return nets_.front().n_actions(); }
  double v_max() const override { return v_max_; }

  void Values(int h, int, std::span<const double> obs, std::span<double> q) const override {
    nets_[h].ForwardAll(obs, q);
    for (double& v : q) v = Clip(v, 0.0, v_max_);
  }

  void BeginPass() override { prev_ = nets_; }

  RegressionStats FitStep(int h, const RegressionInput& in, Rng& rng) override {
    const int H = horizon();
    // The top step has no current-iteration donor; it continues from its own
    // previous network.
    LockNet net = h + 1 < H ? warm_start(nets_, prev_, h + 1) : prev_[h];
    const size_t n_off = in.offline ? in.offline->size() : 0;
    const size_t n_on = in.online ? in.online->size() : 0;
    if (n_off + n_on > 0) {
      AdamState adam(net.params().size(), config_.lr);
      std::vector<RegressionExample> batch(config_.batch_size);
      for (int u = 0; u < config_.n_updates; ++u) {
        for (RegressionExample& ex : batch) {
          const bool off = n_on == 0 || (n_off > 0 && Uniform01(rng) < in.offline_prob);
          const StepBuffer& b = off ? *in.offline : *in.online;
          const size_t i = UniformInt(rng, static_cast<int>(off ? n_off : n_on));
          ex.obs = b.obs_at(i);
          ex.a = b.tuples[i].a;
          ex.target = off ? in.offline_targets[i] : in.online_targets[i];
        }
        const LockNetGradient g = locknet_grad(net, batch);
        adam.Step(net.params(), g.grad);
      }
    }
    nets_[h] = std::move(net);
    return {MeanSquaredError(*this, h, in.offline, in.offline_targets),
            MeanSquaredError(*this, h, in.online, in.online_targets), n_off + n_on};
  }

  json Checkpoint() const override {
    json doc = json::array();
    for (const LockNet& net : nets_) doc.push_back(ToJson(net));
    return doc;
  }

 private:
  FunctionClassConfig config_;
  double v_max_;
  std::vector<LockNet> nets_;
  std::vector<LockNet> prev_;
};

}  // namespace

std::unique_ptr<QModel> MakeQModel(const Environment& env,
                                   const FunctionClassConfig& config, Rng& rng) {
  switch (config.kind) {
    case FunctionClassKind::kTabular:
      return std::make_unique<TabularModel>(env.mdp, config.unvisited);
    case FunctionClassKind::kLinear:
      return std::make_unique<LinearModel>(env.mdp, config);
    case FunctionClassKind::kLockNet:
      if (!env.emitter) throw std::invalid_argument("locknet class needs an observation emitter");
      if (config.n_updates < 0 || config.batch_size < 1 || !(config.lr > 0.0)) {
        throw std::invalid_argument("locknet class: bad optimizer settings");
      }
      return std::make_unique<LockNetModel>(env, config, rng);
  }
  throw std::invalid_argument("MakeQModel: unknown class");
}

std::vector<double> ComputeTargets(const QModel& model, int h, const StepBuffer& buffer) {
  std::vector<double> y(buffer.size());
  const bool last = h + 1 >= model.horizon();
  for (size_t i = 0; i < buffer.size(); ++i) {
    const Transition& t = buffer.tuples[i];
    y[i] = t.r;
    if (!last && t.s_next != kTerminalState) {
      y[i] += model.MaxValue(h + 1, t.s_next,
                             buffer.obs_dim > 0 ? buffer.next_obs_at(i)
                                                : std::span<const double>());
    }
  }
  return y;
}

GreedyActor::GreedyActor(const QModel& model, const TieBreak& tie_break)
    : model_(&model), tie_break_(tie_break), latent_(model.LatentPolicy(tie_break)) {}

int GreedyActor::Act(int h, int s, std::span<const double> obs) const {
  if (latent_) return latent_->Action(h, s);
  std::vector<double> q(model_->n_actions());
  model_->Values(h, s, obs, q);
  return ArgmaxWithTieBreak(q, h, s, tie_break_);
}

namespace {

// Rolls an actor through the environment; `choose` may override the action.
template <typename Choose, typename Visit>
void Rollout(const Environment& env, int steps, Rng& rng, Choose choose, Visit visit) {
  const TabularMDP& mdp = env.mdp;
  const int D = env.obs_dim();
  std::vector<double> x(D), x_next(D);
  int s = SampleCategorical(rng, mdp.init_dist());
  if (D > 0) env.emitter->EmitInto(s, 0, rng, x);
  for (int h = 0; h < steps; ++h) {
    const int a = choose(h, s, std::span<const double>(x));
    Transition t = SampleTransition(mdp, h, s, a, rng);
    const bool emit_next = D > 0 && t.s_next != kTerminalState;
    if (emit_next) {
      env.emitter->EmitInto(t.s_next, h + 1, rng, x_next);
    } else if (D > 0) {
      std::fill(x_next.begin(), x_next.end(), 0.0);
    }
    visit(t, std::span<const double>(x), std::span<const double>(x_next));
    s = t.s_next;
    std::swap(x, x_next);
  }
}

}  // namespace

void CollectVTypeEpisode(const Environment& env, const ActFn& act, int h, Rng& rng,
                         const VisitFn& visit) {
  const int A = env.mdp.n_actions();
  Rollout(
      env, h + 1, rng,
      [&](int k, int s, std::span<const double> x) {
        return k == h ? UniformInt(rng, A) : act(k, s, x);
      },
      [&](const Transition& tr, std::span<const double> x, std::span<const double> xn) {
        if (tr.h == h) visit(tr, x, xn);
      });
}

double MonteCarloReturn(const Environment& env, const ActFn& act, int n_episodes,
                        Rng& rng) {
  if (n_episodes < 1) throw std::invalid_argument("MonteCarloReturn: n_episodes < 1");
  double total = 0.0;
  for (int e = 0; e < n_episodes; ++e) {
    Rollout(env, env.horizon(), rng, act,
            [&](const Transition& t, std::span<const double>, std::span<const double>) {
              total += t.r;
            });
  }
  return total / n_episodes;
}

double EvaluateActor(const Environment& env, const GreedyActor& actor,
                     const EvalConfig& config, Rng& rng) {
  if (config.kind == EvalKind::kExactDP && actor.latent_policy()) {
    return policy_value(env.mdp, *actor.latent_policy());
  }
  return MonteCarloReturn(
      env, [&](int h, int s, std::span<const double> x) { return actor.Act(h, s, x); },
      config.n_episodes, rng);
}

namespace {

const char* TieBreakName(TieBreakKind k) {
  switch (k) {
    case TieBreakKind::kLowestIndex: return "lowest_index";
    case TieBreakKind::kRandomSeeded: return "random_seeded";
    case TieBreakKind::kAdversarial: return "adversarial";
  }
  return "unknown";
}

long SamplesPerIteration(const HyQConfig& c, int H) {
  return c.variant == HyQVariant::kQType ? static_cast<long>(c.m_on) * H
                                         : static_cast<long>(c.m_on) * H * (H + 1) / 2;
}

double MeanIgnoringNaN(const std::vector<double>& v) {
  double acc = 0.0;
  int n = 0;
  for (double x : v) {
    if (!std::isnan(x)) {
      acc += x;
      ++n;
    }
  }
  return n == 0 ? kNaN : acc / n;
}

RunRecord RunHyQImpl(const Environment& env, const OfflineDataset& offline,
                     const HyQConfig& config) {
  if (config.T < 1) throw std::invalid_argument("hyq: T must be >= 1");
  if (config.m_on < 1) throw std::invalid_argument("hyq: m_on must be >= 1");
  if (config.collect_epsilon < 0.0 || config.collect_epsilon > 1.0) {
    throw std::invalid_argument("hyq: collect_epsilon outside [0, 1]");
  }
  const int H = env.horizon();
  if (offline.horizon() != H) throw std::invalid_argument("hyq: dataset horizon mismatch");
  const int A = env.mdp.n_actions();

  Rng init_rng = MakeRng(config.seed, 21);
  Rng collect_rng = MakeRng(config.seed, 22);
  Rng fit_rng = MakeRng(config.seed, 23);
  Rng eval_rng = MakeRng(config.seed, 24);

  const std::vector<StepBuffer> off = AttachObservations(env, offline, config.seed);
  std::vector<StepBuffer> on(H);
  for (StepBuffer& b : on) b.obs_dim = env.obs_dim();
  std::unique_ptr<QModel> model = MakeQModel(env, config.function_class, init_rng);

  RunRecord record;
  record.config = ToJson(config);
  record.empty_offline_warning = offline.empty();
  record.min_regression_size = std::numeric_limits<size_t>::max();
  record.offline_per_step_min = std::numeric_limits<size_t>::max();
  for (int h = 0; h < H; ++h) {
    record.offline_per_step_min = std::min(record.offline_per_step_min, off[h].size());
  }
  const long offline_samples = static_cast<long>(offline.total_size());
  long online_steps = 0;

  {
    GreedyActor actor(*model, config.tie_break);
    record.rows.push_back({0, 0, offline_samples,
                           EvaluateActor(env, actor, config.eval, eval_rng), kNaN, kNaN});
  }

  const long per_iter = SamplesPerIteration(config, H);
  for (int t = 1; t <= config.T; ++t) {
    if (config.sample_budget > 0 &&
        offline_samples + online_steps + per_iter > config.sample_budget) {
      break;
    }
    {
      GreedyActor actor(*model, config.tie_break);
      auto policy_action = [&](int h, int s, std::span<const double> x) {
        if (config.collect_epsilon > 0.0 && Uniform01(collect_rng) < config.collect_epsilon) {
          return UniformInt(collect_rng, A);
        }
        return actor.Act(h, s, x);
      };
      if (config.variant == HyQVariant::kQType) {
        for (int j = 0; j < config.m_on; ++j) {
          Rollout(env, H, collect_rng, policy_action,
                  [&](const Transition& tr, std::span<const double> x,
                      std::span<const double> xn) { on[tr.h].Append(tr, x, xn); });
          online_steps += H;
        }
      } else {
        for (int h = 0; h < H; ++h) {
          for (int j = 0; j < config.m_on; ++j) {
            CollectVTypeEpisode(env, policy_action, h, collect_rng,
                                [&](const Transition& tr, std::span<const double> x,
                                    std::span<const double> xn) { on[h].Append(tr, x, xn); });
            online_steps += h + 1;
          }
        }
      }
    }

    std::vector<double> res_off(H), res_on(H);
    model->BeginPass();
    for (int h = H - 1; h >= 0; --h) {
      const std::vector<double> y_off = ComputeTargets(*model, h, off[h]);
      const std::vector<double> y_on = ComputeTargets(*model, h, on[h]);
      RegressionInput in;
      in.offline = &off[h];
      in.offline_targets = y_off;
      in.online = &on[h];
      in.online_targets = y_on;
      const double n_off = static_cast<double>(off[h].size());
      in.offline_prob = n_off / (n_off + static_cast<double>(on[h].size()));
      const RegressionStats stats = model->FitStep(h, in, fit_rng);
      record.min_regression_size = std::min(record.min_regression_size, stats.pool_size);
      res_off[h] = stats.mse_offline;
      res_on[h] = stats.mse_online;
    }

    GreedyActor actor(*model, config.tie_break);
    record.rows.push_back({t, online_steps, offline_samples,
                           EvaluateActor(env, actor, config.eval, eval_rng),
                           MeanIgnoringNaN(res_off), MeanIgnoringNaN(res_on)});
  }
  if (record.min_regression_size == std::numeric_limits<size_t>::max()) {
    record.min_regression_size = 0;
  }
  record.final_model = model->Checkpoint();
  return record;
}

}  // namespace

std::string RunRecordToCsv(const RunRecord& record) {
  std::ostringstream out;
  out << "iter,online_steps,offline_samples,eval_return,bellman_residual_offline,"
         "bellman_residual_online\n";
  for (const RunRow& r : record.rows) {
    out << r.iter << ',' << r.online_steps << ',' << r.offline_samples << ','
        << FormatDouble(r.eval_return) << ',' << FormatDouble(r.bellman_residual_offline)
        << ',' << FormatDouble(r.bellman_residual_online) << '\n';
  }
  return out.str();
}

json ToJson(const HyQConfig& c) {
  json doc;
  doc["T"] = c.T;
  doc["m_on"] = c.m_on;
  doc["variant"] = c.variant == HyQVariant::kQType ? "qtype" : "vtype";
  json fc;
  fc["kind"] = FunctionClassName(c.function_class.kind);
  fc["unvisited"] = c.function_class.unvisited == UnvisitedFill::kZero ? "zero" : "optimistic";
  fc["features"] = c.function_class.features
                       ? json("custom:" + std::to_string(c.function_class.features->dim))
                       : json("onehot");
  fc["ridge_lambda"] = c.function_class.ridge_lambda;
  fc["weight_bound"] = c.function_class.weight_bound ? json(*c.function_class.weight_bound)
                                                     : json(nullptr);
  fc["n_updates"] = c.function_class.n_updates;
  fc["batch_size"] = c.function_class.batch_size;
  fc["lr"] = c.function_class.lr;
  doc["function_class"] = std::move(fc);
  json tb;
  tb["kind"] = TieBreakName(c.tie_break.kind);
  tb["seed"] = c.tie_break.seed;
  if (c.tie_break.adversary) tb["adversary"] = ToJson(*c.tie_break.adversary);
  doc["tie_break"] = std::move(tb);
  doc["eval"] = {{"kind", c.eval.kind == EvalKind::kExactDP ? "exact_dp" : "monte_carlo"},
                 {"n_episodes", c.eval.n_episodes}};
  doc["seed"] = c.seed;
  doc["collect_epsilon"] = c.collect_epsilon;
  doc["sample_budget"] = c.sample_budget;
  return doc;
}

RunRecord hyq_qtype(const Environment& env, const OfflineDataset& offline,
                    HyQConfig config) {
  config.variant = HyQVariant::kQType;
  return RunHyQImpl(env, offline, config);
}

RunRecord hyq_vtype(const Environment& env, const OfflineDataset& offline,
                    HyQConfig config) {
  config.variant = HyQVariant::kVType;
  return RunHyQImpl(env, offline, config);
}

RunRecord run_hyq(const Environment& env, const OfflineDataset& offline,
                  const HyQConfig& config) {
  return RunHyQImpl(env, offline, config);
}

// ---------------------------------------------------------------------------
// Discounted

double LinearSchedule(double start, double end, long step, long total) {
  if (total <= 0 || step >= total) return end;
  const double frac = std::min(1.0, static_cast<double>(step) / static_cast<double>(total));
  return start + (end - start) * frac;
}

DiscountedHyQ::DiscountedHyQ(const Environment& env, const OfflineDataset& offline,
                             DiscountedConfig config)
    : env_(&env), config_(config), adam_(0), rng_(MakeRng(config.seed, 41)) {
  if (!(config_.gamma >= 0.0 && config_.gamma < 1.0)) {
    throw std::invalid_argument("discounted: gamma must lie in [0, 1)");
  }
  if (config_.n_value < 1 || config_.n_target < 1 || config_.minibatch < 1 ||
      config_.buffer_capacity < 1 || config_.total_steps < 0 || config_.record_every < 1 ||
      config_.moving_window < 1) {
    throw std::invalid_argument("discounted: bad configuration");
  }
  if (!(config_.beta_end > 0.0) || config_.beta_start < config_.beta_end) {
    throw std::invalid_argument("discounted: beta schedule must stay positive and decrease");
  }
  const TabularMDP& mdp = env.mdp;
  Rng init = MakeRng(config.seed, 42);
  size_t n_params = 0;
  if (config_.function_class == FunctionClassKind::kLockNet) {
    if (!env.emitter) throw std::invalid_argument("discounted: locknet needs observations");
    net_ = LockNet::Random(env.obs_dim(), mdp.n_actions(), init);
    target_net_ = net_;
    n_params = net_.params().size();
  } else if (config_.function_class == FunctionClassKind::kTabular) {
    table_.assign(static_cast<size_t>(mdp.horizon()) * mdp.n_states() * mdp.n_actions(), 0.0);
    target_table_ = table_;
    n_params = table_.size();
  } else {
    throw std::invalid_argument("discounted: only tabular and locknet classes");
  }
  adam_ = AdamState(n_params, config_.lr);

  for (const StepBuffer& b : AttachObservations(env, offline, config.seed)) {
    for (size_t i = 0; i < b.size(); ++i) {
      Sample smp{b.tuples[i], {}, {}};
      if (b.obs_dim > 0) {
        smp.obs.assign(b.obs_at(i).begin(), b.obs_at(i).end());
        smp.next_obs.assign(b.next_obs_at(i).begin(), b.next_obs_at(i).end());
      }
      offline_.push_back(std::move(smp));
    }
  }
  record_.config = {{"gamma", config_.gamma},
                    {"n_value", config_.n_value},
                    {"n_target", config_.n_target},
                    {"epsilon", {config_.epsilon_start, config_.epsilon_end}},
                    {"beta", {config_.beta_start, config_.beta_end}},
                    {"buffer_capacity", config_.buffer_capacity},
                    {"total_steps", config_.total_steps},
                    {"minibatch", config_.minibatch},
                    {"lr", config_.lr},
                    {"function_class", FunctionClassName(config_.function_class)},
                    {"seed", config_.seed}};
  record_.empty_offline_warning = offline_.empty();
  obs_.assign(env.obs_dim(), 0.0);
  h_ = env.horizon();  // forces a reset on the first step
}

double DiscountedHyQ::beta() const {
  if (offline_.empty()) return 0.0;
  return LinearSchedule(config_.beta_start, config_.beta_end, steps_, config_.total_steps);
}

double DiscountedHyQ::epsilon() const {
  return LinearSchedule(config_.epsilon_start, config_.epsilon_end, steps_,
                        config_.total_steps);
}

void DiscountedHyQ::Values(bool target, int h, int s, std::span<const double> obs,
                           std::span<double> q) const {
  if (config_.function_class == FunctionClassKind::kLockNet) {
    (target ? target_net_ : net_).ForwardAll(obs, q);
    return;
  }
  const std::vector<double>& t = target ? target_table_ : table_;
  const int S = env_->mdp.n_states();
  const int A = env_->mdp.n_actions();
  for (int a = 0; a < A; ++a) q[a] = t[(static_cast<size_t>(h) * S + s) * A + a];
}

double DiscountedHyQ::TargetMax(int h, int s, std::span<const double> obs) const {
  std::vector<double> q(env_->mdp.n_actions());
  Values(true, h, s, obs, q);
  return *std::max_element(q.begin(), q.end());
}

double DiscountedHyQ::OnlineValue(int h, int s, std::span<const double> obs, int a) const {
  std::vector<double> q(env_->mdp.n_actions());
  Values(false, h, s, obs, q);
  return q[a];
}

void DiscountedHyQ::GradientStep() {
  const double b = beta();
  std::vector<const Sample*> picks;
  picks.reserve(config_.minibatch);
  for (int i = 0; i < config_.minibatch; ++i) {
    const bool off = !offline_.empty() && (online_.empty() || Uniform01(rng_) < b);
    if (off) {
      picks.push_back(&offline_[UniformInt(rng_, static_cast<int>(offline_.size()))]);
    } else if (!online_.empty()) {
      picks.push_back(&online_[UniformInt(rng_, static_cast<int>(online_.size()))]);
    }
  }
  if (picks.empty()) return;
  std::vector<double> y(picks.size());
  for (size_t i = 0; i < picks.size(); ++i) {
    const Transition& t = picks[i]->t;
    y[i] = t.r;
    if (t.s_next != kTerminalState && config_.gamma > 0.0) {
      y[i] += config_.gamma * TargetMax(t.h + 1, t.s_next, picks[i]->next_obs);
    }
  }
  if (config_.function_class == FunctionClassKind::kLockNet) {
    std::vector<RegressionExample> batch(picks.size());
    for (size_t i = 0; i < picks.size(); ++i) {
      batch[i] = {picks[i]->obs, picks[i]->t.a, y[i]};
    }
    const LockNetGradient g = locknet_grad(net_, batch);
    last_loss_ = g.loss;
    adam_.Step(net_.params(), g.grad);
  } else {
    const int S = env_->mdp.n_states();
    const int A = env_->mdp.n_actions();
    std::vector<double> grad(table_.size(), 0.0);
    double loss = 0.0;
    for (size_t i = 0; i < picks.size(); ++i) {
      const Transition& t = picks[i]->t;
      const size_t idx = (static_cast<size_t>(t.h) * S + t.s) * A + t.a;
      const double r = table_[idx] - y[i];
      loss += r * r;
      grad[idx] += 2.0 * r / static_cast<double>(picks.size());
    }
    last_loss_ = loss / static_cast<double>(picks.size());
    adam_.Step(table_, grad);
  }
}

void DiscountedHyQ::EndEpisode() {
  returns_.push_back(episode_return_);
  episode_return_ = 0.0;
  if (returns_.size() % config_.record_every == 0) {
    const size_t n = std::min<size_t>(returns_.size(), config_.moving_window);
    double acc = 0.0;
    for (size_t i = returns_.size() - n; i < returns_.size(); ++i) acc += returns_[i];
    record_.rows.push_back({static_cast<int>(returns_.size()), steps_,
                            static_cast<long>(offline_.size()), acc / n, kNaN, last_loss_});
  }
}

void DiscountedHyQ::Step() {
  const TabularMDP& mdp = env_->mdp;
  const int H = mdp.horizon();
  const int A = mdp.n_actions();
  const int D = env_->obs_dim();
  if (h_ >= H) {
    h_ = 0;
    s_ = SampleCategorical(rng_, mdp.init_dist());
    if (D > 0) env_->emitter->EmitInto(s_, 0, rng_, obs_);
  }
  int a;
  if (Uniform01(rng_) < epsilon()) {
    a = UniformInt(rng_, A);
  } else {
    std::vector<double> q(A);
    Values(false, h_, s_, obs_, q);
    a = static_cast<int>(std::max_element(q.begin(), q.end()) - q.begin());
  }
  const Transition t = SampleTransition(mdp, h_, s_, a, rng_);
  std::vector<double> next(D, 0.0);
  if (D > 0 && t.s_next != kTerminalState) env_->emitter->EmitInto(t.s_next, h_ + 1, rng_, next);
  Sample smp{t, obs_, next};
  if (online_.size() < config_.buffer_capacity) {
    online_.push_back(std::move(smp));
  } else {
    online_[online_head_] = std::move(smp);
    online_head_ = (online_head_ + 1) % config_.buffer_capacity;
  }
  episode_return_ += t.r;
  ++steps_;
  if (steps_ % config_.n_value == 0) GradientStep();
  if (steps_ % config_.n_target == 0) {
    target_net_ = net_;
    target_table_ = table_;
  }
  ++h_;
  s_ = t.s_next;
  obs_ = std::move(next);
  if (h_ >= H) EndEpisode();
}

RunRecord DiscountedHyQ::Run() {
  while (steps_ < config_.total_steps) Step();
  return record_;
}

RunRecord hyq_discounted(const Environment& env, const OfflineDataset& offline,
                         const DiscountedConfig& config) {
  DiscountedHyQ learner(env, offline, config);
  return learner.Run();
}

}  // namespace hyq
