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

#include "hyq/harness.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "hyq/analysis.h"
#include "hyq/format.h"

namespace hyq {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config parsing

namespace {

std::string Join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

[[noreturn]] void Fail(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

// Typed access to one JSON object with path-aware errors.
class Reader {
 public:
  Reader(const json& doc, std::string path, std::set<std::string> allowed)
      : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) Fail(path_.empty() ? "<root>" : path_, "expected an object");
    for (const auto& [key, value] : doc_.items()) {
      (void)value;
      if (!allowed.count(key)) Fail(Join(path_, key), "unknown field");
    }
  }

  bool Has(const std::string& key) const { return doc_.contains(key); }
  std::string PathOf(const std::string& key) const { return Join(path_, key); }

  const json& Raw(const std::string& key) const {
    if (!Has(key)) Fail(PathOf(key), "missing required field");
    return doc_.at(key);
  }

  std::string String(const std::string& key) const {
    const json& v = Raw(key);
    if (!v.is_string()) Fail(PathOf(key), "expected a string");
    return v.get<std::string>();
  }
  std::string String(const std::string& key, const std::string& def) const {
    return Has(key) ? String(key) : def;
  }

  double Number(const std::string& key) const {
    const json& v = Raw(key);
    if (!v.is_number()) Fail(PathOf(key), "expected a number");
    return v.get<double>();
  }
  double Number(const std::string& key, double def) const { return Has(key) ? Number(key) : def; }

  long Integer(const std::string& key, long lo) const {
    const json& v = Raw(key);
    if (!v.is_number_integer()) Fail(PathOf(key), "expected an integer");
    const long x = v.get<long>();
    if (x < lo) Fail(PathOf(key), "must be >= " + std::to_string(lo));
    return x;
  }
  long Integer(const std::string& key, long def, long lo) const {
    return Has(key) ? Integer(key, lo) : def;
  }

  uint64_t Seed(const std::string& key) const {
    const json& v = Raw(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long>() >= 0)) {
      Fail(PathOf(key), "expected a nonnegative integer");
    }
    return v.get<uint64_t>();
  }

  bool Bool(const std::string& key, bool def) const {
    if (!Has(key)) return def;
    const json& v = Raw(key);
    if (!v.is_boolean()) Fail(PathOf(key), "expected true or false");
    return v.get<bool>();
  }

  std::pair<double, double> Pair(const std::string& key, std::pair<double, double> def) const {
    if (!Has(key)) return def;
    const json& v = Raw(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      Fail(PathOf(key), "expected [start, end]");
    }
    return {v[0].get<double>(), v[1].get<double>()};
  }

  template <typename E>
  E Enum(const std::string& key, E def,
         std::initializer_list<std::pair<const char*, E>> options) const {
    if (!Has(key)) return def;
    const std::string s = String(key);
    std::string names;
    for (const auto& [name, value] : options) {
      if (s == name) return value;
      names += names.empty() ? name : std::string(", ") + name;
    }
    Fail(PathOf(key), "unknown value '" + s + "' (expected one of: " + names + ")");
  }

 private:
  const json& doc_;
  std::string path_;
};

int ActionFromName(const json& v, const std::string& path) {
  if (v.is_string()) {
    if (v == "L") return kActionL;
    if (v == "R") return kActionR;
  }
  if (v.is_number_integer() && (v.get<int>() == 0 || v.get<int>() == 1)) return v.get<int>();
  Fail(path, "expected \"L\" or \"R\"");
}

FunctionClassConfig ParseFunctionClass(const json& doc, const std::string& path) {
  Reader r(doc, path,
           {"kind", "unvisited", "features", "ridge_lambda", "weight_bound", "n_updates",
            "batch_size", "lr"});
  FunctionClassConfig fc;
  fc.kind = r.Enum<FunctionClassKind>("kind", FunctionClassKind::kTabular,
                                      {{"tabular", FunctionClassKind::kTabular},
                                       {"linear", FunctionClassKind::kLinear},
                                       {"locknet", FunctionClassKind::kLockNet}});
  fc.unvisited = r.Enum<UnvisitedFill>(
      "unvisited", UnvisitedFill::kZero,
      {{"zero", UnvisitedFill::kZero}, {"optimistic", UnvisitedFill::kOptimistic}});
  if (r.Has("features")) {
    const std::string f = r.String("features");
    if (f != "onehot" && f != "low_rank") {
      Fail(r.PathOf("features"), "unknown value '" + f + "' (expected onehot or low_rank)");
    }
  }
  fc.ridge_lambda = r.Number("ridge_lambda", fc.ridge_lambda);
  if (fc.ridge_lambda < 0.0) Fail(r.PathOf("ridge_lambda"), "must be >= 0");
  if (r.Has("weight_bound")) {
    fc.weight_bound = r.Number("weight_bound");
    if (!(*fc.weight_bound > 0.0)) Fail(r.PathOf("weight_bound"), "must be > 0");
  }
  fc.n_updates = static_cast<int>(r.Integer("n_updates", fc.n_updates, 0));
  fc.batch_size = static_cast<int>(r.Integer("batch_size", fc.batch_size, 1));
  fc.lr = r.Number("lr", fc.lr);
  if (!(fc.lr > 0.0)) Fail(r.PathOf("lr"), "must be > 0");
  return fc;
}

TieBreak ParseTieBreak(const json& doc, const std::string& path) {
  Reader r(doc, path, {"kind", "seed", "adversary"});
  const TieBreakKind kind = r.Enum<TieBreakKind>(
      "kind", TieBreakKind::kLowestIndex,
      {{"lowest_index", TieBreakKind::kLowestIndex},
       {"random_seeded", TieBreakKind::kRandomSeeded},
       {"adversarial", TieBreakKind::kAdversarial}});
  TieBreak tb;
  tb.kind = kind;
  if (r.Has("seed")) tb.seed = r.Seed("seed");
  if (kind == TieBreakKind::kAdversarial) {
    const std::string apath = r.PathOf("adversary");
    Reader a(r.Raw("adversary"), apath, {"hard_instance", "policy"});
    if (a.Has("hard_instance")) {
      Reader hi(a.Raw("hard_instance"), a.PathOf("hard_instance"), {"A", "C"});
      tb.adversary = HardInstancePolicy(ActionFromName(hi.Raw("A"), hi.PathOf("A")),
                                        ActionFromName(hi.Raw("C"), hi.PathOf("C")));
    } else if (a.Has("policy")) {
      try {
        tb.adversary = PolicyFromJson(a.Raw("policy"));
      } catch (const std::exception& e) {
        Fail(a.PathOf("policy"), e.what());
      }
    } else {
      Fail(apath, "needs hard_instance or policy");
    }
  } else if (r.Has("adversary")) {
    Fail(r.PathOf("adversary"), "only valid with kind adversarial");
  }
  return tb;
}

EvalConfig ParseEval(const json& doc, const std::string& path) {
  Reader r(doc, path, {"kind", "n_episodes"});
  EvalConfig e;
  e.kind = r.Enum<EvalKind>("kind", EvalKind::kExactDP,
                            {{"exact_dp", EvalKind::kExactDP},
                             {"monte_carlo", EvalKind::kMonteCarlo}});
  e.n_episodes = static_cast<int>(r.Integer("n_episodes", e.n_episodes, 1));
  return e;
}

const std::initializer_list<std::pair<const char*, EnvKind>> kEnvKinds = {
    {"comb_lock", EnvKind::kCombLock},
    {"hard_instance", EnvKind::kHardInstance},
    {"random_tabular", EnvKind::kRandomTabular},
    {"low_rank", EnvKind::kLowRank}};

const std::initializer_list<std::pair<const char*, AlgorithmKind>> kAlgorithmKinds = {
    {"hyq", AlgorithmKind::kHyQ},
    {"offline_fqi", AlgorithmKind::kOfflineFqi},
    {"behavior_cloning", AlgorithmKind::kBehaviorCloning},
    {"online_fqi", AlgorithmKind::kOnlineFqi},
    {"hyq_discounted", AlgorithmKind::kHyQDiscounted}};

template <typename E>
const char* NameOf(E value, std::initializer_list<std::pair<const char*, E>> options) {
  for (const auto& [name, v] : options) {
    if (v == value) return name;
  }
  return "unknown";
}

}  // namespace

ExperimentConfig ParseExperimentConfig(const json& doc) {
  Reader top(doc, "", {"id", "env", "dataset", "algorithm", "replicate_seeds", "output_dir"});
  ExperimentConfig c;
  c.id = top.String("id");
  if (c.id.empty()) Fail("id", "must not be empty");
  c.output_dir = top.String("output_dir", c.id);
  if (c.output_dir.empty() || fs::path(c.output_dir).is_absolute()) {
    Fail("output_dir", "must be a nonempty relative path");
  }

  {
    Reader r(top.Raw("env"), "env",
             {"kind", "horizon", "seed", "noise_std", "variant", "n_states", "n_actions", "rank"});
    EnvSpec& e = c.env;
    if (!r.Has("kind")) Fail("env.kind", "missing required field");
    e.kind = r.Enum<EnvKind>("kind", EnvKind::kCombLock, kEnvKinds);
    e.horizon = static_cast<int>(r.Integer("horizon", e.horizon, 1));
    if (r.Has("seed")) e.seed = r.Seed("seed");
    e.noise_std = r.Number("noise_std", e.noise_std);
    if (e.noise_std < 0.0) Fail("env.noise_std", "must be >= 0");
    e.variant = r.Enum<HardInstanceVariant>(
        "variant", HardInstanceVariant::kM1,
        {{"M1", HardInstanceVariant::kM1}, {"M2", HardInstanceVariant::kM2}});
    e.n_states = static_cast<int>(r.Integer("n_states", e.n_states, 1));
    e.n_actions = static_cast<int>(r.Integer("n_actions", e.n_actions, 1));
    e.rank = static_cast<int>(r.Integer("rank", e.rank, 1));
    if (e.kind == EnvKind::kCombLock && e.horizon < 2) Fail("env.horizon", "lock needs H >= 2");
    if (e.kind == EnvKind::kHardInstance) {
      if (r.Has("horizon") && e.horizon != 2) Fail("env.horizon", "the hard instance has H = 2");
      e.horizon = 2;
    }
    if (e.kind == EnvKind::kLowRank && e.rank > e.n_states) {
      Fail("env.rank", "must be <= n_states");
    }
  }

  if (top.Has("dataset")) {
    Reader r(top.Raw("dataset"), "dataset", {"kind", "m_off", "seed"});
    DatasetSpec& d = c.dataset;
    const std::string kind = r.String("kind");
    try {
      d.kind = DatasetKindFromName(kind);
    } catch (const std::invalid_argument&) {
      Fail("dataset.kind", "unknown value '" + kind + "'");
    }
    if (d.kind != DatasetKind::kEmpty) d.m_off = static_cast<int>(r.Integer("m_off", 1));
    if (r.Has("seed")) d.seed = r.Seed("seed");
    if (d.kind == DatasetKind::kHardInstance && c.env.kind != EnvKind::kHardInstance) {
      Fail("dataset.kind", "hard_instance data needs the hard_instance environment");
    }
  }

  {
    Reader r(top.Raw("algorithm"), "algorithm",
             {"kind", "variant", "T", "m_on", "function_class", "tie_break", "eval",
              "collect_epsilon", "sample_budget", "n_sweeps", "mode", "steps", "lr", "gamma",
              "n_value", "n_target", "epsilon", "beta", "buffer_capacity", "total_steps",
              "minibatch", "record_every", "moving_window"});
    AlgorithmSpec& a = c.algorithm;
    if (!r.Has("kind")) Fail("algorithm.kind", "missing required field");
    a.kind = r.Enum<AlgorithmKind>("kind", AlgorithmKind::kHyQ, kAlgorithmKinds);
    HyQConfig& h = a.hyq;
    h.variant = r.Enum<HyQVariant>("variant", HyQVariant::kQType,
                                   {{"qtype", HyQVariant::kQType}, {"vtype", HyQVariant::kVType}});
    h.T = static_cast<int>(r.Integer("T", h.T, 1));
    h.m_on = static_cast<int>(r.Integer("m_on", h.m_on, 1));
    if (r.Has("function_class")) {
      h.function_class = ParseFunctionClass(r.Raw("function_class"), "algorithm.function_class");
      const json& fc = r.Raw("function_class");
      if (fc.contains("features") && fc["features"] == "low_rank" && c.env.kind != EnvKind::kLowRank) {
        Fail("algorithm.function_class.features", "low_rank features need the low_rank environment");
      }
    }
    if (r.Has("tie_break")) h.tie_break = ParseTieBreak(r.Raw("tie_break"), "algorithm.tie_break");
    if (r.Has("eval")) h.eval = ParseEval(r.Raw("eval"), "algorithm.eval");
    h.collect_epsilon = r.Number("collect_epsilon", 0.0);
    if (h.collect_epsilon < 0.0 || h.collect_epsilon > 1.0) {
      Fail("algorithm.collect_epsilon", "must lie in [0, 1]");
    }
    h.sample_budget = r.Integer("sample_budget", 0, 0);
    a.n_sweeps = static_cast<int>(r.Integer("n_sweeps", a.n_sweeps, 1));
    const std::string mode = r.String("mode", "softmax");
    if (mode != "softmax" && mode != "tabular") {
      Fail("algorithm.mode", "unknown value '" + mode + "' (expected softmax or tabular)");
    }
    a.bc_tabular = mode == "tabular";
    a.bc.steps = static_cast<int>(r.Integer("steps", a.bc.steps, 0));

    DiscountedConfig& d = a.discounted;
    d.gamma = r.Number("gamma", d.gamma);
    if (!(d.gamma >= 0.0 && d.gamma < 1.0)) Fail("algorithm.gamma", "must lie in [0, 1)");
    d.n_value = static_cast<int>(r.Integer("n_value", d.n_value, 1));
    d.n_target = static_cast<int>(r.Integer("n_target", d.n_target, 1));
    std::tie(d.epsilon_start, d.epsilon_end) = r.Pair("epsilon", {d.epsilon_start, d.epsilon_end});
    std::tie(d.beta_start, d.beta_end) = r.Pair("beta", {d.beta_start, d.beta_end});
    if (!(d.beta_end > 0.0) || d.beta_start < d.beta_end || d.beta_start > 1.0) {
      Fail("algorithm.beta", "need 1 >= start >= end > 0");
    }
    if (d.epsilon_start < 0.0 || d.epsilon_start > 1.0 || d.epsilon_end < 0.0 || d.epsilon_end > 1.0) {
      Fail("algorithm.epsilon", "endpoints must lie in [0, 1]");
    }
    d.buffer_capacity = static_cast<size_t>(r.Integer("buffer_capacity", d.buffer_capacity, 1));
    d.total_steps = r.Integer("total_steps", d.total_steps, 0);
    d.minibatch = static_cast<int>(r.Integer("minibatch", d.minibatch, 1));
    d.record_every = static_cast<int>(r.Integer("record_every", d.record_every, 1));
    d.moving_window = static_cast<int>(r.Integer("moving_window", d.moving_window, 1));
    d.function_class = h.function_class.kind;
    if (r.Has("lr")) {
      d.lr = r.Number("lr");
      a.bc.lr = d.lr;
      if (!(d.lr > 0.0)) Fail("algorithm.lr", "must be > 0");
    }

    const bool needs_obs = h.function_class.kind == FunctionClassKind::kLockNet ||
                           (a.kind == AlgorithmKind::kBehaviorCloning && !a.bc_tabular);
    if (needs_obs && c.env.kind != EnvKind::kCombLock) {
      Fail("algorithm", "observation-based learners need the comb_lock environment");
    }
    if (a.kind == AlgorithmKind::kHyQDiscounted &&
        h.function_class.kind == FunctionClassKind::kLinear) {
      Fail("algorithm.function_class.kind", "hyq_discounted supports tabular and locknet");
    }
    const bool needs_data = a.kind == AlgorithmKind::kOfflineFqi ||
                            a.kind == AlgorithmKind::kBehaviorCloning;
    if (needs_data && c.dataset.kind == DatasetKind::kEmpty) {
      Fail("dataset", "this algorithm needs a nonempty offline dataset");
    }
  }

  const json& seeds = top.Raw("replicate_seeds");
  if (!seeds.is_array() || seeds.empty()) Fail("replicate_seeds", "expected a nonempty array");
  for (size_t i = 0; i < seeds.size(); ++i) {
    const std::string p = "replicate_seeds[" + std::to_string(i) + "]";
    if (!seeds[i].is_number_integer() || seeds[i].get<long long>() < 0) {
      Fail(p, "expected a nonnegative integer");
    }
    c.replicate_seeds.push_back(seeds[i].get<uint64_t>());
  }
  return c;
}

ExperimentConfig LoadExperimentConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": invalid JSON: " + e.what());
  }
  return ParseExperimentConfig(doc);
}

json ToJson(const ExperimentConfig& c) {
  json doc;
  doc["id"] = c.id;
  doc["output_dir"] = c.output_dir;
  doc["env"] = {{"kind", NameOf(c.env.kind, kEnvKinds)},
                {"horizon", c.env.horizon},
                {"seed", c.env.seed ? json(*c.env.seed) : json("replicate")},
                {"noise_std", c.env.noise_std},
                {"variant", c.env.variant == HardInstanceVariant::kM1 ? "M1" : "M2"},
                {"n_states", c.env.n_states},
                {"n_actions", c.env.n_actions},
                {"rank", c.env.rank}};
  doc["dataset"] = {{"kind", DatasetKindName(c.dataset.kind)},
                    {"m_off", c.dataset.m_off},
                    {"seed", c.dataset.seed ? json(*c.dataset.seed) : json("replicate")}};
  json a;
  a["kind"] = NameOf(c.algorithm.kind, kAlgorithmKinds);
  a["hyq"] = ToJson(c.algorithm.hyq);
  a["n_sweeps"] = c.algorithm.n_sweeps;
  a["bc"] = {{"mode", c.algorithm.bc_tabular ? "tabular" : "softmax"},
             {"steps", c.algorithm.bc.steps},
             {"lr", c.algorithm.bc.lr}};
  const DiscountedConfig& d = c.algorithm.discounted;
  a["discounted"] = {{"gamma", d.gamma},
                     {"n_value", d.n_value},
                     {"n_target", d.n_target},
                     {"epsilon", {d.epsilon_start, d.epsilon_end}},
                     {"beta", {d.beta_start, d.beta_end}},
                     {"buffer_capacity", d.buffer_capacity},
                     {"total_steps", d.total_steps},
                     {"minibatch", d.minibatch},
                     {"lr", d.lr},
                     {"record_every", d.record_every},
                     {"moving_window", d.moving_window}};
  doc["algorithm"] = std::move(a);
  doc["replicate_seeds"] = c.replicate_seeds;
  return doc;
}

// ---------------------------------------------------------------------------
// Replicates

namespace {

struct BuiltEnv {
  Environment env;
  Policy pi_star;
  std::optional<LowRankFactors> factors;
};

BuiltEnv BuildEnv(const EnvSpec& spec, uint64_t seed) {
  switch (spec.kind) {
    case EnvKind::kCombLock: {
      CombLock lock = make_comb_lock(spec.horizon, seed, spec.noise_std);
      return {Environment::Lock(lock), lock.pi_star, std::nullopt};
    }
    case EnvKind::kHardInstance: {
      HardInstance hi = make_hard_instance(spec.variant);
      return {Environment::Tabular(hi.mdp), hi.pi_star, std::nullopt};
    }
    case EnvKind::kRandomTabular: {
      Rng rng = MakeRng(seed, 61);
      TabularMDP mdp = make_random_mdp(spec.n_states, spec.n_actions, spec.horizon, rng);
      Policy pi = GreedyOf(value_iteration(mdp).q);
      return {Environment::Tabular(std::move(mdp)), std::move(pi), std::nullopt};
    }
    case EnvKind::kLowRank: {
      LowRankInstance lr =
          make_low_rank(spec.rank, spec.n_states, spec.n_actions, spec.horizon, seed);
      Policy pi = GreedyOf(value_iteration(lr.mdp).q);
      return {Environment::Tabular(std::move(lr.mdp)), std::move(pi), std::move(lr.factors)};
    }
  }
  throw std::logic_error("BuildEnv: unknown kind");
}

OfflineDataset BuildDataset(const DatasetSpec& spec, const EnvSpec& env_spec,
                            const BuiltEnv& env, uint64_t seed) {
  const TabularMDP& mdp = env.env.mdp;
  switch (spec.kind) {
    case DatasetKind::kEmpty:
      return OfflineDataset::Empty(mdp.horizon());
    case DatasetKind::kOptimalTrajectory:
      return gen_optimal_trajectory(mdp, env.pi_star, spec.m_off, seed);
    case DatasetKind::kOptimalOccupancy:
      return gen_optimal_occupancy(mdp, env.pi_star, spec.m_off, seed);
    case DatasetKind::kHardInstance:
      return gen_hard_instance_offline(env_spec.variant, spec.m_off, seed);
    case DatasetKind::kFromDistribution: {
      // Uniform over (s, a) at every step.
      StateActionTable nu(mdp.horizon(), mdp.n_states(), mdp.n_actions(),
                          1.0 / (mdp.n_states() * mdp.n_actions()));
      return gen_from_distribution(mdp, nu, spec.m_off, seed);
    }
  }
  throw std::logic_error("BuildDataset: unknown kind");
}

RunRecord SingleValueRecord(double value, long offline_samples, json config) {
  RunRecord r;
  r.rows.push_back({0, 0, offline_samples, value, std::nan(""), std::nan("")});
  r.config = std::move(config);
  return r;
}

void WriteFile(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

}  // namespace

RunRecord RunReplicate(const ExperimentConfig& config, uint64_t seed) {
  const BuiltEnv built = BuildEnv(config.env, config.env.seed.value_or(seed));
  const Environment& env = built.env;
  const OfflineDataset offline =
      BuildDataset(config.dataset, config.env, built, config.dataset.seed.value_or(seed));
  const AlgorithmSpec& a = config.algorithm;
  HyQConfig h = a.hyq;
  h.seed = seed;
  if (h.tie_break.kind == TieBreakKind::kRandomSeeded && !config.algorithm.hyq.tie_break.seed) {
    h.tie_break.seed = seed;
  }
  if (built.factors && h.function_class.kind == FunctionClassKind::kLinear) {
    h.function_class.features = FeaturesFromLowRank(*built.factors);
  }
  json echo = ToJson(config);
  echo["replicate_seed"] = seed;
  Rng eval_rng = MakeRng(seed, 71);
  const long n_off = static_cast<long>(offline.total_size());

  RunRecord record;
  switch (a.kind) {
    case AlgorithmKind::kHyQ:
      record = run_hyq(env, offline, h);
      break;
    case AlgorithmKind::kOnlineFqi:
      record = online_fqi(env, h);
      break;
    case AlgorithmKind::kOfflineFqi: {
      const OfflineFqiResult res =
          offline_fqi(env, offline, h.function_class, a.n_sweeps, h.tie_break, seed);
      record = SingleValueRecord(res.Evaluate(env, h.eval, eval_rng), n_off, echo);
      break;
    }
    case AlgorithmKind::kBehaviorCloning: {
      double value;
      if (a.bc_tabular) {
        const Policy pi = behavior_cloning_tabular(offline, env.mdp.n_states(), env.mdp.n_actions());
        value = h.eval.kind == EvalKind::kExactDP
                    ? policy_value(env.mdp, pi)
                    : MonteCarloReturn(
                          env, [&](int hh, int s, std::span<const double>) { return pi.Action(hh, s); },
                          h.eval.n_episodes, eval_rng);
      } else {
        const SoftmaxPolicy pi = behavior_cloning_softmax(env, offline, a.bc, seed);
        value = MonteCarloReturn(
            env, [&](int hh, int, std::span<const double> x) { return pi.Act(hh, x); },
            h.eval.n_episodes, eval_rng);
      }
      record = SingleValueRecord(value, n_off, echo);
      break;
    }
    case AlgorithmKind::kHyQDiscounted: {
      DiscountedConfig d = a.discounted;
      d.seed = seed;
      d.function_class = h.function_class.kind;
      record = hyq_discounted(env, offline, d);
      break;
    }
  }
  record.config = std::move(echo);
  return record;
}

double Quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("Quantile: no values");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

AggregateCurve Aggregate(std::span<const RunRecord> records) {
  AggregateCurve curve;
  if (records.empty()) return curve;
  size_t n_rows = records.front().rows.size();
  for (const RunRecord& r : records) n_rows = std::min(n_rows, r.rows.size());
  for (size_t i = 0; i < n_rows; ++i) {
    std::vector<double> xs, ys;
    for (const RunRecord& r : records) {
      xs.push_back(static_cast<double>(r.rows[i].samples()));
      ys.push_back(r.rows[i].eval_return);
    }
    curve.points.push_back({Quantile(xs, 0.5), Quantile(ys, 0.5), Quantile(ys, 0.2),
                            Quantile(ys, 0.8)});
  }
  return curve;
}

std::string AggregateToCsv(const AggregateCurve& curve) {
  std::ostringstream out;
  out << "x,median,p20,p80\n";
  for (const AggregatePoint& p : curve.points) {
    out << FormatDouble(p.x) << ',' << FormatDouble(p.median) << ',' << FormatDouble(p.p20)
        << ',' << FormatDouble(p.p80) << '\n';
  }
  return out.str();
}

AggregateCurve AggregateFromCsv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("aggregate CSV: empty file");
  // Locate the needed columns by name.
  std::vector<std::string> header;
  {
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) header.push_back(cell);
  }
  auto col = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::invalid_argument("aggregate CSV: missing column " + name);
    return static_cast<size_t>(it - header.begin());
  };
  const size_t cx = col("x"), cm = col("median"), c20 = col("p20"), c80 = col("p80");
  AggregateCurve curve;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != header.size()) {
      throw std::invalid_argument("aggregate CSV: line " + std::to_string(line_no) +
                                  " has the wrong number of fields");
    }
    curve.points.push_back({ParseDouble(cells[cx]), ParseDouble(cells[cm]),
                            ParseDouble(cells[c20]), ParseDouble(cells[c80])});
  }
  return curve;
}

std::string OutputRootFromEnv() {
  const char* v = std::getenv(kOutputRootEnv);
  return v && *v ? std::string(v) : std::string("out");
}

ExperimentResult run_experiment(const ExperimentConfig& config, const std::string& output_root) {
  ExperimentResult result;
  for (uint64_t seed : config.replicate_seeds) {
    try {
      result.records.push_back(RunReplicate(config, seed));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ReplicateError(seed, e.what());
    }
  }
  result.aggregate = Aggregate(result.records);
  if (output_root.empty()) return result;

  const fs::path dir = fs::path(output_root) / config.output_dir;
  fs::create_directories(dir);
  for (size_t i = 0; i < result.records.size(); ++i) {
    const fs::path p = dir / ("replicate_" + std::to_string(config.replicate_seeds[i]) + ".csv");
    WriteFile(p, RunRecordToCsv(result.records[i]));
    result.written_files.push_back(p.string());
  }
  const fs::path agg = dir / "aggregate.csv";
  WriteFile(agg, AggregateToCsv(result.aggregate));
  result.written_files.push_back(agg.string());

  json echo = ToJson(config);
  echo["tool_version"] = kToolVersion;
  json finals = json::array();
  for (size_t i = 0; i < result.records.size(); ++i) {
    const RunRecord& r = result.records[i];
    finals.push_back({{"seed", config.replicate_seeds[i]},
                      {"final_return", r.final_return()},
                      {"empty_offline_warning", r.empty_offline_warning}});
  }
  echo["replicates"] = std::move(finals);
  const fs::path cfg = dir / "config.json";
  WriteFile(cfg, echo.dump(2) + "\n");
  result.written_files.push_back(cfg.string());
  return result;
}

// ---------------------------------------------------------------------------
// Property corpus

namespace {

StateActionTable RandomTable(int H, int S, int A, double hi, Rng& rng) {
  StateActionTable f(H, S, A);
  for (double& v : f.data()) v = hi * Uniform01(rng);
  return f;
}

TabularMDP RandomCorpusMdp(Rng& rng) {
  const int S = 1 + UniformInt(rng, 6);
  const int A = 1 + UniformInt(rng, 4);
  const int H = 1 + UniformInt(rng, 6);
  RandomMdpOptions opts;
  opts.bernoulli_rewards = UniformInt(rng, 2) == 1;
  opts.sparsity = UniformInt(rng, 2) == 1 ? 0.4 : 0.0;
  return make_random_mdp(S, A, H, rng, opts);
}

json TableJson(const StateActionTable& t) {
  return {{"horizon", t.horizon()},
          {"n_states", t.n_states()},
          {"n_actions", t.n_actions()},
          {"values", std::vector<double>(t.data().begin(), t.data().end())}};
}

}  // namespace

IdentityCase MakeIdentityCase(Rng& rng) {
  TabularMDP mdp = RandomCorpusMdp(rng);
  const int H = mdp.horizon(), S = mdp.n_states(), A = mdp.n_actions();
  StateActionTable f = RandomTable(H, S, A, mdp.v_max(), rng);
  StateActionTable g = RandomTable(H, S, A, mdp.v_max(), rng);
  Policy pi_e = make_random_policy(H, S, A, rng, UniformInt(rng, 2) == 1);
  return {std::move(mdp), std::move(f), std::move(g), std::move(pi_e)};
}

ChainCase MakeChainCase(Rng& rng) {
  TabularMDP mdp = RandomCorpusMdp(rng);
  const int H = mdp.horizon(), S = mdp.n_states(), A = mdp.n_actions();
  Policy pi = make_random_policy(H, S, A, rng, UniformInt(rng, 2) == 1);
  StateActionTable nu(H, S, A, 1.0 / (S * A));
  std::vector<StateActionTable> f_class{value_iteration(mdp).q};
  for (int k = 0; k < 4; ++k) f_class.push_back(RandomTable(H, S, A, mdp.v_max(), rng));
  return {std::move(mdp), std::move(pi), std::move(nu), std::move(f_class)};
}

EllipticalCase MakeEllipticalCase(Rng& rng) {
  const int d = 1 + UniformInt(rng, 8);
  const int T = 1 + UniformInt(rng, 500);
  const double scale = std::exp(4.0 * Uniform01(rng) - 2.0);
  EllipticalCase c;
  double bx2 = 0.0;
  for (int t = 0; t < T; ++t) {
    Eigen::VectorXd x(d);
    for (int k = 0; k < d; ++k) x[k] = scale * StandardNormal(rng);
    bx2 = std::max(bx2, x.squaredNorm());
    c.xs.push_back(std::move(x));
  }
  // Either the tight precondition or a looser one.
  c.lambda = UniformInt(rng, 2) == 0 ? bx2 : bx2 * (1.0 + 3.0 * Uniform01(rng));
  if (c.lambda <= 0.0) c.lambda = 1.0;
  return c;
}

PropertyReport run_property_suite(const PropertyOptions& options) {
  if (options.corpus < 1) throw std::invalid_argument("property suite: corpus must be >= 1");
  PropertyReport report;
  report.seed = options.seed;
  report.corpus = options.corpus;

  PropertyCheck fixed{"value_iteration_fixed_point"}, occ{"occupancy_matches_backward_dp"},
      perf{"performance_difference_equality"}, opt{"optimism_inequality"},
      bil{"bilinear_identity"}, ell{"elliptical_potential"},
      chain{"density_ratio_chain_corrected"}, stated{"density_ratio_chain_stated"};
  stated.informational = true;

  auto reproducer = [&](PropertyCheck& check, int case_index, json body) {
    if (check.failures > 1 || options.output_dir.empty()) return;
    body["check"] = check.name;
    body["case"] = case_index;
    body["seed"] = options.seed;
    fs::create_directories(options.output_dir);
    const fs::path p = fs::path(options.output_dir) / ("reproducer_" + check.name + ".json");
    WriteFile(p, body.dump(2) + "\n");
    report.reproducers.push_back(p.string());
  };

  Rng rng = MakeRng(options.seed, 81);
  for (int i = 0; i < options.corpus; ++i) {
    const IdentityCase c = MakeIdentityCase(rng);
    const int H = c.mdp.horizon();
    auto base = [&]() { return json{{"mdp", ToJson(c.mdp)}, {"f", TableJson(c.f)}}; };

    const OptimalValues opt_v = value_iteration(c.mdp);
    const BellmanResidual star = bellman_residual(c.mdp, opt_v.q);
    double worst_fp = 0.0;
    for (double e : star.eps.data()) worst_fp = std::max(worst_fp, std::abs(e));
    ++fixed.cases;
    fixed.worst = std::max(fixed.worst, worst_fp);
    if (worst_fp > 1e-10) {
      ++fixed.failures;
      reproducer(fixed, i, base());
    }

    const double via_occ = policy_value(c.mdp, c.pi_e);
    const double via_dp = InitialValue(c.mdp, evaluate_policy(c.mdp, c.pi_e).v);
    ++occ.cases;
    occ.worst = std::max(occ.worst, std::abs(via_occ - via_dp));
    if (std::abs(via_occ - via_dp) > 1e-10) {
      ++occ.failures;
      json b = base();
      b["pi"] = ToJson(c.pi_e);
      reproducer(occ, i, b);
    }

    IdentityCheck pd = perf_diff_check(c.mdp, c.f);
    if (options.inject_fault && i == 0) {
      pd.rhs += 1e-3;
      pd.gap = std::abs(pd.lhs - pd.rhs);
    }
    ++perf.cases;
    perf.worst = std::max(perf.worst, pd.gap);
    if (pd.gap > 1e-9) {
      ++perf.failures;
      json b = base();
      b["lhs"] = pd.lhs;
      b["rhs"] = pd.rhs;
      reproducer(perf, i, b);
    }

    const InequalityCheck oc = optimism_check(c.mdp, c.f, c.pi_e);
    ++opt.cases;
    opt.worst = std::max(opt.worst, oc.lhs - oc.rhs);
    if (!oc.holds) {
      ++opt.failures;
      json b = base();
      b["pi_e"] = ToJson(c.pi_e);
      reproducer(opt, i, b);
    }

    double worst_bil = 0.0;
    for (const BilinearStep& s : bilinear_verify(c.mdp, c.f, c.g)) {
      worst_bil = std::max(worst_bil, std::abs(s.lhs - s.rhs));
    }
    ++bil.cases;
    bil.worst = std::max(bil.worst, worst_bil);
    if (worst_bil > 1e-12) {
      ++bil.failures;
      json b = base();
      b["g"] = TableJson(c.g);
      reproducer(bil, i, b);
    }
    (void)H;
  }

  Rng erng = MakeRng(options.seed, 82);
  for (int i = 0; i < options.corpus; ++i) {
    const EllipticalCase c = MakeEllipticalCase(erng);
    const EllipticalCheck e = elliptical_potential_check(c.xs, c.lambda);
    ++ell.cases;
    ell.worst = std::max(ell.worst, e.lhs - e.rhs);
    if (!e.holds) {
      ++ell.failures;
      json xs = json::array();
      for (const auto& x : c.xs) xs.push_back(std::vector<double>(x.data(), x.data() + x.size()));
      reproducer(ell, i, {{"lambda", c.lambda}, {"xs", xs}});
    }
  }

  Rng crng = MakeRng(options.seed, 83);
  const int n_chain = std::min(options.corpus, 100);
  for (int i = 0; i < n_chain; ++i) {
    const ChainCase c = MakeChainCase(crng);
    const DensityRatioChain r = density_ratio_chain(c.mdp, c.pi, c.nu, c.f_class);
    auto body = [&]() {
      json fs_json = json::array();
      for (const auto& f : c.f_class) fs_json.push_back(TableJson(f));
      return json{{"mdp", ToJson(c.mdp)}, {"pi", ToJson(c.pi)}, {"f_class", fs_json},
                  {"nu", "uniform"}, {"report", ToJson(r)}};
    };
    ++chain.cases;
    ++stated.cases;
    if (!r.corrected_chain_holds) {
      ++chain.failures;
      reproducer(chain, i, body());
    }
    if (!r.stated_chain_holds) {
      ++stated.failures;
      if (!r.c_pi.is_infinite() && !r.norm_ratio_bound.is_infinite()) {
        stated.worst = std::max(stated.worst, r.c_pi.value() - r.norm_ratio_bound.value());
      }
      reproducer(stated, i, body());
    }
  }

  report.checks = {fixed, occ, perf, opt, bil, ell, chain, stated};
  for (const PropertyCheck& c : report.checks) {
    if (c.failures > 0 && !c.informational) report.passed = false;
  }
  return report;
}

json ToJson(const PropertyReport& report) {
  json checks = json::array();
  for (const PropertyCheck& c : report.checks) {
    checks.push_back({{"name", c.name},
                      {"cases", c.cases},
                      {"failures", c.failures},
                      {"worst", c.worst},
                      {"informational", c.informational}});
  }
  return {{"seed", report.seed},
          {"corpus", report.corpus},
          {"passed", report.passed},
          {"checks", checks},
          {"reproducers", report.reproducers},
          {"tool_version", kToolVersion}};
}

// ---------------------------------------------------------------------------
// SVG

namespace {

std::string Fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string Tick(double v) {
  char buf[32];
  if (std::abs(v) >= 1e6) {
    std::snprintf(buf, sizeof(buf), "%.3gM", v / 1e6);
  } else if (std::abs(v) >= 1e3) {
    std::snprintf(buf, sizeof(buf), "%.3gk", v / 1e3);
  } else {
    std::snprintf(buf, sizeof(buf), "%.3g", v);
  }
  return buf;
}

std::string Escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// 1, 2 or 5 times a power of ten, at least span / 5.
double NiceStep(double span) {
  if (!(span > 0.0)) return 1.0;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) return m * mag;
  }
  return 10.0 * mag;
}

}  // namespace

std::string PlotSvg(const AggregateCurve& curve, std::span<const BaselineLine> baselines) {
  const double W = 720, Ht = 440, left = 70, right = 170, top = 30, bottom = 60;
  const double pw = W - left - right, ph = Ht - top - bottom;

  double xmax = 0.0, ymax = 1.0;
  for (const AggregatePoint& p : curve.points) {
    xmax = std::max(xmax, p.x);
    ymax = std::max(ymax, p.p80);
  }
  for (const BaselineLine& b : baselines) ymax = std::max(ymax, b.value);
  const double xstep = NiceStep(xmax > 0.0 ? xmax : 1.0);
  xmax = xmax > 0.0 ? std::ceil(xmax / xstep) * xstep : 5.0 * xstep;
  const double ystep = NiceStep(ymax);
  ymax = std::ceil(ymax / ystep) * ystep;

  auto X = [&](double x) { return left + pw * x / xmax; };
  auto Y = [&](double y) { return top + ph * (1.0 - y / ymax); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << Ht
    << "\" viewBox=\"0 0 " << W << ' ' << Ht << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << Ht << "\" fill=\"white\"/>\n";
  // Axes and ticks.
  o << "<g stroke=\"#333\" stroke-width=\"1\">\n";
  o << "<line x1=\"" << Fixed(left) << "\" y1=\"" << Fixed(top + ph) << "\" x2=\"" << Fixed(left + pw)
    << "\" y2=\"" << Fixed(top + ph) << "\"/>\n";
  o << "<line x1=\"" << Fixed(left) << "\" y1=\"" << Fixed(top) << "\" x2=\"" << Fixed(left)
    << "\" y2=\"" << Fixed(top + ph) << "\"/>\n";
  o << "</g>\n<g fill=\"#333\">\n";
  for (int i = 0; i * xstep <= xmax + 1e-9 * xmax; ++i) {
    const double x = i * xstep;
    o << "<line x1=\"" << Fixed(X(x)) << "\" y1=\"" << Fixed(top + ph) << "\" x2=\"" << Fixed(X(x))
      << "\" y2=\"" << Fixed(top + ph + 5) << "\" stroke=\"#333\"/>\n";
    o << "<text x=\"" << Fixed(X(x)) << "\" y=\"" << Fixed(top + ph + 20)
      << "\" text-anchor=\"middle\">" << Tick(x) << "</text>\n";
  }
  for (int i = 0; i * ystep <= ymax + 1e-9 * ymax; ++i) {
    const double y = i * ystep;
    o << "<line x1=\"" << Fixed(left - 5) << "\" y1=\"" << Fixed(Y(y)) << "\" x2=\"" << Fixed(left)
      << "\" y2=\"" << Fixed(Y(y)) << "\" stroke=\"#333\"/>\n";
    o << "<text x=\"" << Fixed(left - 8) << "\" y=\"" << Fixed(Y(y) + 4)
      << "\" text-anchor=\"end\">" << Tick(y) << "</text>\n";
  }
  o << "<text x=\"" << Fixed(left + pw / 2) << "\" y=\"" << Fixed(Ht - 15)
    << "\" text-anchor=\"middle\">samples</text>\n";
  o << "<text x=\"18\" y=\"" << Fixed(top + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
    << Fixed(top + ph / 2) << ")\">return</text>\n";
  o << "</g>\n";

  if (curve.points.empty()) {
    o << "<text x=\"" << Fixed(left + pw / 2) << "\" y=\"" << Fixed(top + ph / 2)
      << "\" text-anchor=\"middle\" fill=\"#999\">no data</text>\n";
  } else if (curve.points.size() == 1) {
    const AggregatePoint& p = curve.points.front();
    o << "<line x1=\"" << Fixed(X(p.x)) << "\" y1=\"" << Fixed(Y(p.p20)) << "\" x2=\"" << Fixed(X(p.x))
      << "\" y2=\"" << Fixed(Y(p.p80)) << "\" stroke=\"#1f77b4\" stroke-opacity=\"0.4\" stroke-width=\"6\"/>\n";
    o << "<circle cx=\"" << Fixed(X(p.x)) << "\" cy=\"" << Fixed(Y(p.median))
      << "\" r=\"4\" fill=\"#1f77b4\"/>\n";
  } else {
    o << "<polygon fill=\"#1f77b4\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
    for (const AggregatePoint& p : curve.points) o << Fixed(X(p.x)) << ',' << Fixed(Y(p.p80)) << ' ';
    for (auto it = curve.points.rbegin(); it != curve.points.rend(); ++it) {
      o << Fixed(X(it->x)) << ',' << Fixed(Y(it->p20)) << ' ';
    }
    o << "\"/>\n<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
    for (const AggregatePoint& p : curve.points) o << Fixed(X(p.x)) << ',' << Fixed(Y(p.median)) << ' ';
    o << "\"/>\n";
  }

  static const char* kColors[] = {"#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"};
  double legend_y = top + 14;
  o << "<text x=\"" << Fixed(left + pw + 12) << "\" y=\"" << Fixed(legend_y)
    << "\" fill=\"#1f77b4\">Hy-Q median (20/80)</text>\n";
  for (size_t i = 0; i < baselines.size(); ++i) {
    const char* color = kColors[i % 5];
    const double y = Y(baselines[i].value);
    o << "<line x1=\"" << Fixed(left) << "\" y1=\"" << Fixed(y) << "\" x2=\"" << Fixed(left + pw)
      << "\" y2=\"" << Fixed(y) << "\" stroke=\"" << color
      << "\" stroke-width=\"1.5\" stroke-dasharray=\"6,4\"/>\n";
    legend_y += 18;
    o << "<text x=\"" << Fixed(left + pw + 12) << "\" y=\"" << Fixed(legend_y) << "\" fill=\""
      << color << "\">" << Escape(baselines[i].name) << " (" << Tick(baselines[i].value)
      << ")</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace hyq
