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

#include "hyq/mdp.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace hyq {

using nlohmann::json;

void ValidateProbabilities(std::span<double> probs, const char* what) {
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw std::invalid_argument(std::string(what) +
                                  ": negative or non-finite probability");
    }
    sum += p;
  }
  const double drift = std::abs(sum - 1.0);
  if (drift > kRenormalizeTolerance) {
    throw std::invalid_argument(std::string(what) + ": sums to " +
                                std::to_string(sum) + ", not 1");
  }
  if (drift > 0.0) {
    for (double& p : probs) p /= sum;
  }
}

// ---------------------------------------------------------------------------
// Tables

StateActionTable::StateActionTable(int horizon, int n_states, int n_actions,
                                   double fill)
    : horizon_(horizon),
      n_states_(n_states),
      n_actions_(n_actions),
      data_(static_cast<size_t>(horizon) * n_states * n_actions, fill) {}

std::span<double> StateActionTable::slice(int h) {
  return std::span<double>(data_).subspan(Index(h, 0, 0),
                                          static_cast<size_t>(n_states_) * n_actions_);
}

std::span<const double> StateActionTable::slice(int h) const {
  return std::span<const double>(data_).subspan(
      Index(h, 0, 0), static_cast<size_t>(n_states_) * n_actions_);
}

std::span<double> StateActionTable::row(int h, int s) {
  return std::span<double>(data_).subspan(Index(h, s, 0), n_actions_);
}

std::span<const double> StateActionTable::row(int h, int s) const {
  return std::span<const double>(data_).subspan(Index(h, s, 0), n_actions_);
}

StateTable::StateTable(int horizon, int n_states, double fill)
    : horizon_(horizon),
      n_states_(n_states),
      data_(static_cast<size_t>(horizon) * n_states, fill) {}

std::span<const double> StateTable::slice(int h) const {
  return std::span<const double>(data_).subspan(
      static_cast<size_t>(h) * n_states_, n_states_);
}

// ---------------------------------------------------------------------------
// Rewards

double Reward::Sample(Rng& rng) const {
  if (kind == Kind::kDeterministic) return param;
  return Uniform01(rng) < param ? 1.0 : 0.0;
}

bool Reward::InSupport(double r) const {
  if (kind == Kind::kDeterministic) return r == param;
  if (r == 1.0) return param > 0.0;
  if (r == 0.0) return param < 1.0;
  return false;
}

// ---------------------------------------------------------------------------
// TabularMDP

TabularMDP::TabularMDP(int horizon, int n_states, int n_actions,
                       std::vector<double> transition,
                       std::vector<Reward> rewards,
                       std::vector<double> init_dist,
                       std::optional<double> v_max)
    : horizon_(horizon),
      n_states_(n_states),
      n_actions_(n_actions),
      transition_(std::move(transition)),
      rewards_(std::move(rewards)),
      init_dist_(std::move(init_dist)),
      v_max_(v_max.value_or(static_cast<double>(horizon))),
      v_max_override_(v_max.has_value()) {
  if (horizon <= 0 || n_states <= 0 || n_actions <= 0) {
    throw std::invalid_argument("TabularMDP: dimensions must be positive");
  }
  const size_t n_sa = static_cast<size_t>(horizon) * n_states * n_actions;
  if (transition_.size() != n_sa * n_states) {
    throw std::invalid_argument("TabularMDP: transition tensor has wrong size");
  }
  if (rewards_.size() != n_sa) {
    throw std::invalid_argument("TabularMDP: reward table has wrong size");
  }
  if (init_dist_.size() != static_cast<size_t>(n_states)) {
    throw std::invalid_argument("TabularMDP: init_dist has wrong size");
  }
  for (size_t row = 0; row < n_sa; ++row) {
    ValidateProbabilities(
        std::span<double>(transition_).subspan(row * n_states, n_states),
        "TabularMDP transition row");
  }
  for (const Reward& r : rewards_) {
    if (!(r.param >= 0.0 && r.param <= 1.0)) {
      throw std::invalid_argument("TabularMDP: reward mean outside [0, 1]");
    }
  }
  ValidateProbabilities(init_dist_, "TabularMDP init_dist");
  if (!(v_max_ > 0.0) || !std::isfinite(v_max_)) {
    throw std::invalid_argument("TabularMDP: v_max must be positive");
  }
}

std::span<const double> TabularMDP::next_state_dist(int h, int s, int a) const {
  const size_t row = (static_cast<size_t>(h) * n_states_ + s) * n_actions_ + a;
  return std::span<const double>(transition_).subspan(row * n_states_, n_states_);
}

StateActionTable TabularMDP::RewardMeans() const {
  StateActionTable means(horizon_, n_states_, n_actions_);
  for (size_t i = 0; i < rewards_.size(); ++i) means.data()[i] = rewards_[i].mean();
  return means;
}

// ---------------------------------------------------------------------------
// Policy

Policy::Policy(StateActionTable probs) : probs_(std::move(probs)) {
  for (int h = 0; h < probs_.horizon(); ++h) {
    for (int s = 0; s < probs_.n_states(); ++s) {
      ValidateProbabilities(probs_.row(h, s), "Policy row");
    }
  }
}

Policy Policy::Uniform(int horizon, int n_states, int n_actions) {
  return Policy(StateActionTable(horizon, n_states, n_actions, 1.0 / n_actions));
}

Policy Policy::Deterministic(int horizon, int n_states, int n_actions,
                             std::span<const int> actions) {
  if (actions.size() != static_cast<size_t>(horizon) * n_states) {
    throw std::invalid_argument("Policy::Deterministic: wrong number of actions");
  }
  StateActionTable probs(horizon, n_states, n_actions, 0.0);
  for (int h = 0; h < horizon; ++h) {
    for (int s = 0; s < n_states; ++s) {
      const int a = actions[h * n_states + s];
      if (a < 0 || a >= n_actions) {
        throw std::invalid_argument("Policy::Deterministic: action out of range");
      }
      probs(h, s, a) = 1.0;
    }
  }
  return Policy(std::move(probs));
}

bool Policy::IsDeterministic() const {
  return std::all_of(probs_.data().begin(), probs_.data().end(),
                     [](double p) { return p == 0.0 || p == 1.0; });
}

int Policy::Action(int h, int s) const {
  const auto r = row(h, s);
  return static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
}

int Policy::Sample(int h, int s, Rng& rng) const {
  return SampleCategorical(rng, row(h, s));
}

std::vector<double> OccupancyMeasure::StateMarginal(int h) const {
  std::vector<double> marginal(table_.n_states(), 0.0);
  for (int s = 0; s < table_.n_states(); ++s) {
    for (double p : table_.row(h, s)) marginal[s] += p;
  }
  return marginal;
}

// ---------------------------------------------------------------------------
// Dynamic programming

std::vector<double> bellman_backup(const TabularMDP& mdp,
                                   std::span<const double> f_next, int h) {
  const int S = mdp.n_states();
  const int A = mdp.n_actions();
  if (h < 0 || h >= mdp.horizon()) {
    throw std::out_of_range("bellman_backup: step out of range");
  }
  const bool terminal = (h == mdp.horizon() - 1);
  std::vector<double> next_v(S, 0.0);
  if (!terminal) {
    if (f_next.size() != static_cast<size_t>(S) * A) {
      throw std::invalid_argument("bellman_backup: f_next has wrong size");
    }
    for (int s = 0; s < S; ++s) {
      next_v[s] = *std::max_element(f_next.begin() + s * A,
                                    f_next.begin() + (s + 1) * A);
    }
  }
  std::vector<double> out(static_cast<size_t>(S) * A);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      double v = mdp.reward_mean(h, s, a);
      if (!terminal) {
        const auto p = mdp.next_state_dist(h, s, a);
        for (int s2 = 0; s2 < S; ++s2) v += p[s2] * next_v[s2];
      }
      out[s * A + a] = v;
    }
  }
  return out;
}

OptimalValues value_iteration(const TabularMDP& mdp) {
  const int H = mdp.horizon();
  const int S = mdp.n_states();
  const int A = mdp.n_actions();
  OptimalValues out{StateActionTable(H, S, A), StateTable(H, S)};
  for (int h = H - 1; h >= 0; --h) {
    std::span<const double> next;
    if (h + 1 < H) next = out.q.slice(h + 1);
    const auto backed = bellman_backup(mdp, next, h);
    std::copy(backed.begin(), backed.end(), out.q.slice(h).begin());
    for (int s = 0; s < S; ++s) {
      const auto r = out.q.row(h, s);
      out.v(h, s) = *std::max_element(r.begin(), r.end());
    }
  }
  return out;
}

OccupancyMeasure occupancy(const TabularMDP& mdp, const Policy& pi) {
  const int H = mdp.horizon();
  const int S = mdp.n_states();
  const int A = mdp.n_actions();
  if (pi.horizon() != H || pi.n_states() != S || pi.n_actions() != A) {
    throw std::invalid_argument("occupancy: policy shape does not match MDP");
  }
  StateActionTable d(H, S, A);
  std::vector<double> state_dist(mdp.init_dist().begin(), mdp.init_dist().end());
  for (int h = 0; h < H; ++h) {
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) d(h, s, a) = state_dist[s] * pi.prob(h, s, a);
    }
    if (h + 1 == H) break;
    std::vector<double> next(S, 0.0);
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const double mass = d(h, s, a);
        if (mass == 0.0) continue;
        const auto p = mdp.next_state_dist(h, s, a);
        for (int s2 = 0; s2 < S; ++s2) next[s2] += mass * p[s2];
      }
    }
    state_dist = std::move(next);
  }
  return OccupancyMeasure(std::move(d));
}

double policy_value(const TabularMDP& mdp, const Policy& pi) {
  const OccupancyMeasure d = occupancy(mdp, pi);
  double value = 0.0;
  for (int h = 0; h < mdp.horizon(); ++h) {
    for (int s = 0; s < mdp.n_states(); ++s) {
      for (int a = 0; a < mdp.n_actions(); ++a) {
        value += d(h, s, a) * mdp.reward_mean(h, s, a);
      }
    }
  }
  return value;
}

PolicyValues evaluate_policy(const TabularMDP& mdp, const Policy& pi) {
  const int H = mdp.horizon();
  const int S = mdp.n_states();
  const int A = mdp.n_actions();
  PolicyValues out{StateActionTable(H, S, A), StateTable(H, S)};
  for (int h = H - 1; h >= 0; --h) {
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        double q = mdp.reward_mean(h, s, a);
        if (h + 1 < H) {
          const auto p = mdp.next_state_dist(h, s, a);
          for (int s2 = 0; s2 < S; ++s2) q += p[s2] * out.v(h + 1, s2);
        }
        out.q(h, s, a) = q;
      }
      double v = 0.0;
      for (int a = 0; a < A; ++a) v += pi.prob(h, s, a) * out.q(h, s, a);
      out.v(h, s) = v;
    }
  }
  return out;
}

double InitialValue(const TabularMDP& mdp, const StateTable& v) {
  double total = 0.0;
  for (int s = 0; s < mdp.n_states(); ++s) total += mdp.init_dist()[s] * v(0, s);
  return total;
}

std::vector<Transition> sample_episode(const TabularMDP& mdp, const Policy& pi,
                                       Rng& rng) {
  std::vector<Transition> episode;
  episode.reserve(mdp.horizon());
  int s = SampleCategorical(rng, mdp.init_dist());
  for (int h = 0; h < mdp.horizon(); ++h) {
    Transition t;
    t.h = h;
    t.s = s;
    t.a = pi.Sample(h, s, rng);
    t.r = mdp.reward(h, s, t.a).Sample(rng);
    t.s_next = (h + 1 < mdp.horizon())
                   ? SampleCategorical(rng, mdp.next_state_dist(h, s, t.a))
                   : kTerminalState;
    episode.push_back(t);
    s = t.s_next;
  }
  return episode;
}

double EpisodeReturn(std::span<const Transition> episode) {
  double total = 0.0;
  for (const Transition& t : episode) total += t.r;
  return total;
}

// ---------------------------------------------------------------------------
// JSON

json ToJson(const TabularMDP& mdp) {
  const int H = mdp.horizon();
  const int S = mdp.n_states();
  const int A = mdp.n_actions();
  json transition = json::array();
  json rewards = json::array();
  for (int h = 0; h < H; ++h) {
    json t_h = json::array();
    json r_h = json::array();
    for (int s = 0; s < S; ++s) {
      json t_s = json::array();
      json r_s = json::array();
      for (int a = 0; a < A; ++a) {
        const auto p = mdp.next_state_dist(h, s, a);
        t_s.push_back(std::vector<double>(p.begin(), p.end()));
        const Reward& r = mdp.reward(h, s, a);
        r_s.push_back({{"kind", r.kind == Reward::Kind::kDeterministic
                                    ? "deterministic"
                                    : "bernoulli"},
                       {"value", r.param}});
      }
      t_h.push_back(std::move(t_s));
      r_h.push_back(std::move(r_s));
    }
    transition.push_back(std::move(t_h));
    rewards.push_back(std::move(r_h));
  }
  json doc = {{"horizon", H},
              {"n_states", S},
              {"n_actions", A},
              {"transition", std::move(transition)},
              {"rewards", std::move(rewards)},
              {"init_dist", std::vector<double>(mdp.init_dist().begin(),
                                                mdp.init_dist().end())}};
  if (mdp.has_v_max_override()) doc["v_max"] = mdp.v_max();
  return doc;
}

TabularMDP MdpFromJson(const json& doc) {
  const int H = doc.at("horizon").get<int>();
  const int S = doc.at("n_states").get<int>();
  const int A = doc.at("n_actions").get<int>();
  std::vector<double> transition;
  std::vector<Reward> rewards;
  transition.reserve(static_cast<size_t>(H) * S * A * S);
  rewards.reserve(static_cast<size_t>(H) * S * A);
  const json& t = doc.at("transition");
  const json& r = doc.at("rewards");
  for (int h = 0; h < H; ++h) {
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const auto row = t.at(h).at(s).at(a).get<std::vector<double>>();
        if (row.size() != static_cast<size_t>(S)) {
          throw std::invalid_argument("MdpFromJson: transition row has wrong size");
        }
        transition.insert(transition.end(), row.begin(), row.end());
        const json& rec = r.at(h).at(s).at(a);
        const std::string kind = rec.at("kind").get<std::string>();
        const double value = rec.at("value").get<double>();
        if (kind == "deterministic") {
          rewards.push_back(Reward::Deterministic(value));
        } else if (kind == "bernoulli") {
          rewards.push_back(Reward::Bernoulli(value));
        } else {
          throw std::invalid_argument("MdpFromJson: unknown reward kind " + kind);
        }
      }
    }
  }
  std::optional<double> v_max;
  if (doc.contains("v_max")) v_max = doc.at("v_max").get<double>();
  return TabularMDP(H, S, A, std::move(transition), std::move(rewards),
                    doc.at("init_dist").get<std::vector<double>>(), v_max);
}

json ToJson(const Policy& pi) {
  json rows = json::array();
  for (int h = 0; h < pi.horizon(); ++h) {
    json per_h = json::array();
    for (int s = 0; s < pi.n_states(); ++s) {
      const auto r = pi.row(h, s);
      per_h.push_back(std::vector<double>(r.begin(), r.end()));
    }
    rows.push_back(std::move(per_h));
  }
  return {{"horizon", pi.horizon()},
          {"n_states", pi.n_states()},
          {"n_actions", pi.n_actions()},
          {"probs", std::move(rows)}};
}

Policy PolicyFromJson(const json& doc) {
  const int H = doc.at("horizon").get<int>();
  const int S = doc.at("n_states").get<int>();
  const int A = doc.at("n_actions").get<int>();
  StateActionTable probs(H, S, A);
  for (int h = 0; h < H; ++h) {
    for (int s = 0; s < S; ++s) {
      const auto row = doc.at("probs").at(h).at(s).get<std::vector<double>>();
      if (row.size() != static_cast<size_t>(A)) {
        throw std::invalid_argument("PolicyFromJson: row has wrong size");
      }
      std::copy(row.begin(), row.end(), probs.row(h, s).begin());
    }
  }
  return Policy(std::move(probs));
}

}  // namespace hyq
