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

#include "hyq/envs.h"

#include <cmath>
#include <stdexcept>
#include <string>

namespace hyq {

using nlohmann::json;

namespace {

// Flat Dirichlet(1, ..., 1) draw.
std::vector<double> SimplexDraw(Rng& rng, int n) {
  std::vector<double> v(n);
  double sum = 0.0;
  for (double& x : v) {
    x = -std::log(1.0 - Uniform01(rng));
    sum += x;
  }
  for (double& x : v) x /= sum;
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// Combination lock

int LockObservationDim(int horizon) {
  const int needed = kLockLatentStates + horizon + 1;
  int dim = 1;
  while (dim < needed) dim *= 2;
  return dim;
}

std::vector<int> SylvesterHadamard(int dim) {
  if (dim <= 0 || (dim & (dim - 1)) != 0) {
    throw std::invalid_argument("SylvesterHadamard: dim must be a power of two");
  }
  std::vector<int> m(static_cast<size_t>(dim) * dim);
  m[0] = 1;
  for (int n = 1; n < dim; n *= 2) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const int v = m[i * dim + j];
        m[i * dim + j + n] = v;
        m[(i + n) * dim + j] = v;
        m[(i + n) * dim + j + n] = -v;
      }
    }
  }
  return m;
}

ObservationEmitter::ObservationEmitter(CombLockSpec spec) : spec_(std::move(spec)) {
  if (spec_.obs_dim < spec_.n_latent + spec_.horizon + 1) {
    throw std::invalid_argument("ObservationEmitter: obs_dim too small");
  }
  if (spec_.hadamard.size() != static_cast<size_t>(spec_.obs_dim) * spec_.obs_dim) {
    throw std::invalid_argument("ObservationEmitter: mixing matrix has wrong size");
  }
}

std::vector<double> ObservationEmitter::LatentCode(int z, int h) const {
  if (z < 0 || z >= spec_.n_latent || h < 0 || h > spec_.horizon) {
    throw std::out_of_range("ObservationEmitter: latent state or step out of range");
  }
  std::vector<double> code(spec_.obs_dim, 0.0);
  code[z] = 1.0;
  code[spec_.n_latent + h] = 1.0;
  return code;
}

void ObservationEmitter::EmitInto(int z, int h, Rng& rng,
                                  std::span<double> out) const {
  const int D = spec_.obs_dim;
  if (out.size() != static_cast<size_t>(D)) {
    throw std::invalid_argument("ObservationEmitter: output has wrong size");
  }
  std::vector<double> code = LatentCode(z, h);
  if (spec_.noise_std > 0.0) {
    for (double& c : code) c += spec_.noise_std * StandardNormal(rng);
  }
  for (int i = 0; i < D; ++i) {
    double acc = 0.0;
    const int* row = spec_.hadamard.data() + static_cast<size_t>(i) * D;
    for (int j = 0; j < D; ++j) acc += row[j] * code[j];
    out[i] = acc;
  }
}

std::vector<double> emit_observation(const ObservationEmitter& emitter, int z,
                                     int h, Rng& rng) {
  std::vector<double> out(emitter.dim());
  emitter.EmitInto(z, h, rng, out);
  return out;
}

CombLock make_comb_lock(int horizon, uint64_t seed, double noise_std) {
  if (horizon < 2) throw std::invalid_argument("make_comb_lock: horizon must be >= 2");
  if (noise_std < 0.0) throw std::invalid_argument("make_comb_lock: negative noise");
  const int H = horizon;
  const int S = kLockLatentStates;
  const int A = kLockActions;

  CombLockSpec spec;
  spec.horizon = H;
  spec.noise_std = noise_std;
  spec.seed = seed;
  spec.obs_dim = LockObservationDim(H);
  spec.hadamard = SylvesterHadamard(spec.obs_dim);
  Rng rng = MakeRng(seed, /*stream=*/1);
  spec.good_actions.resize(2 * H);
  for (int i = 0; i < 2; ++i) {
    for (int h = 0; h < H; ++h) spec.good_actions[i * H + h] = UniformInt(rng, A);
  }

  std::vector<double> transition(static_cast<size_t>(H) * S * A * S, 0.0);
  std::vector<Reward> rewards(static_cast<size_t>(H) * S * A);
  auto row = [&](int h, int s, int a) {
    return transition.data() + ((static_cast<size_t>(h) * S + s) * A + a) * S;
  };
  for (int h = 0; h < H; ++h) {
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        double* p = row(h, s, a);
        Reward& r = rewards[(static_cast<size_t>(h) * S + s) * A + a];
        if (s != kLockBadState && a == spec.good_action(s, h)) {
          p[0] = 0.5;
          p[1] = 0.5;
          r = Reward::Deterministic(h == H - 1 ? 1.0 : 0.0);
        } else {
          p[kLockBadState] = 1.0;
          r = Reward::Deterministic(s != kLockBadState ? kLockAntiShapedReward : 0.0);
        }
      }
    }
  }
  std::vector<double> init(S, 0.0);
  init[0] = 0.5;
  init[1] = 0.5;
  TabularMDP mdp(H, S, A, std::move(transition), std::move(rewards),
                 std::move(init), /*v_max=*/1.0);

  std::vector<int> actions(static_cast<size_t>(H) * S, 0);
  for (int h = 0; h < H; ++h) {
    for (int i = 0; i < 2; ++i) actions[h * S + i] = spec.good_action(i, h);
  }
  Policy pi_star = Policy::Deterministic(H, S, A, actions);
  return CombLock{std::move(mdp), ObservationEmitter(std::move(spec)),
                  std::move(pi_star)};
}

json ToJson(const CombLockSpec& spec) {
  return {{"horizon", spec.horizon},         {"n_latent", spec.n_latent},
          {"n_actions", spec.n_actions},     {"good_actions", spec.good_actions},
          {"noise_std", spec.noise_std},     {"obs_dim", spec.obs_dim},
          {"hadamard", spec.hadamard},       {"seed", spec.seed}};
}

CombLockSpec CombLockSpecFromJson(const json& doc) {
  CombLockSpec spec;
  spec.horizon = doc.at("horizon").get<int>();
  spec.n_latent = doc.at("n_latent").get<int>();
  spec.n_actions = doc.at("n_actions").get<int>();
  spec.good_actions = doc.at("good_actions").get<std::vector<int>>();
  spec.noise_std = doc.at("noise_std").get<double>();
  spec.obs_dim = doc.at("obs_dim").get<int>();
  spec.hadamard = doc.at("hadamard").get<std::vector<int>>();
  spec.seed = doc.at("seed").get<uint64_t>();
  return spec;
}

// ---------------------------------------------------------------------------
// Hard instance

HardInstance make_hard_instance(HardInstanceVariant variant) {
  constexpr int H = 2;
  constexpr int S = 3;
  constexpr int A = 2;
  std::vector<double> transition(static_cast<size_t>(H) * S * A * S, 0.0);
  std::vector<Reward> rewards(static_cast<size_t>(H) * S * A,
                              Reward::Deterministic(0.0));
  auto set_next = [&](int h, int s, int a, int s_next) {
    transition[((static_cast<size_t>(h) * S + s) * A + a) * S + s_next] = 1.0;
  };
  for (int h = 0; h < H; ++h) {
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) set_next(h, s, a, s);
    }
  }
  // A -L-> B, A -R-> C; every other move is a self-loop (unreachable or final).
  transition[((0 * S + kStateA) * A + kActionL) * S + kStateA] = 0.0;
  transition[((0 * S + kStateA) * A + kActionR) * S + kStateA] = 0.0;
  set_next(0, kStateA, kActionL, kStateB);
  set_next(0, kStateA, kActionR, kStateC);

  auto reward_at = [&](int s, int a) -> Reward& {
    return rewards[(static_cast<size_t>(1) * S + s) * A + a];
  };
  reward_at(kStateB, kActionL) = Reward::Deterministic(1.0);
  reward_at(kStateB, kActionR) = Reward::Deterministic(1.0);
  const int paying = variant == HardInstanceVariant::kM1 ? kActionR : kActionL;
  reward_at(kStateC, paying) = Reward::Deterministic(1.0);

  std::vector<double> init = {1.0, 0.0, 0.0};
  TabularMDP mdp(H, S, A, std::move(transition), std::move(rewards),
                 std::move(init), /*v_max=*/1.0);
  return HardInstance{std::move(mdp), HardInstancePolicy(kActionL, paying)};
}

Policy HardInstancePolicy(int action_at_a, int action_at_c) {
  const std::vector<int> actions = {action_at_a, kActionL, action_at_c,
                                    action_at_a, kActionL, action_at_c};
  return Policy::Deterministic(2, 3, 2, actions);
}

// ---------------------------------------------------------------------------
// Low-rank MDPs

std::span<const double> LowRankFactors::phi_at(int h, int s, int a) const {
  const size_t idx = ((static_cast<size_t>(h) * n_states + s) * n_actions + a) * rank;
  return std::span<const double>(phi).subspan(idx, rank);
}

std::span<const double> LowRankFactors::mu_at(int h, int s_next) const {
  const size_t idx = (static_cast<size_t>(h) * n_states + s_next) * rank;
  return std::span<const double>(mu).subspan(idx, rank);
}

double LowRankFactors::Product(int h, int s, int a, int s_next) const {
  const auto p = phi_at(h, s, a);
  const auto m = mu_at(h, s_next);
  double acc = 0.0;
  for (int k = 0; k < rank; ++k) acc += p[k] * m[k];
  return acc;
}

LowRankInstance make_low_rank(int rank, int n_states, int n_actions,
                              int horizon, uint64_t seed) {
  if (rank <= 0 || n_states <= 0 || n_actions <= 0 || horizon <= 0) {
    throw std::invalid_argument("make_low_rank: dimensions must be positive");
  }
  if (rank > n_states) {
    throw std::invalid_argument("make_low_rank: rank must not exceed n_states");
  }
  constexpr int kMaxAttempts = 16;
  const int S = n_states;
  const int A = n_actions;
  const int H = horizon;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Rng rng = MakeRng(seed, static_cast<uint64_t>(attempt) + 1);
    LowRankFactors f;
    f.rank = rank;
    f.horizon = H;
    f.n_states = S;
    f.n_actions = A;
    f.phi.reserve(static_cast<size_t>(H) * S * A * rank);
    f.mu.assign(static_cast<size_t>(H) * S * rank, 0.0);
    for (int i = 0; i < H * S * A; ++i) {
      const auto row = SimplexDraw(rng, rank);
      f.phi.insert(f.phi.end(), row.begin(), row.end());
    }
    // Each latent factor k is a distribution over next states.
    for (int h = 0; h < H; ++h) {
      for (int k = 0; k < rank; ++k) {
        const auto column = SimplexDraw(rng, S);
        for (int s2 = 0; s2 < S; ++s2) f.mu[(static_cast<size_t>(h) * S + s2) * rank + k] = column[s2];
      }
    }
    std::vector<double> theta(static_cast<size_t>(H) * rank);
    for (double& t : theta) t = Uniform01(rng);

    bool degenerate = false;
    std::vector<double> transition(static_cast<size_t>(H) * S * A * S);
    std::vector<Reward> rewards(static_cast<size_t>(H) * S * A);
    for (int h = 0; h < H && !degenerate; ++h) {
      for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
          const size_t sa = (static_cast<size_t>(h) * S + s) * A + a;
          double sum = 0.0;
          for (int s2 = 0; s2 < S; ++s2) {
            const double p = f.Product(h, s, a, s2);
            transition[sa * S + s2] = p;
            sum += p;
          }
          if (!(std::abs(sum - 1.0) <= kRenormalizeTolerance)) degenerate = true;
          const auto phi = f.phi_at(h, s, a);
          double r = 0.0;
          for (int k = 0; k < rank; ++k) r += theta[h * rank + k] * phi[k];
          rewards[sa] = Reward::Deterministic(std::min(1.0, std::max(0.0, r)));
        }
      }
    }
    if (degenerate) continue;
    TabularMDP mdp(H, S, A, std::move(transition), std::move(rewards),
                   SimplexDraw(rng, S));
    return LowRankInstance{std::move(mdp), std::move(f)};
  }
  throw std::runtime_error("make_low_rank: could not draw a valid factorization");
}

LowRankFactors identity_factorization(const TabularMDP& mdp) {
  LowRankFactors f;
  f.rank = mdp.n_states();
  f.horizon = mdp.horizon();
  f.n_states = mdp.n_states();
  f.n_actions = mdp.n_actions();
  f.phi = mdp.transition_tensor();
  f.mu.assign(static_cast<size_t>(f.horizon) * f.n_states * f.rank, 0.0);
  for (int h = 0; h < f.horizon; ++h) {
    for (int s = 0; s < f.n_states; ++s) {
      f.mu[(static_cast<size_t>(h) * f.n_states + s) * f.rank + s] = 1.0;
    }
  }
  return f;
}

json ToJson(const LowRankFactors& f) {
  return {{"rank", f.rank},         {"horizon", f.horizon},
          {"n_states", f.n_states}, {"n_actions", f.n_actions},
          {"phi", f.phi},           {"mu", f.mu}};
}

LowRankFactors LowRankFactorsFromJson(const json& doc) {
  LowRankFactors f;
  f.rank = doc.at("rank").get<int>();
  f.horizon = doc.at("horizon").get<int>();
  f.n_states = doc.at("n_states").get<int>();
  f.n_actions = doc.at("n_actions").get<int>();
  f.phi = doc.at("phi").get<std::vector<double>>();
  f.mu = doc.at("mu").get<std::vector<double>>();
  const size_t n_sa = static_cast<size_t>(f.horizon) * f.n_states * f.n_actions;
  if (f.phi.size() != n_sa * f.rank ||
      f.mu.size() != static_cast<size_t>(f.horizon) * f.n_states * f.rank) {
    throw std::invalid_argument("LowRankFactorsFromJson: factor sizes do not match");
  }
  return f;
}

// ---------------------------------------------------------------------------
// Random MDPs

TabularMDP make_random_mdp(int n_states, int n_actions, int horizon, Rng& rng,
                           const RandomMdpOptions& options) {
  const int S = n_states;
  const int A = n_actions;
  const int H = horizon;
  std::vector<double> transition;
  transition.reserve(static_cast<size_t>(H) * S * A * S);
  std::vector<Reward> rewards;
  rewards.reserve(static_cast<size_t>(H) * S * A);
  for (int i = 0; i < H * S * A; ++i) {
    std::vector<double> row = SimplexDraw(rng, S);
    if (options.sparsity > 0.0) {
      const int keep = UniformInt(rng, S);
      double sum = 0.0;
      for (int s2 = 0; s2 < S; ++s2) {
        if (s2 != keep && Uniform01(rng) < options.sparsity) row[s2] = 0.0;
        sum += row[s2];
      }
      for (double& p : row) p /= sum;
    }
    transition.insert(transition.end(), row.begin(), row.end());
    const double mean = Uniform01(rng);
    rewards.push_back(options.bernoulli_rewards ? Reward::Bernoulli(mean)
                                                : Reward::Deterministic(mean));
  }
  std::vector<double> init(S, 0.0);
  if (options.random_init) {
    init = SimplexDraw(rng, S);
  } else {
    init[0] = 1.0;
  }
  return TabularMDP(H, S, A, std::move(transition), std::move(rewards),
                    std::move(init));
}

Policy make_random_policy(int horizon, int n_states, int n_actions, Rng& rng,
                          bool deterministic) {
  if (deterministic) {
    std::vector<int> actions(static_cast<size_t>(horizon) * n_states);
    for (int& a : actions) a = UniformInt(rng, n_actions);
    return Policy::Deterministic(horizon, n_states, n_actions, actions);
  }
  StateActionTable probs(horizon, n_states, n_actions);
  for (int h = 0; h < horizon; ++h) {
    for (int s = 0; s < n_states; ++s) {
      const auto row = SimplexDraw(rng, n_actions);
      std::copy(row.begin(), row.end(), probs.row(h, s).begin());
    }
  }
  return Policy(std::move(probs));
}

}  // namespace hyq
