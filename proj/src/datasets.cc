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

#include "hyq/datasets.h"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "hyq/format.h"

namespace hyq {

using nlohmann::json;

const char* DatasetKindName(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::kEmpty: return "empty";
    case DatasetKind::kOptimalTrajectory: return "optimal_trajectory";
    case DatasetKind::kOptimalOccupancy: return "optimal_occupancy";
    case DatasetKind::kHardInstance: return "hard_instance";
    case DatasetKind::kFromDistribution: return "from_distribution";
  }
  return "unknown";
}

DatasetKind DatasetKindFromName(const std::string& name) {
  for (DatasetKind k : {DatasetKind::kEmpty, DatasetKind::kOptimalTrajectory,
                        DatasetKind::kOptimalOccupancy, DatasetKind::kHardInstance,
                        DatasetKind::kFromDistribution}) {
    if (name == DatasetKindName(k)) return k;
  }
  throw std::invalid_argument("unknown dataset kind '" + name + "'");
}

OfflineDataset::OfflineDataset(int horizon,
                               std::vector<std::vector<Transition>> per_step,
                               DatasetMetadata metadata)
    : per_step_(std::move(per_step)), metadata_(std::move(metadata)) {
  if (static_cast<int>(per_step_.size()) != horizon) {
    throw std::invalid_argument("OfflineDataset: one buffer per step required");
  }
  for (int h = 0; h < horizon; ++h) {
    for (const Transition& t : per_step_[h]) {
      if (t.h != h) throw std::invalid_argument("OfflineDataset: tuple stored at wrong step");
      if (!(t.r >= 0.0 && t.r <= 1.0)) {
        throw std::invalid_argument("OfflineDataset: reward outside [0, 1]");
      }
    }
  }
}

OfflineDataset OfflineDataset::Empty(int horizon) {
  return OfflineDataset(horizon, std::vector<std::vector<Transition>>(horizon),
                        DatasetMetadata{});
}

size_t OfflineDataset::total_size() const {
  size_t n = 0;
  for (const auto& b : per_step_) n += b.size();
  return n;
}

double TrajectoryEpsilon(int horizon) { return 1.0 / horizon; }
int ForcedRandomStep(int horizon) { return horizon / 2; }

Policy TrajectoryBehaviorPolicy(const Policy& pi_star) {
  const int H = pi_star.horizon();
  const int S = pi_star.n_states();
  const int A = pi_star.n_actions();
  const double eps = TrajectoryEpsilon(H);
  StateActionTable probs(H, S, A);
  for (int h = 0; h < H; ++h) {
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        probs(h, s, a) = h == ForcedRandomStep(H)
                             ? 1.0 / A
                             : (1.0 - eps) * pi_star.prob(h, s, a) + eps / A;
      }
    }
  }
  return Policy(std::move(probs));
}

Transition SampleTransition(const TabularMDP& mdp, int h, int s, int a, Rng& rng) {
  Transition t;
  t.h = h;
  t.s = s;
  t.a = a;
  t.r = mdp.reward(h, s, a).Sample(rng);
  t.s_next = h + 1 < mdp.horizon()
                 ? SampleCategorical(rng, mdp.next_state_dist(h, s, a))
                 : kTerminalState;
  return t;
}

namespace {

void RequirePositive(int m_off) {
  if (m_off < 1) throw std::invalid_argument("offline dataset: m_off must be >= 1");
}

}  // namespace

OfflineDataset gen_optimal_trajectory(const TabularMDP& mdp, const Policy& pi_star,
                                      int m_off, uint64_t seed) {
  RequirePositive(m_off);
  const int H = mdp.horizon();
  const int A = mdp.n_actions();
  const double eps = TrajectoryEpsilon(H);
  const int forced = ForcedRandomStep(H);
  Rng rng = MakeRng(seed, 11);
  std::vector<std::vector<Transition>> per_step(H);
  DatasetMetadata meta;
  meta.kind = DatasetKind::kOptimalTrajectory;
  meta.source = "epsilon-greedy optimal policy, epsilon = 1/H, uniform at step floor(H/2)";
  meta.seed = seed;
  meta.m_off = m_off;
  meta.trajectory_ids.assign(H, {});
  for (int i = 0; i < m_off; ++i) {
    int s = SampleCategorical(rng, mdp.init_dist());
    for (int h = 0; h < H; ++h) {
      int a;
      if (h == forced || Uniform01(rng) < eps) {
        a = UniformInt(rng, A);
      } else {
        a = pi_star.Sample(h, s, rng);
      }
      Transition t = SampleTransition(mdp, h, s, a, rng);
      per_step[h].push_back(t);
      meta.trajectory_ids[h].push_back(i);
      s = t.s_next;
    }
  }
  meta.nu = occupancy(mdp, TrajectoryBehaviorPolicy(pi_star)).table();
  return OfflineDataset(H, std::move(per_step), std::move(meta));
}

OfflineDataset gen_optimal_occupancy(const TabularMDP& mdp, const Policy& pi_star,
                                     int m_off, uint64_t seed) {
  RequirePositive(m_off);
  const int H = mdp.horizon();
  const int S = mdp.n_states();
  const int A = mdp.n_actions();
  const OccupancyMeasure d = occupancy(mdp, pi_star);
  Rng rng = MakeRng(seed, 12);
  std::vector<std::vector<Transition>> per_step(H);
  StateActionTable nu(H, S, A);
  for (int h = 0; h < H; ++h) {
    const std::vector<double> marginal = d.StateMarginal(h);
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) nu(h, s, a) = marginal[s] / A;
    }
    per_step[h].reserve(m_off);
    for (int i = 0; i < m_off; ++i) {
      const int s = SampleCategorical(rng, marginal);
      const int a = UniformInt(rng, A);
      per_step[h].push_back(SampleTransition(mdp, h, s, a, rng));
    }
  }
  DatasetMetadata meta;
  meta.kind = DatasetKind::kOptimalOccupancy;
  meta.source = "s ~ d_h of the optimal policy, a ~ Uniform(A)";
  meta.seed = seed;
  meta.m_off = m_off;
  meta.nu = std::move(nu);
  return OfflineDataset(H, std::move(per_step), std::move(meta));
}

namespace {

OfflineDataset SampleFromNu(const TabularMDP& mdp, StateActionTable nu, int m_off,
                            uint64_t seed, DatasetKind kind, std::string source) {
  RequirePositive(m_off);
  const int H = mdp.horizon();
  const int A = mdp.n_actions();
  if (nu.horizon() != H || nu.n_states() != mdp.n_states() || nu.n_actions() != A) {
    throw std::invalid_argument("offline dataset: nu shape does not match MDP");
  }
  for (int h = 0; h < H; ++h) ValidateProbabilities(nu.slice(h), "offline nu_h");
  Rng rng = MakeRng(seed, 13);
  std::vector<std::vector<Transition>> per_step(H);
  for (int h = 0; h < H; ++h) {
    per_step[h].reserve(m_off);
    for (int i = 0; i < m_off; ++i) {
      const int idx = SampleCategorical(rng, nu.slice(h));
      per_step[h].push_back(SampleTransition(mdp, h, idx / A, idx % A, rng));
    }
  }
  DatasetMetadata meta;
  meta.kind = kind;
  meta.source = std::move(source);
  meta.seed = seed;
  meta.m_off = m_off;
  meta.nu = std::move(nu);
  return OfflineDataset(H, std::move(per_step), std::move(meta));
}

}  // namespace

OfflineDataset gen_hard_instance_offline(HardInstanceVariant variant, int m_off,
                                         uint64_t seed) {
  const HardInstance inst = make_hard_instance(variant);
  StateActionTable nu(2, 3, 2);
  nu(0, kStateA, kActionL) = 0.5;
  nu(0, kStateA, kActionR) = 0.5;
  nu(1, kStateB, kActionL) = 0.5;
  nu(1, kStateB, kActionR) = 0.5;
  return SampleFromNu(inst.mdp, std::move(nu), m_off, seed, DatasetKind::kHardInstance,
                      variant == HardInstanceVariant::kM1 ? "hard instance M1, nu on {A, B}"
                                                          : "hard instance M2, nu on {A, B}");
}

OfflineDataset gen_from_distribution(const TabularMDP& mdp, const StateActionTable& nu,
                                     int m_off, uint64_t seed) {
  return SampleFromNu(mdp, nu, m_off, seed, DatasetKind::kFromDistribution,
                      "explicit nu");
}

// ---------------------------------------------------------------------------
// Serialization

std::string DatasetToCsv(const OfflineDataset& dataset) {
  std::string out = "h,s,a,r,s_next\n";
  for (int h = 0; h < dataset.horizon(); ++h) {
    for (const Transition& t : dataset.at(h)) {
      out += std::to_string(t.h) + ',' + std::to_string(t.s) + ',' +
             std::to_string(t.a) + ',' + FormatDouble(t.r) + ',' +
             std::to_string(t.s_next) + '\n';
    }
  }
  return out;
}

json DatasetMetadataToJson(const OfflineDataset& dataset) {
  const DatasetMetadata& m = dataset.metadata();
  json doc = {{"kind", DatasetKindName(m.kind)},
              {"source", m.source},
              {"seed", m.seed},
              {"m_off", m.m_off},
              {"horizon", dataset.horizon()}};
  if (m.nu) {
    json nu = json::array();
    for (int h = 0; h < m.nu->horizon(); ++h) {
      const auto slice = m.nu->slice(h);
      nu.push_back(std::vector<double>(slice.begin(), slice.end()));
    }
    doc["nu"] = {{"n_states", m.nu->n_states()},
                 {"n_actions", m.nu->n_actions()},
                 {"per_step", std::move(nu)}};
  }
  if (!m.trajectory_ids.empty()) doc["trajectory_ids"] = m.trajectory_ids;
  return doc;
}

OfflineDataset DatasetFromCsv(const std::string& csv, const json& metadata) {
  const int H = metadata.at("horizon").get<int>();
  std::vector<std::vector<Transition>> per_step(H);
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != "h,s,a,r,s_next") {
    throw std::invalid_argument("DatasetFromCsv: missing header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cols.push_back(cell);
    if (cols.size() != 5) throw std::invalid_argument("DatasetFromCsv: bad row '" + line + "'");
    Transition t{ParseInt(cols[0]), ParseInt(cols[1]), ParseInt(cols[2]),
                 ParseDouble(cols[3]), ParseInt(cols[4])};
    if (t.h < 0 || t.h >= H) throw std::invalid_argument("DatasetFromCsv: step out of range");
    per_step[t.h].push_back(t);
  }
  DatasetMetadata meta;
  meta.kind = DatasetKindFromName(metadata.at("kind").get<std::string>());
  meta.source = metadata.value("source", "");
  meta.seed = metadata.value("seed", uint64_t{0});
  meta.m_off = metadata.value("m_off", 0);
  if (metadata.contains("nu")) {
    const json& nu = metadata.at("nu");
    StateActionTable table(H, nu.at("n_states").get<int>(), nu.at("n_actions").get<int>());
    for (int h = 0; h < H; ++h) {
      const auto v = nu.at("per_step").at(h).get<std::vector<double>>();
      if (v.size() != table.slice(h).size()) {
        throw std::invalid_argument("DatasetFromCsv: nu slice has wrong size");
      }
      std::copy(v.begin(), v.end(), table.slice(h).begin());
    }
    meta.nu = std::move(table);
  }
  if (metadata.contains("trajectory_ids")) {
    meta.trajectory_ids = metadata.at("trajectory_ids").get<std::vector<std::vector<int>>>();
  }
  return OfflineDataset(H, std::move(per_step), std::move(meta));
}

void SaveDataset(const OfflineDataset& dataset, const std::string& csv_path,
                 const std::string& json_path) {
  std::ofstream csv(csv_path, std::ios::binary);
  std::ofstream meta(json_path, std::ios::binary);
  if (!csv || !meta) throw std::runtime_error("SaveDataset: cannot open output files");
  csv << DatasetToCsv(dataset);
  meta << DatasetMetadataToJson(dataset).dump(2) << '\n';
}

OfflineDataset LoadDataset(const std::string& csv_path, const std::string& json_path) {
  std::ifstream csv(csv_path, std::ios::binary);
  std::ifstream meta(json_path, std::ios::binary);
  if (!csv || !meta) throw std::runtime_error("LoadDataset: cannot open input files");
  std::stringstream buf;
  buf << csv.rdbuf();
  return DatasetFromCsv(buf.str(), json::parse(meta));
}

}  // namespace hyq
