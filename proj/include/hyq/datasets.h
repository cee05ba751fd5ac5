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

// Offline datasets: per-timestep transition buffers drawn from a known
// distribution nu_h, with the exact nu recorded when it is available.

#ifndef HYQ_DATASETS_H_
#define HYQ_DATASETS_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hyq/envs.h"
#include "hyq/mdp.h"
#include "json.hpp"

namespace hyq {

enum class DatasetKind {
  kEmpty,
  kOptimalTrajectory,
  kOptimalOccupancy,
  kHardInstance,
  kFromDistribution,
};

const char* DatasetKindName(DatasetKind kind);
DatasetKind DatasetKindFromName(const std::string& name);

struct DatasetMetadata {
  DatasetKind kind = DatasetKind::kEmpty;
  std::string source;
  uint64_t seed = 0;
  int m_off = 0;
  // Exact generating distribution over (s, a) per step, when known.
  std::optional<StateActionTable> nu;
  // Trajectory index of every tuple (trajectory datasets only). Learners never
  // read this.
  std::vector<std::vector<int>> trajectory_ids;
};

class OfflineDataset {
 public:
  OfflineDataset(int horizon, std::vector<std::vector<Transition>> per_step,
                 DatasetMetadata metadata);

  static OfflineDataset Empty(int horizon);

  int horizon() const { return static_cast<int>(per_step_.size()); }
  std::span<const Transition> at(int h) const { return per_step_[h]; }
  size_t size(int h) const { return per_step_[h].size(); }
  size_t total_size() const;
  bool empty() const { return total_size() == 0; }
  const DatasetMetadata& metadata() const { return metadata_; }

  bool operator==(const OfflineDataset& other) const {
    return per_step_ == other.per_step_;
  }

 private:
  std::vector<std::vector<Transition>> per_step_;
  DatasetMetadata metadata_;
};

// Exploration rate of the trajectory dataset: 1 / H.
double TrajectoryEpsilon(int horizon);
// Zero-based step at which the trajectory dataset acts uniformly: floor(H/2).
int ForcedRandomStep(int horizon);

// The Markov policy that generates the trajectory dataset: epsilon-greedy
// around `pi_star`, uniform at ForcedRandomStep.
Policy TrajectoryBehaviorPolicy(const Policy& pi_star);

// m_off full trajectories of TrajectoryBehaviorPolicy(pi_star), sliced per h.
OfflineDataset gen_optimal_trajectory(const TabularMDP& mdp,
                                      const Policy& pi_star, int m_off,
                                      uint64_t seed);

// For each h, m_off tuples with s ~ d_h^{pi_star}, a ~ Uniform(A).
OfflineDataset gen_optimal_occupancy(const TabularMDP& mdp,
                                     const Policy& pi_star, int m_off,
                                     uint64_t seed);

// nu_0 = {A} x Unif{L, R}, nu_1 = {B} x Unif{L, R}; state C is never queried.
OfflineDataset gen_hard_instance_offline(HardInstanceVariant variant, int m_off,
                                         uint64_t seed);

// m_off iid tuples per h with (s, a) ~ nu_h.
OfflineDataset gen_from_distribution(const TabularMDP& mdp,
                                     const StateActionTable& nu, int m_off,
                                     uint64_t seed);

// Draws r and s' for a queried (h, s, a).
Transition SampleTransition(const TabularMDP& mdp, int h, int s, int a,
                            Rng& rng);

// CSV with header "h,s,a,r,s_next"; r in shortest round-trip decimal form.
std::string DatasetToCsv(const OfflineDataset& dataset);
nlohmann::json DatasetMetadataToJson(const OfflineDataset& dataset);
OfflineDataset DatasetFromCsv(const std::string& csv,
                              const nlohmann::json& metadata);

void SaveDataset(const OfflineDataset& dataset, const std::string& csv_path,
                 const std::string& json_path);
OfflineDataset LoadDataset(const std::string& csv_path,
                           const std::string& json_path);

}  // namespace hyq

#endif  // HYQ_DATASETS_H_
