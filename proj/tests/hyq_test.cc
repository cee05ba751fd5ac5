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

#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>

#include "hyq/analysis.h"
#include "hyq/hyq.h"

namespace hyq {
namespace {

const Policy kAdversary = HardInstancePolicy(kActionR, kActionL);

HyQConfig HardInstanceConfig(uint64_t seed) {
  HyQConfig c;
  c.T = 50;
  c.m_on = 1;
  c.function_class.unvisited = UnvisitedFill::kOptimistic;
  c.tie_break = TieBreak::AdversarialTo(kAdversary);
  c.seed = seed;
  return c;
}

TEST(TieBreak, DominantActionAllRulesAgree) {
  const std::vector<double> q = {0.1, 0.9, 0.3};
  EXPECT_EQ(ArgmaxWithTieBreak(q, 0, 0, TieBreak::LowestIndex()), 1);
  EXPECT_EQ(ArgmaxWithTieBreak(q, 0, 0, TieBreak::RandomSeeded(5)), 1);
  EXPECT_EQ(ArgmaxWithTieBreak(q, 0, 0, TieBreak::AdversarialTo(Policy::Uniform(1, 1, 3))), 1);
}

TEST(TieBreak, FullTieFollowsAdversary) {
  const StateActionTable zero(2, 3, 2);
  const Policy pi = greedy_policy(zero, TieBreak::AdversarialTo(kAdversary));
  EXPECT_EQ(pi.Action(0, kStateA), kActionR);
  EXPECT_EQ(pi.Action(1, kStateC), kActionL);
  EXPECT_EQ(greedy_policy(zero, TieBreak::LowestIndex()).Action(0, kStateA), kActionL);
}

TEST(TieBreak, ScalingKeepsPolicy) {
  Rng rng = MakeRng(1);
  StateActionTable f(3, 4, 3);
  for (double& v : f.data()) v = std::round(3 * Uniform01(rng));  // many ties
  StateActionTable g = f;
  for (double& v : g.data()) v *= 2.5;
  EXPECT_EQ(greedy_policy(f, TieBreak::LowestIndex()), greedy_policy(g, TieBreak::LowestIndex()));
}

TEST(TieBreak, SeededRuleIsReproducibleAndSpreads) {
  const std::vector<double> q(4, 0.0);
  std::vector<int> hits(4, 0);
  for (int s = 0; s < 400; ++s) {
    const int a = ArgmaxWithTieBreak(q, 0, s, TieBreak::RandomSeeded(3));
    EXPECT_EQ(a, ArgmaxWithTieBreak(q, 0, s, TieBreak::RandomSeeded(3)));
    ++hits[a];
  }
  for (int h : hits) EXPECT_GT(h, 50);
}

TEST(HyQ, HardInstanceSolvedOnEverySeed) {
  const HardInstance hi = make_hard_instance(HardInstanceVariant::kM1);
  const Environment env = Environment::Tabular(hi.mdp);
  const OfflineDataset off = gen_hard_instance_offline(HardInstanceVariant::kM1, 100, 0);
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const RunRecord r = hyq_qtype(env, off, HardInstanceConfig(seed));
    EXPECT_EQ(r.final_return(), 1.0) << "seed " << seed;
  }
}

TEST(HyQ, FirstRowIsTieBreakPolicy) {
  const HardInstance hi = make_hard_instance(HardInstanceVariant::kM1);
  const Environment env = Environment::Tabular(hi.mdp);
  HyQConfig c;
  c.T = 1;
  c.tie_break = TieBreak::AdversarialTo(kAdversary);
  const RunRecord r = hyq_qtype(env, OfflineDataset::Empty(2), c);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.rows[0].eval_return, policy_value(hi.mdp, kAdversary));
  EXPECT_TRUE(r.empty_offline_warning);
}

TEST(HyQ, SampleAccounting) {
  const CombLock lock = make_comb_lock(5, 0);
  const Environment env = Environment::Tabular(lock.mdp);
  const OfflineDataset off = gen_optimal_occupancy(lock.mdp, lock.pi_star, 7, 0);
  HyQConfig c;
  c.T = 4;
  c.m_on = 3;
  const RunRecord q = hyq_qtype(env, off, c);
  EXPECT_EQ(q.rows.back().online_steps, 4L * 3 * 5);
  EXPECT_EQ(q.rows.back().offline_samples, 35);
  const RunRecord v = hyq_vtype(env, off, c);
  EXPECT_EQ(v.rows.back().online_steps, 4L * 3 * 5 * 6 / 2);
  for (size_t i = 0; i < v.rows.size(); ++i) EXPECT_EQ(v.rows[i].iter, static_cast<int>(i));
}

TEST(HyQ, SampleBudgetStopsEarly) {
  const CombLock lock = make_comb_lock(4, 0);
  const Environment env = Environment::Tabular(lock.mdp);
  HyQConfig c;
  c.T = 100;
  c.m_on = 2;
  c.sample_budget = 30;  // 8 per iteration
  const RunRecord r = hyq_qtype(env, OfflineDataset::Empty(4), c);
  EXPECT_EQ(r.rows.size(), 4u);
  EXPECT_LE(r.rows.back().samples(), 30);
}

TEST(HyQ, VTypeProbeActionIsUniform) {
  const CombLock lock = make_comb_lock(6, 2);
  const Environment env = Environment::Lock(lock);
  Rng rng = MakeRng(4);
  const ActFn good = [&](int h, int s, std::span<const double>) { return lock.pi_star.Action(h, s); };
  const boost::math::chi_squared dist(kLockActions - 1);
  const double crit = boost::math::quantile(dist, 0.999);
  for (int h = 0; h < 6; ++h) {
    std::vector<int> counts(kLockActions, 0);
    const int n = 5000;
    for (int i = 0; i < n; ++i) {
      CollectVTypeEpisode(env, good, h, rng,
                          [&](const Transition& t, std::span<const double> x, std::span<const double>) {
                            EXPECT_EQ(t.h, h);
                            EXPECT_NE(t.s, kLockBadState);  // roll-in follows pi*
                            EXPECT_EQ(x.size(), 16u);
                            ++counts[t.a];
                          });
    }
    double stat = 0.0;
    for (int c : counts) stat += (c - n / 10.0) * (c - n / 10.0) / (n / 10.0);
    EXPECT_LT(stat, crit) << "h=" << h;
  }
}

TEST(HyQ, SameSeedSameCsv) {
  const CombLock lock = make_comb_lock(4, 1);
  const Environment env = Environment::Lock(lock);
  const OfflineDataset off = gen_optimal_trajectory(lock.mdp, lock.pi_star, 50, 1);
  HyQConfig c;
  c.T = 3;
  c.m_on = 10;
  c.variant = HyQVariant::kVType;
  c.function_class.kind = FunctionClassKind::kLockNet;
  c.function_class.n_updates = 20;
  c.function_class.batch_size = 32;
  c.eval = {EvalKind::kMonteCarlo, 20};
  c.seed = 9;
  EXPECT_EQ(RunRecordToCsv(run_hyq(env, off, c)), RunRecordToCsv(run_hyq(env, off, c)));
}

TEST(HyQ, CsvHeader) {
  RunRecord r;
  r.rows.push_back({0, 0, 10, 0.5, std::nan(""), std::nan("")});
  const std::string csv = RunRecordToCsv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "iter,online_steps,offline_samples,eval_return,bellman_residual_offline,"
            "bellman_residual_online");
}

TEST(HyQ, LinearClassOnLowRankWithCoverage) {
  const LowRankInstance lr = make_low_rank(3, 6, 3, 4, 5);
  const Environment env = Environment::Tabular(lr.mdp);
  StateActionTable nu(4, 6, 3, 1.0 / 18);
  const OfflineDataset off = gen_from_distribution(lr.mdp, nu, 2000, 1);
  HyQConfig c;
  c.T = 5;
  c.m_on = 20;
  c.function_class.kind = FunctionClassKind::kLinear;
  c.function_class.features = FeaturesFromLowRank(lr.factors);
  const RunRecord r = hyq_qtype(env, off, c);
  const double v_star = InitialValue(lr.mdp, value_iteration(lr.mdp).v);
  EXPECT_GE(r.final_return(), v_star - 0.05);
}

TEST(HyQ, RejectsBadConfig) {
  const HardInstance hi = make_hard_instance(HardInstanceVariant::kM1);
  const Environment env = Environment::Tabular(hi.mdp);
  HyQConfig c;
  c.T = 0;
  EXPECT_THROW(hyq_qtype(env, OfflineDataset::Empty(2), c), std::invalid_argument);
  c.T = 1;
  EXPECT_THROW(hyq_qtype(env, OfflineDataset::Empty(3), c), std::invalid_argument);
  c.function_class.kind = FunctionClassKind::kLockNet;
  EXPECT_THROW(hyq_qtype(env, OfflineDataset::Empty(2), c), std::invalid_argument);
}

TEST(Discounted, ScheduleEndpoints) {
  const DiscountedConfig d;
  EXPECT_EQ(d.beta_start, 0.2);
  EXPECT_EQ(d.beta_end, 0.01);
  EXPECT_EQ(d.epsilon_start, 0.25);
  EXPECT_EQ(d.epsilon_end, 0.001);
  EXPECT_DOUBLE_EQ(LinearSchedule(0.2, 0.01, 0, 100), 0.2);
  EXPECT_DOUBLE_EQ(LinearSchedule(0.2, 0.01, 100, 100), 0.01);
  EXPECT_DOUBLE_EQ(LinearSchedule(0.2, 0.01, 500, 100), 0.01);
  EXPECT_NEAR(LinearSchedule(0.2, 0.01, 50, 100), 0.105, 1e-15);
}

TEST(Discounted, ZeroGammaRegressesOnRewards) {
  // Single state, single step: the table converges to the mean reward.
  const TabularMDP mdp(1, 1, 1, {1.0}, {Reward::Deterministic(0.4)}, {1.0});
  const Environment env = Environment::Tabular(mdp);
  DiscountedConfig d;
  d.gamma = 0.0;
  d.n_value = 1;
  d.lr = 0.05;
  d.total_steps = 3000;
  DiscountedHyQ learner(env, OfflineDataset::Empty(1), d);
  learner.Run();
  EXPECT_NEAR(learner.OnlineValue(0, 0, {}, 0), 0.4, 1e-3);
}

TEST(Discounted, TargetFrozenBetweenRefreshes) {
  const CombLock lock = make_comb_lock(4, 0);
  const Environment env = Environment::Lock(lock);
  const OfflineDataset off = gen_optimal_occupancy(lock.mdp, lock.pi_star, 50, 0);
  DiscountedConfig d;
  d.function_class = FunctionClassKind::kLockNet;
  d.n_value = 1;
  d.n_target = 100;
  d.lr = 1e-2;
  DiscountedHyQ learner(env, off, d);
  Rng rng = MakeRng(1);
  const std::vector<double> x = emit_observation(lock.emitter, 0, 2, rng);
  const double target = learner.TargetMax(2, 0, x);
  const double online = learner.OnlineValue(2, 0, x, 0);
  for (int i = 0; i < 99; ++i) learner.Step();
  EXPECT_EQ(learner.TargetMax(2, 0, x), target);
  EXPECT_NE(learner.OnlineValue(2, 0, x, 0), online);
  learner.Step();
  EXPECT_NE(learner.TargetMax(2, 0, x), target);
}

TEST(Discounted, BetaZeroWithoutOfflineData) {
  const HardInstance hi = make_hard_instance(HardInstanceVariant::kM1);
  const Environment env = Environment::Tabular(hi.mdp);
  DiscountedHyQ learner(env, OfflineDataset::Empty(2), DiscountedConfig{});
  EXPECT_EQ(learner.beta(), 0.0);
  EXPECT_DOUBLE_EQ(learner.epsilon(), 0.25);
}

TEST(Discounted, RecordsMovingAverage) {
  const HardInstance hi = make_hard_instance(HardInstanceVariant::kM1);
  const Environment env = Environment::Tabular(hi.mdp);
  DiscountedConfig d;
  d.total_steps = 400;
  const RunRecord r = hyq_discounted(env, gen_hard_instance_offline(HardInstanceVariant::kM1, 20, 0), d);
  EXPECT_EQ(r.rows.size(), 20u);  // 200 episodes, one row per 10
  for (const RunRow& row : r.rows) {
    EXPECT_GE(row.eval_return, 0.0);
    EXPECT_LE(row.eval_return, 1.0);
  }
}

}  // namespace
}  // namespace hyq
