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

#include <cmath>

#include "hyq/analysis.h"
#include "hyq/envs.h"
#include "oracles.h"

namespace hyq {
namespace {

StateActionTable RandomTable(int H, int S, int A, double hi, Rng& rng) {
  StateActionTable f(H, S, A);
  for (double& v : f.data()) v = hi * Uniform01(rng);
  return f;
}

// nu_0 = {A} x Unif{L, R}, nu_1 = {B} x Unif{L, R}.
StateActionTable AbSupport() {
  StateActionTable nu(2, 3, 2);
  nu(0, kStateA, kActionL) = nu(0, kStateA, kActionR) = 0.5;
  nu(1, kStateB, kActionL) = nu(1, kStateB, kActionR) = 0.5;
  return nu;
}

TEST(ExtendedValue, Arithmetic) {
  const ExtendedValue inf = ExtendedValue::Infinity();
  const ExtendedValue two = ExtendedValue::Finite(2.0);
  EXPECT_TRUE(two.LessOrEqual(inf));
  EXPECT_TRUE(inf.LessOrEqual(inf));
  EXPECT_FALSE(inf.LessOrEqual(two));
  EXPECT_EQ(two.Max(inf), inf);
  EXPECT_TRUE(inf.Sqrt().is_infinite());
  EXPECT_DOUBLE_EQ(two.Scale(2.0).Sqrt().value(), 2.0);
  EXPECT_THROW(inf.value(), std::logic_error);
  EXPECT_EQ(ToJson(inf), "inf");
  EXPECT_EQ(ToJson(two), 2.0);
}

TEST(BellmanResidual, ZeroAtQStar) {
  Rng rng = MakeRng(1);
  const TabularMDP mdp = make_random_mdp(5, 3, 5, rng);
  const BellmanResidual r = bellman_residual(mdp, value_iteration(mdp).q);
  for (double e : r.eps.data()) EXPECT_LE(std::abs(e), 1e-10);
}

TEST(BellmanResidual, ZeroFunctionLastStep) {
  Rng rng = MakeRng(2);
  const TabularMDP mdp = make_random_mdp(3, 2, 3, rng);
  const BellmanResidual r = bellman_residual(mdp, StateActionTable(3, 3, 2));
  for (int s = 0; s < 3; ++s) {
    for (int a = 0; a < 2; ++a) EXPECT_DOUBLE_EQ(r.eps(2, s, a), -mdp.reward_mean(2, s, a));
  }
}

TEST(BellmanResidual, MatchesIndependentLoop) {
  Rng rng = MakeRng(3);
  const TabularMDP mdp = make_random_mdp(4, 3, 5, rng);
  const StateActionTable f = RandomTable(5, 4, 3, mdp.v_max(), rng);
  const BellmanResidual r = bellman_residual(mdp, f);
  for (int h = 0; h < 5; ++h) {
    for (int s = 0; s < 4; ++s) {
      for (int a = 0; a < 3; ++a) {
        EXPECT_NEAR(r.eps(h, s, a), f(h, s, a) - testing::BackupAt(mdp, f, h, s, a), 1e-12);
      }
    }
  }
}

class HardInstanceCoverage : public ::testing::Test {
 protected:
  HardInstance m1 = make_hard_instance(HardInstanceVariant::kM1);
  std::vector<StateActionTable> F = {value_iteration(m1.mdp).q,
                                     value_iteration(make_hard_instance(HardInstanceVariant::kM2).mdp).q};
  StateActionTable nu = AbSupport();
};

TEST_F(HardInstanceCoverage, OptimalPolicyIsCovered) {
  const TransferCoeffReport r = transfer_coefficient(m1.mdp, m1.pi_star, nu, F);
  EXPECT_EQ(r.value, ExtendedValue::Finite(0.0));
  EXPECT_EQ(r.maximizer, -1);
  for (const CandidateRatio& c : r.candidates) {
    EXPECT_EQ(c.numerator, 0.0);
    EXPECT_EQ(c.denominator, 0.0);
  }
}

TEST_F(HardInstanceCoverage, CVisitingPolicyIsUncovered) {
  const TransferCoeffReport r = transfer_coefficient(m1.mdp, HardInstancePolicy(kActionR, kActionR), nu, F);
  EXPECT_TRUE(r.value.is_infinite());
  EXPECT_EQ(r.maximizer, 1);
  EXPECT_DOUBLE_EQ(r.candidates[1].numerator, 1.0);
  EXPECT_EQ(r.candidates[1].denominator, 0.0);
}

TEST_F(HardInstanceCoverage, CVisitingLeftHasNegativeNumerator) {
  // Q*_{M2} overestimates (C, L) in M1, so its average residual is negative.
  const TransferCoeffReport r = transfer_coefficient(m1.mdp, HardInstancePolicy(kActionR, kActionL), nu, F);
  EXPECT_EQ(r.value, ExtendedValue::Finite(0.0));
  EXPECT_DOUBLE_EQ(r.candidates[1].numerator, -1.0);
}

TEST(TransferCoefficient, DensityMatchedNuBoundedBySqrtH) {
  Rng rng = MakeRng(4);
  for (int i = 0; i < 50; ++i) {
    const int H = 1 + UniformInt(rng, 5);
    const TabularMDP mdp = make_random_mdp(4, 3, H, rng);
    const Policy pi = make_random_policy(H, 4, 3, rng);
    const StateActionTable nu = occupancy(mdp, pi).table();
    std::vector<StateActionTable> F;
    for (int k = 0; k < 5; ++k) F.push_back(RandomTable(H, 4, 3, mdp.v_max(), rng));
    const TransferCoeffReport r = transfer_coefficient(mdp, pi, nu, F);
    EXPECT_TRUE(r.value.LessOrEqual(ExtendedValue::Finite(std::sqrt(H)), 1e-10));
    const DensityRatioChain c = density_ratio_chain(mdp, pi, nu, F);
    EXPECT_NEAR(c.sup_density_ratio.value(), 1.0, 1e-12);
  }
}

TEST(TransferCoefficient, DensityMatchedNuCanExceedOne) {
  // f_h = Q*_h - (H - h): every step has residual T f - f = 1, so with
  // nu = d^pi the ratio is H / sqrt(H).
  const CombLock lock = make_comb_lock(2, 0);
  StateActionTable f = value_iteration(lock.mdp).q;
  for (int h = 0; h < 2; ++h) {
    for (int s = 0; s < 3; ++s) {
      for (int a = 0; a < kLockActions; ++a) f(h, s, a) -= 2 - h;
    }
  }
  const StateActionTable nu = occupancy(lock.mdp, lock.pi_star).table();
  const std::vector<StateActionTable> F = {f};
  const TransferCoeffReport r = transfer_coefficient(lock.mdp, lock.pi_star, nu, F);
  EXPECT_NEAR(r.value.value(), std::sqrt(2.0), 1e-12);
}

TEST(TransferCoefficient, RatioMatchesDirectFormula) {
  Rng rng = MakeRng(5);
  const TabularMDP mdp = make_random_mdp(3, 2, 3, rng);
  const Policy pi = make_random_policy(3, 3, 2, rng);
  const StateActionTable nu(3, 3, 2, 1.0 / 6);
  const StateActionTable f = RandomTable(3, 3, 2, 3.0, rng);
  const StateActionTable d = testing::ForwardOccupancy(mdp, pi);
  double num = 0.0, den = 0.0;
  for (int h = 0; h < 3; ++h) {
    for (int s = 0; s < 3; ++s) {
      for (int a = 0; a < 2; ++a) {
        const double e = testing::BackupAt(mdp, f, h, s, a) - f(h, s, a);
        num += d(h, s, a) * e;
        den += nu(h, s, a) * e * e;
      }
    }
  }
  const std::vector<StateActionTable> F = {f};
  const TransferCoeffReport r = transfer_coefficient(mdp, pi, nu, F);
  EXPECT_NEAR(r.candidates[0].numerator, num, 1e-12);
  EXPECT_NEAR(r.candidates[0].denominator, std::sqrt(den), 1e-12);
  EXPECT_NEAR(r.value.value(), std::max(0.0, num / std::sqrt(den)), 1e-12);
}

TEST(PerfDiff, Examples) {
  Rng rng = MakeRng(6);
  const TabularMDP mdp = make_random_mdp(4, 3, 4, rng);
  const IdentityCheck star = perf_diff_check(mdp, value_iteration(mdp).q);
  EXPECT_NEAR(star.lhs, 0.0, 1e-12);
  EXPECT_NEAR(star.rhs, 0.0, 1e-12);
  // Constant f telescopes.
  const IdentityCheck c = perf_diff_check(mdp, StateActionTable(4, 4, 3, 0.7));
  const Policy lowest = GreedyOf(StateActionTable(4, 4, 3, 0.7));
  EXPECT_NEAR(c.lhs, 0.7 - policy_value(mdp, lowest), 1e-12);
  EXPECT_LE(c.gap, 1e-12);
  for (int i = 0; i < 200; ++i) {
    const TabularMDP m = make_random_mdp(1 + UniformInt(rng, 6), 1 + UniformInt(rng, 4), 1 + UniformInt(rng, 6), rng);
    const StateActionTable f = RandomTable(m.horizon(), m.n_states(), m.n_actions(), m.v_max(), rng);
    EXPECT_LE(perf_diff_check(m, f).gap, 1e-9);
  }
}

TEST(Optimism, Examples) {
  Rng rng = MakeRng(7);
  const TabularMDP mdp = make_random_mdp(4, 3, 4, rng);
  const OptimalValues ov = value_iteration(mdp);
  const InequalityCheck star = optimism_check(mdp, ov.q, GreedyOf(ov.q));
  EXPECT_NEAR(star.lhs, 0.0, 1e-12);
  EXPECT_NEAR(star.rhs, 0.0, 1e-12);
  EXPECT_TRUE(star.holds);
  const Policy pi = make_random_policy(4, 4, 3, rng);
  const InequalityCheck zero = optimism_check(mdp, StateActionTable(4, 4, 3), pi);
  EXPECT_NEAR(zero.lhs, policy_value(mdp, pi), 1e-12);
  EXPECT_NEAR(zero.rhs, zero.lhs, 1e-12);
  EXPECT_TRUE(zero.holds);
}

TEST(DensityRatioChain, MatchedNuHasUnitDensityRatio) {
  Rng rng = MakeRng(8);
  const TabularMDP mdp = make_random_mdp(3, 2, 3, rng);
  const Policy pi = make_random_policy(3, 3, 2, rng);
  const StateActionTable nu = occupancy(mdp, pi).table();
  const std::vector<StateActionTable> F = {RandomTable(3, 3, 2, 3.0, rng)};
  const DensityRatioChain c = density_ratio_chain(mdp, pi, nu, F);
  EXPECT_NEAR(c.sup_density_ratio.value(), 1.0, 1e-12);
  EXPECT_NEAR(c.norm_ratio_bound.value(), 1.0, 1e-12);
  EXPECT_TRUE(c.corrected_chain_holds);
}

TEST(DensityRatioChain, DisjointSupportIsInfinite) {
  const HardInstance m1 = make_hard_instance(HardInstanceVariant::kM1);
  const std::vector<StateActionTable> F = {
      value_iteration(make_hard_instance(HardInstanceVariant::kM2).mdp).q};
  const DensityRatioChain c = density_ratio_chain(m1.mdp, HardInstancePolicy(kActionR, kActionR), AbSupport(), F);
  EXPECT_TRUE(c.c_pi.is_infinite());
  EXPECT_TRUE(c.norm_ratio_bound.is_infinite());
  EXPECT_TRUE(c.sup_density_ratio.is_infinite());
  EXPECT_TRUE(c.stated_chain_holds);
}

TEST(DensityRatioChain, NormRatioBelowDensityRatio) {
  Rng rng = MakeRng(9);
  for (int i = 0; i < 100; ++i) {
    const int H = 1 + UniformInt(rng, 5), S = 1 + UniformInt(rng, 5), A = 1 + UniformInt(rng, 3);
    const TabularMDP mdp = make_random_mdp(S, A, H, rng);
    const Policy pi = make_random_policy(H, S, A, rng);
    const StateActionTable nu(H, S, A, 1.0 / (S * A));
    const std::vector<StateActionTable> F = {RandomTable(H, S, A, mdp.v_max(), rng),
                                             RandomTable(H, S, A, mdp.v_max(), rng)};
    const DensityRatioChain c = density_ratio_chain(mdp, pi, nu, F);
    EXPECT_TRUE(c.norm_ratio_bound.LessOrEqual(c.sup_density_ratio, 1e-10));
    EXPECT_TRUE(c.corrected_chain_holds);
  }
}

TEST(RelativeConditionNumber, OneHotUniformNu) {
  Rng rng = MakeRng(10);
  const int H = 3, S = 3, A = 2;
  const TabularMDP mdp = make_random_mdp(S, A, H, rng);
  const Policy pi = make_random_policy(H, S, A, rng);
  const StateActionTable nu(H, S, A, 1.0 / (S * A));
  const FeatureMap phi = OneHotFeatures(H, S, A);
  const double got = relative_condition_number(phi, nu, pi, mdp).value();
  // Direct matrix oracle.
  const StateActionTable d = testing::ForwardOccupancy(mdp, pi);
  double best = 0.0;
  for (int h = 0; h < H; ++h) {
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(S * A, S * A);
    for (int i = 0; i < S * A; ++i) {
      const Eigen::Map<const Eigen::VectorXd> x(phi.at(h, i / A, i % A).data(), S * A);
      sigma += nu(h, i / A, i % A) * x * x.transpose();
    }
    const Eigen::MatrixXd inv = sigma.inverse();
    double e = 0.0;
    for (int i = 0; i < S * A; ++i) {
      const Eigen::Map<const Eigen::VectorXd> x(phi.at(h, i / A, i % A).data(), S * A);
      e += d(h, i / A, i % A) * x.dot(inv * x);
    }
    best = std::max(best, e);
  }
  EXPECT_NEAR(got, std::sqrt(best), 1e-10);
  EXPECT_NEAR(got, std::sqrt(S * A), 1e-10);
}

TEST(RelativeConditionNumber, ConstantFeatureIsOne) {
  Rng rng = MakeRng(11);
  const TabularMDP mdp = make_random_mdp(3, 2, 2, rng);
  FeatureMap phi{1, 2, 3, 2, std::vector<double>(12, 2.5)};
  const StateActionTable nu = RandomTable(2, 3, 2, 1.0, rng);
  StateActionTable nu_n = nu;
  for (int h = 0; h < 2; ++h) {
    double z = 0.0;
    for (double v : nu.slice(h)) z += v;
    for (double& v : nu_n.slice(h)) v /= z;
  }
  EXPECT_NEAR(relative_condition_number(phi, nu_n, make_random_policy(2, 3, 2, rng), mdp).value(), 1.0, 1e-12);
}

TEST(RelativeConditionNumber, MatchedNuGivesSqrtDim) {
  Rng rng = MakeRng(12);
  const TabularMDP mdp = make_random_mdp(3, 2, 3, rng);  // dense, random init
  const Policy pi = make_random_policy(3, 3, 2, rng);
  const StateActionTable nu = occupancy(mdp, pi).table();
  const ExtendedValue v = relative_condition_number(OneHotFeatures(3, 3, 2), nu, pi, mdp);
  EXPECT_LE(v.value(), std::sqrt(6.0) + 1e-9);
  EXPECT_NEAR(v.value(), std::sqrt(6.0), 1e-9);
}

TEST(RelativeConditionNumber, MassOutsideColumnSpaceIsInfinite) {
  const HardInstance m1 = make_hard_instance(HardInstanceVariant::kM1);
  const ExtendedValue v = relative_condition_number(OneHotFeatures(2, 3, 2), AbSupport(),
                                                    HardInstancePolicy(kActionR, kActionR), m1.mdp);
  EXPECT_TRUE(v.is_infinite());
}

TEST(EllipticalPotential, ScalarExample) {
  const std::vector<Eigen::VectorXd> xs(100, Eigen::VectorXd::Ones(1));
  const EllipticalCheck c = elliptical_potential_check(xs, 1.0);
  double direct = 0.0;
  for (int t = 1; t <= 100; ++t) direct += 1.0 / std::sqrt(t);
  EXPECT_NEAR(c.lhs, direct, 1e-10);
  EXPECT_NEAR(c.lhs, 18.59, 0.01);
  EXPECT_NEAR(c.rhs, std::sqrt(200 * std::log(101.0)), 1e-10);
  EXPECT_TRUE(c.holds);
}

TEST(EllipticalPotential, ZeroVectors) {
  const std::vector<Eigen::VectorXd> xs(10, Eigen::VectorXd::Zero(3));
  EXPECT_EQ(elliptical_potential_check(xs, 1.0).lhs, 0.0);
}

TEST(EllipticalPotential, RejectsSmallLambda) {
  const std::vector<Eigen::VectorXd> xs(3, Eigen::VectorXd::Constant(2, 1.0));
  EXPECT_THROW(elliptical_potential_check(xs, 1.5), std::invalid_argument);
  EXPECT_NO_THROW(elliptical_potential_check(xs, 2.0));
}

TEST(EllipticalPotential, MatchesDirectInverse) {
  Rng rng = MakeRng(13);
  std::vector<Eigen::VectorXd> xs;
  double bx2 = 0.0;
  for (int t = 0; t < 40; ++t) {
    Eigen::VectorXd x(4);
    for (int k = 0; k < 4; ++k) x[k] = StandardNormal(rng);
    bx2 = std::max(bx2, x.squaredNorm());
    xs.push_back(x);
  }
  Eigen::MatrixXd sigma = bx2 * Eigen::MatrixXd::Identity(4, 4);
  double direct = 0.0;
  for (const Eigen::VectorXd& x : xs) {
    direct += std::sqrt(x.dot(sigma.inverse() * x));
    sigma += x * x.transpose();
  }
  EXPECT_NEAR(elliptical_potential_check(xs, bx2).lhs, direct, 1e-10);
}

TEST(Covariance, InverseNorm) {
  Rng rng = MakeRng(14);
  CovarianceAccumulator acc(3, 0.5);
  for (int i = 0; i < 10; ++i) acc.Add(Eigen::Vector3d(StandardNormal(rng), StandardNormal(rng), StandardNormal(rng)));
  const Eigen::MatrixXd& s = acc.matrix();
  EXPECT_LT((s - s.transpose()).norm(), 1e-14);
  EXPECT_GT(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s).eigenvalues().minCoeff(), 0.0);
  const Eigen::Vector3d x(1.0, -2.0, 0.5);
  EXPECT_NEAR(acc.InverseNormSquared(x), x.dot(s.inverse() * x), 1e-12);
}

TEST(Bilinear, ExactOnTabular) {
  Rng rng = MakeRng(15);
  for (int i = 0; i < 100; ++i) {
    const TabularMDP mdp = make_random_mdp(1 + UniformInt(rng, 5), 1 + UniformInt(rng, 3), 1 + UniformInt(rng, 5), rng);
    const int H = mdp.horizon(), S = mdp.n_states(), A = mdp.n_actions();
    const StateActionTable f = RandomTable(H, S, A, mdp.v_max(), rng);
    const StateActionTable g = RandomTable(H, S, A, mdp.v_max(), rng);
    for (const BilinearStep& s : bilinear_verify(mdp, f, g)) {
      EXPECT_LE(s.gap, 1e-12);
      EXPECT_LE(s.x_norm, 1.0 + 1e-12);
    }
  }
}

TEST(Bilinear, QStarHasZeroResidual) {
  Rng rng = MakeRng(16);
  const TabularMDP mdp = make_random_mdp(4, 3, 4, rng);
  const StateActionTable f = RandomTable(4, 4, 3, mdp.v_max(), rng);
  for (const BilinearStep& s : bilinear_verify(mdp, f, value_iteration(mdp).q)) {
    EXPECT_NEAR(s.lhs, 0.0, 1e-12);
    EXPECT_NEAR(s.rhs, 0.0, 1e-12);
  }
}

TEST(DiscretizedClass, EnumeratesGrid) {
  const FeatureMap phi = OneHotFeatures(1, 1, 2);
  const std::vector<double> grid = {0.0, 0.5, 2.0};
  const std::vector<StateActionTable> F = DiscretizedLinearClass(phi, grid, 1.0);
  EXPECT_EQ(F.size(), 9u);
  for (const StateActionTable& f : F) {
    for (double v : f.data()) EXPECT_TRUE(v == 0.0 || v == 0.5 || v == 1.0);
  }
  EXPECT_THROW(DiscretizedLinearClass(OneHotFeatures(3, 3, 2), grid, 1.0), std::invalid_argument);
}

TEST(Reports, Json) {
  const HardInstance m1 = make_hard_instance(HardInstanceVariant::kM1);
  const std::vector<StateActionTable> F = {
      value_iteration(make_hard_instance(HardInstanceVariant::kM2).mdp).q};
  const TransferCoeffReport r = transfer_coefficient(m1.mdp, HardInstancePolicy(kActionR, kActionR), AbSupport(), F);
  const nlohmann::json j = ToJson(r);
  EXPECT_EQ(j["value"], "inf");
  EXPECT_EQ(j["maximizer"], 0);
}

}  // namespace
}  // namespace hyq
