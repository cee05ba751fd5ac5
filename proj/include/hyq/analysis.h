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

// Exact coverage and Bellman-error quantities on tabular instances, and
// numeric checks of the identities and inequalities built on them.

#ifndef HYQ_ANALYSIS_H_
#define HYQ_ANALYSIS_H_

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hyq/function_approx.h"
#include "hyq/mdp.h"
#include "json.hpp"

namespace hyq {

// A nonnegative-or-finite real, or +infinity as its own state.
class ExtendedValue {
 public:
  ExtendedValue() = default;
  static ExtendedValue Finite(double x) { return ExtendedValue(false, x); }
  static ExtendedValue Infinity() { return ExtendedValue(true, 0.0); }

  bool is_infinite() const { return infinite_; }
  // Throws on +infinity.
  double value() const;
  // +inf as the IEEE value; for printing and plotting only.
  double as_double() const;

  // a <= b + tol, with +inf <= +inf.
  bool LessOrEqual(const ExtendedValue& other, double tol = 0.0) const;
  ExtendedValue Max(const ExtendedValue& other) const;
  ExtendedValue Sqrt() const;
  ExtendedValue Scale(double c) const;  // c >= 0

  bool operator==(const ExtendedValue&) const = default;

 private:
  ExtendedValue(bool inf, double x) : infinite_(inf), finite_(x) {}
  bool infinite_ = false;
  double finite_ = 0.0;
};

nlohmann::json ToJson(const ExtendedValue& v);

// Magnitudes below this count as exact zeros in ratios.
inline constexpr double kZeroMass = 1e-12;

struct BellmanResidual {
  // eps_h(s, a) = f_h(s, a) - (T f_{h+1})(s, a)
  StateActionTable eps;
};

BellmanResidual bellman_residual(const TabularMDP& mdp, const StateActionTable& f);

// Greedy policy of f, lowest index on ties.
Policy GreedyOf(const StateActionTable& f);

struct CandidateRatio {
  double numerator = 0.0;    // sum_h E_{d_h^pi}[T f_{h+1} - f_h]
  double denominator = 0.0;  // sqrt(sum_h E_{nu_h}[(T f_{h+1} - f_h)^2])
  ExtendedValue ratio;       // 0 when numerator <= 0
};

struct TransferCoeffReport {
  ExtendedValue value;
  int maximizer = -1;  // index into the class; -1 when the value is 0 by convention
  std::vector<CandidateRatio> candidates;
};

TransferCoeffReport transfer_coefficient(const TabularMDP& mdp, const Policy& pi,
                                         const StateActionTable& nu,
                                         std::span<const StateActionTable> f_class);

struct IdentityCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double gap = 0.0;
};

// lhs = E_{d0}[max_a f_0 - V_0^{pi^f}], rhs = sum_h E_{d_h^{pi^f}}[eps_h(f)].
IdentityCheck perf_diff_check(const TabularMDP& mdp, const StateActionTable& f);

struct InequalityCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

// lhs = E_{d0}[V_0^{pi_e} - max_a f_0], rhs = sum_h E_{d_h^{pi_e}}[T f_{h+1} - f_h].
InequalityCheck optimism_check(const TabularMDP& mdp, const StateActionTable& f,
                               const Policy& pi_e, double tol = 1e-10);

struct DensityRatioChain {
  ExtendedValue c_pi;
  // sqrt(max_{f, h} ||eps||^2_{d_h} / ||eps||^2_{nu_h})
  ExtendedValue norm_ratio_bound;
  ExtendedValue sup_density_ratio;
  // sqrt(H) * norm_ratio_bound: what Cauchy-Schwarz across steps allows.
  ExtendedValue corrected_norm_ratio_bound;
  // c_pi <= norm_ratio_bound <= sup_density_ratio
  bool stated_chain_holds = false;
  // c_pi <= corrected_norm_ratio_bound and norm_ratio_bound <= sup_density_ratio
  bool corrected_chain_holds = false;
};

DensityRatioChain density_ratio_chain(const TabularMDP& mdp, const Policy& pi,
                                      const StateActionTable& nu,
                                      std::span<const StateActionTable> f_class,
                                      double tol = 1e-10);

// sqrt(max_h E_{d_h^pi} phi^T Sigma_{nu_h}^+ phi); +infinity when d_h^pi puts
// mass on features outside the column space of Sigma_{nu_h}.
ExtendedValue relative_condition_number(const FeatureMap& phi, const StateActionTable& nu,
                                        const Policy& pi, const TabularMDP& mdp);

// Relative residual of a projection onto col(Sigma) that counts as outside.
inline constexpr double kColumnSpaceTolerance = 1e-10;

struct EllipticalCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

// lhs = sum_t ||x_t||_{Sigma_{t-1}^{-1}} with Sigma_0 = lambda I, rhs =
// sqrt(2 d T log(1 + T B_X^2 / (lambda d))). Requires lambda >= max ||x_t||^2.
EllipticalCheck elliptical_potential_check(std::span<const Eigen::VectorXd> xs,
                                           double lambda);

struct BilinearStep {
  double lhs = 0.0;  // E_{d_h^{pi^f}}[g_h - T g_{h+1}]
  double rhs = 0.0;  // <X_h(f), W_h(g)>
  double gap = 0.0;
  double x_norm = 0.0;  // ||X_h(f)||_2
};

std::vector<BilinearStep> bilinear_verify(const TabularMDP& mdp, const StateActionTable& f,
                                          const StateActionTable& g);

// Sigma = sum x x^T + lambda I.
class CovarianceAccumulator {
 public:
  CovarianceAccumulator(int dim, double lambda);

  void Add(const Eigen::VectorXd& x);
  const Eigen::MatrixXd& matrix() const { return sigma_; }
  double lambda() const { return lambda_; }
  // x^T Sigma^{-1} x
  double InverseNormSquared(const Eigen::VectorXd& x) const;

 private:
  double lambda_;
  Eigen::MatrixXd sigma_;
};

// Every f_h = <w_h, phi> with each weight coordinate on `grid`, clipped to
// [0, v_max]. Throws when the class would exceed `max_candidates`.
std::vector<StateActionTable> DiscretizedLinearClass(const FeatureMap& phi,
                                                     std::span<const double> grid,
                                                     double v_max,
                                                     size_t max_candidates = 100000);

nlohmann::json ToJson(const TransferCoeffReport& report);
nlohmann::json ToJson(const DensityRatioChain& chain);

}  // namespace hyq

#endif  // HYQ_ANALYSIS_H_
