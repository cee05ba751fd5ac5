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

#include "hyq/analysis.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hyq {

using nlohmann::json;

double ExtendedValue::value() const {
  if (infinite_) throw std::logic_error("ExtendedValue: value() of +infinity");
  return finite_;
}

double ExtendedValue::as_double() const {
  return infinite_ ? std::numeric_limits<double>::infinity() : finite_;
}

bool ExtendedValue::LessOrEqual(const ExtendedValue& other, double tol) const {
  if (other.infinite_) return true;
  if (infinite_) return false;
  return finite_ <= other.finite_ + tol;
}

ExtendedValue ExtendedValue::Max(const ExtendedValue& other) const {
  return LessOrEqual(other) ? other : *this;
}

ExtendedValue ExtendedValue::Sqrt() const {
  return infinite_ ? *this : Finite(std::sqrt(finite_));
}

ExtendedValue ExtendedValue::Scale(double c) const {
  if (c < 0.0) throw std::invalid_argument("ExtendedValue::Scale: negative factor");
  return infinite_ ? *this : Finite(c * finite_);
}

json ToJson(const ExtendedValue& v) {
  if (v.is_infinite()) return "inf";
  return v.value();
}

BellmanResidual bellman_residual(const TabularMDP& mdp, const StateActionTable& f) {
  const int H = mdp.horizon();
  BellmanResidual out{StateActionTable(H, mdp.n_states(), mdp.n_actions())};
  for (int h = 0; h < H; ++h) {
    std::span<const double> next;
    if (h + 1 < H) next = f.slice(h + 1);
    const std::vector<double> tf = bellman_backup(mdp, next, h);
    std::span<const double> fh = f.slice(h);
    std::span<double> e = out.eps.slice(h);
    for (size_t i = 0; i < tf.size(); ++i) e[i] = fh[i] - tf[i];
  }
  return out;
}

Policy GreedyOf(const StateActionTable& f) {
  const int H = f.horizon();
  const int S = f.n_states();
  std::vector<int> actions(static_cast<size_t>(H) * S);
  for (int h = 0; h < H; ++h) {
    for (int s = 0; s < S; ++s) {
      std::span<const double> row = f.row(h, s);
      actions[h * S + s] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
  }
  return Policy::Deterministic(H, S, f.n_actions(), actions);
}

namespace {

double Expect(std::span<const double> dist, std::span<const double> values) {
  double acc = 0.0;
  for (size_t i = 0; i < dist.size(); ++i) acc += dist[i] * values[i];
  return acc;
}

double ExpectSquared(std::span<const double> dist, std::span<const double> values) {
  double acc = 0.0;
  for (size_t i = 0; i < dist.size(); ++i) acc += dist[i] * values[i] * values[i];
  return acc;
}

void CheckNu(const TabularMDP& mdp, const StateActionTable& nu) {
  if (nu.horizon() != mdp.horizon() || nu.n_states() != mdp.n_states() ||
      nu.n_actions() != mdp.n_actions()) {
    throw std::invalid_argument("nu shape does not match the MDP");
  }
}

}  // namespace

TransferCoeffReport transfer_coefficient(const TabularMDP& mdp, const Policy& pi,
                                         const StateActionTable& nu,
                                         std::span<const StateActionTable> f_class) {
  CheckNu(mdp, nu);
  const int H = mdp.horizon();
  const OccupancyMeasure d = occupancy(mdp, pi);
  TransferCoeffReport report;
  report.value = ExtendedValue::Finite(0.0);
  for (size_t k = 0; k < f_class.size(); ++k) {
    const BellmanResidual res = bellman_residual(mdp, f_class[k]);
    CandidateRatio c;
    double den2 = 0.0;
    for (int h = 0; h < H; ++h) {
      c.numerator -= Expect(d.slice(h), res.eps.slice(h));
      den2 += ExpectSquared(nu.slice(h), res.eps.slice(h));
    }
    c.denominator = std::sqrt(den2);
    if (c.numerator <= kZeroMass) {
      c.ratio = ExtendedValue::Finite(0.0);
    } else if (c.denominator <= kZeroMass) {
      c.ratio = ExtendedValue::Infinity();
    } else {
      c.ratio = ExtendedValue::Finite(c.numerator / c.denominator);
    }
    if (!c.ratio.LessOrEqual(report.value)) {
      report.value = c.ratio;
      report.maximizer = static_cast<int>(k);
    }
    report.candidates.push_back(c);
  }
  return report;
}

IdentityCheck perf_diff_check(const TabularMDP& mdp, const StateActionTable& f) {
  const int H = mdp.horizon();
  const int S = mdp.n_states();
  const Policy pi = GreedyOf(f);
  const PolicyValues v = evaluate_policy(mdp, pi);
  IdentityCheck c;
  for (int s = 0; s < S; ++s) {
    std::span<const double> row = f.row(0, s);
    c.lhs += mdp.init_dist()[s] * (*std::max_element(row.begin(), row.end()) - v.v(0, s));
  }
  const OccupancyMeasure d = occupancy(mdp, pi);
  const BellmanResidual res = bellman_residual(mdp, f);
  for (int h = 0; h < H; ++h) c.rhs += Expect(d.slice(h), res.eps.slice(h));
  c.gap = std::abs(c.lhs - c.rhs);
  return c;
}

InequalityCheck optimism_check(const TabularMDP& mdp, const StateActionTable& f,
                               const Policy& pi_e, double tol) {
  const int H = mdp.horizon();
  const int S = mdp.n_states();
  const PolicyValues v = evaluate_policy(mdp, pi_e);
  InequalityCheck c;
  for (int s = 0; s < S; ++s) {
    std::span<const double> row = f.row(0, s);
    c.lhs += mdp.init_dist()[s] * (v.v(0, s) - *std::max_element(row.begin(), row.end()));
  }
  const OccupancyMeasure d = occupancy(mdp, pi_e);
  const BellmanResidual res = bellman_residual(mdp, f);
  for (int h = 0; h < H; ++h) c.rhs -= Expect(d.slice(h), res.eps.slice(h));
  c.holds = c.lhs <= c.rhs + tol;
  return c;
}

DensityRatioChain density_ratio_chain(const TabularMDP& mdp, const Policy& pi,
                                      const StateActionTable& nu,
                                      std::span<const StateActionTable> f_class,
                                      double tol) {
  CheckNu(mdp, nu);
  const int H = mdp.horizon();
  const OccupancyMeasure d = occupancy(mdp, pi);
  DensityRatioChain chain;
  chain.c_pi = transfer_coefficient(mdp, pi, nu, f_class).value;

  ExtendedValue max_ratio = ExtendedValue::Finite(0.0);
  for (const StateActionTable& f : f_class) {
    const BellmanResidual res = bellman_residual(mdp, f);
    for (int h = 0; h < H; ++h) {
      const double num = ExpectSquared(d.slice(h), res.eps.slice(h));
      const double den = ExpectSquared(nu.slice(h), res.eps.slice(h));
      // 0/0 steps carry no information and are skipped.
      if (num <= kZeroMass * kZeroMass) continue;
      max_ratio = max_ratio.Max(den <= kZeroMass * kZeroMass ? ExtendedValue::Infinity()
                                                             : ExtendedValue::Finite(num / den));
    }
  }
  chain.norm_ratio_bound = max_ratio.Sqrt();
  chain.corrected_norm_ratio_bound = chain.norm_ratio_bound.Scale(std::sqrt(static_cast<double>(H)));

  ExtendedValue sup = ExtendedValue::Finite(0.0);
  for (int h = 0; h < H; ++h) {
    std::span<const double> dh = d.slice(h);
    std::span<const double> nh = nu.slice(h);
    for (size_t i = 0; i < dh.size(); ++i) {
      if (dh[i] <= 0.0) continue;
      sup = sup.Max(nh[i] <= 0.0 ? ExtendedValue::Infinity() : ExtendedValue::Finite(dh[i] / nh[i]));
    }
  }
  chain.sup_density_ratio = sup;

  const bool right = chain.norm_ratio_bound.LessOrEqual(chain.sup_density_ratio, tol);
  chain.stated_chain_holds = chain.c_pi.LessOrEqual(chain.norm_ratio_bound, tol) && right;
  chain.corrected_chain_holds =
      chain.c_pi.LessOrEqual(chain.corrected_norm_ratio_bound, tol) && right;
  return chain;
}

ExtendedValue relative_condition_number(const FeatureMap& phi, const StateActionTable& nu,
                                        const Policy& pi, const TabularMDP& mdp) {
  CheckNu(mdp, nu);
  if (phi.horizon != mdp.horizon() || phi.n_states != mdp.n_states() ||
      phi.n_actions != mdp.n_actions()) {
    throw std::invalid_argument("relative_condition_number: feature map shape");
  }
  const int H = mdp.horizon();
  const int S = mdp.n_states();
  const int A = mdp.n_actions();
  const int p = phi.dim;
  const OccupancyMeasure d = occupancy(mdp, pi);
  auto vec = [&](int h, int s, int a) {
    std::span<const double> v = phi.at(h, s, a);
    return Eigen::Map<const Eigen::VectorXd>(v.data(), p);
  };
  double worst = 0.0;
  for (int h = 0; h < H; ++h) {
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(p, p);
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const double w = nu(h, s, a);
        if (w > 0.0) sigma.noalias() += w * vec(h, s, a) * vec(h, s, a).transpose();
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
    const Eigen::VectorXd& lam = eig.eigenvalues();
    const double cutoff = kColumnSpaceTolerance * std::max(1.0, lam.cwiseAbs().maxCoeff());
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd keep = Eigen::VectorXd::Zero(p);
    for (int i = 0; i < p; ++i) {
      if (lam[i] > cutoff) {
        inv[i] = 1.0 / lam[i];
        keep[i] = 1.0;
      }
    }
    const Eigen::MatrixXd& U = eig.eigenvectors();
    double e = 0.0;
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const double w = d(h, s, a);
        if (w <= 0.0) continue;
        const Eigen::VectorXd c = U.transpose() * vec(h, s, a);
        const double outside = (c.array() * (1.0 - keep.array())).matrix().norm();
        if (outside > kColumnSpaceTolerance * std::max(1.0, c.norm())) {
          return ExtendedValue::Infinity();
        }
        e += w * (c.array().square() * inv.array()).sum();
      }
    }
    worst = std::max(worst, e);
  }
  return ExtendedValue::Finite(std::sqrt(worst));
}

EllipticalCheck elliptical_potential_check(std::span<const Eigen::VectorXd> xs,
                                           double lambda) {
  EllipticalCheck c;
  if (xs.empty()) {
    c.holds = true;
    return c;
  }
  const Eigen::Index d = xs.front().size();
  double bx2 = 0.0;
  for (const Eigen::VectorXd& x : xs) {
    if (x.size() != d) throw std::invalid_argument("elliptical_potential_check: ragged input");
    bx2 = std::max(bx2, x.squaredNorm());
  }
  if (!(lambda > 0.0) || lambda < bx2) {
    throw std::invalid_argument("elliptical_potential_check: need lambda >= max ||x||^2 and > 0");
  }
  // Sherman-Morrison on Sigma^{-1}.
  Eigen::MatrixXd inv = Eigen::MatrixXd::Identity(d, d) / lambda;
  for (const Eigen::VectorXd& x : xs) {
    const Eigen::VectorXd u = inv * x;
    const double q = x.dot(u);
    c.lhs += std::sqrt(std::max(0.0, q));
    inv -= (u * u.transpose()) / (1.0 + q);
  }
  const double T = static_cast<double>(xs.size());
  const double dd = static_cast<double>(d);
  c.rhs = std::sqrt(2.0 * dd * T * std::log1p(T * bx2 / (lambda * dd)));
  c.holds = c.lhs <= c.rhs * (1.0 + 1e-12) + 1e-12;
  return c;
}

std::vector<BilinearStep> bilinear_verify(const TabularMDP& mdp, const StateActionTable& f,
                                          const StateActionTable& g) {
  const int H = mdp.horizon();
  const int S = mdp.n_states();
  const int A = mdp.n_actions();
  const Policy pi = GreedyOf(f);
  const OccupancyMeasure d = occupancy(mdp, pi);
  const BellmanResidual res = bellman_residual(mdp, g);
  std::vector<BilinearStep> out(H);
  for (int h = 0; h < H; ++h) {
    // Left side through the state marginal and the policy.
    const std::vector<double> ds = d.StateMarginal(h);
    double lhs = 0.0;
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) lhs += ds[s] * pi.prob(h, s, a) * res.eps(h, s, a);
    }
    const Eigen::Map<const Eigen::VectorXd> x(d.slice(h).data(), S * A);
    const Eigen::Map<const Eigen::VectorXd> w(res.eps.slice(h).data(), S * A);
    out[h].lhs = lhs;
    out[h].rhs = x.dot(w);
    out[h].gap = std::abs(std::abs(out[h].lhs) - std::abs(out[h].rhs));
    out[h].x_norm = x.norm();
  }
  return out;
}

CovarianceAccumulator::CovarianceAccumulator(int dim, double lambda)
    : lambda_(lambda), sigma_(Eigen::MatrixXd::Identity(dim, dim) * lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("CovarianceAccumulator: lambda < 0");
}

void CovarianceAccumulator::Add(const Eigen::VectorXd& x) {
  sigma_.noalias() += x * x.transpose();
}

double CovarianceAccumulator::InverseNormSquared(const Eigen::VectorXd& x) const {
  return x.dot(sigma_.ldlt().solve(x));
}

std::vector<StateActionTable> DiscretizedLinearClass(const FeatureMap& phi,
                                                     std::span<const double> grid,
                                                     double v_max, size_t max_candidates) {
  if (grid.empty()) throw std::invalid_argument("DiscretizedLinearClass: empty grid");
  const int H = phi.horizon;
  const int p = phi.dim;
  // Candidates = |grid|^(p * H).
  size_t count = 1;
  for (int i = 0; i < p * H; ++i) {
    if (count > max_candidates / grid.size()) {
      throw std::invalid_argument("DiscretizedLinearClass: class exceeds the candidate cap");
    }
    count *= grid.size();
  }
  std::vector<StateActionTable> out;
  out.reserve(count);
  std::vector<size_t> digit(static_cast<size_t>(p) * H, 0);
  for (size_t c = 0; c < count; ++c) {
    StateActionTable f(H, phi.n_states, phi.n_actions);
    for (int h = 0; h < H; ++h) {
      for (int s = 0; s < phi.n_states; ++s) {
        for (int a = 0; a < phi.n_actions; ++a) {
          std::span<const double> v = phi.at(h, s, a);
          double acc = 0.0;
          for (int k = 0; k < p; ++k) acc += grid[digit[h * p + k]] * v[k];
          f(h, s, a) = Clip(acc, 0.0, v_max);
        }
      }
    }
    out.push_back(std::move(f));
    for (size_t i = 0; i < digit.size(); ++i) {
      if (++digit[i] < grid.size()) break;
      digit[i] = 0;
    }
  }
  return out;
}

json ToJson(const TransferCoeffReport& report) {
  json doc;
  doc["value"] = ToJson(report.value);
  doc["maximizer"] = report.maximizer;
  json cands = json::array();
  for (const CandidateRatio& c : report.candidates) {
    cands.push_back({{"numerator", c.numerator},
                     {"denominator", c.denominator},
                     {"ratio", ToJson(c.ratio)}});
  }
  doc["candidates"] = std::move(cands);
  return doc;
}

json ToJson(const DensityRatioChain& chain) {
  return {{"c_pi", ToJson(chain.c_pi)},
          {"norm_ratio_bound", ToJson(chain.norm_ratio_bound)},
          {"sup_density_ratio", ToJson(chain.sup_density_ratio)},
          {"corrected_norm_ratio_bound", ToJson(chain.corrected_norm_ratio_bound)},
          {"stated_chain_holds", chain.stated_chain_holds},
          {"corrected_chain_holds", chain.corrected_chain_holds}};
}

}  // namespace hyq
