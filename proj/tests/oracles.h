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

// Straight-line reference computations used as test oracles. Nothing here
// calls into the library's DP routines.

#ifndef HYQ_TESTS_ORACLES_H_
#define HYQ_TESTS_ORACLES_H_

#include <algorithm>
#include <functional>
#include <vector>

#include "hyq/mdp.h"

namespace hyq::testing {

// Value of the deterministic Markov policy actions[h * S + s], by forward
// propagation of the state distribution.
inline double DeterministicValue(const TabularMDP& mdp, const std::vector<int>& actions) {
  const int H = mdp.horizon(), S = mdp.n_states();
  std::vector<double> p(mdp.init_dist().begin(), mdp.init_dist().end());
  double total = 0.0;
  for (int h = 0; h < H; ++h) {
    std::vector<double> next(S, 0.0);
    for (int s = 0; s < S; ++s) {
      if (p[s] == 0.0) continue;
      const int a = actions[h * S + s];
      total += p[s] * mdp.reward_mean(h, s, a);
      for (int t = 0; t < S; ++t) next[t] += p[s] * mdp.transition_prob(h, s, a, t);
    }
    p = std::move(next);
  }
  return total;
}

// max over all |A|^(S H) deterministic Markov policies. Depth-first over
// decisions in (h, s) order; the state distribution is pushed forward once a
// step is fully decided.
inline double BruteForceOptimalValue(const TabularMDP& mdp) {
  const int H = mdp.horizon(), S = mdp.n_states(), A = mdp.n_actions();
  std::vector<int> act(H * S);
  double best = -1e300;
  std::function<void(int, int, const std::vector<double>&, double)> rec =
      [&](int h, int s, const std::vector<double>& p, double acc) {
        if (h == H) {
          best = std::max(best, acc);
          return;
        }
        if (s == S) {
          std::vector<double> next(S, 0.0);
          double r = 0.0;
          for (int x = 0; x < S; ++x) {
            if (p[x] == 0.0) continue;
            r += p[x] * mdp.reward_mean(h, x, act[h * S + x]);
            for (int t = 0; t < S; ++t) next[t] += p[x] * mdp.transition_prob(h, x, act[h * S + x], t);
          }
          rec(h + 1, 0, next, acc + r);
          return;
        }
        // Unreached states: one branch is enough.
        const int n = p[s] == 0.0 ? 1 : A;
        for (int a = 0; a < n; ++a) {
          act[h * S + s] = a;
          rec(h, s + 1, p, acc);
        }
      };
  std::vector<double> p0(mdp.init_dist().begin(), mdp.init_dist().end());
  rec(0, 0, p0, 0.0);
  return best;
}

// E[R] + sum_s' P max_a' f_{h+1}, written out directly.
inline double BackupAt(const TabularMDP& mdp, const StateActionTable& f, int h, int s, int a) {
  double v = mdp.reward_mean(h, s, a);
  if (h + 1 == mdp.horizon()) return v;
  for (int t = 0; t < mdp.n_states(); ++t) {
    double m = f(h + 1, t, 0);
    for (int b = 1; b < mdp.n_actions(); ++b) m = std::max(m, f(h + 1, t, b));
    v += mdp.transition_prob(h, s, a, t) * m;
  }
  return v;
}

// Forward state-action occupancy of a (possibly stochastic) policy.
inline StateActionTable ForwardOccupancy(const TabularMDP& mdp, const Policy& pi) {
  const int H = mdp.horizon(), S = mdp.n_states(), A = mdp.n_actions();
  StateActionTable d(H, S, A);
  std::vector<double> p(mdp.init_dist().begin(), mdp.init_dist().end());
  for (int h = 0; h < H; ++h) {
    std::vector<double> next(S, 0.0);
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        d(h, s, a) = p[s] * pi.prob(h, s, a);
        for (int t = 0; t < S; ++t) next[t] += d(h, s, a) * mdp.transition_prob(h, s, a, t);
      }
    }
    p = std::move(next);
  }
  return d;
}

}  // namespace hyq::testing

#endif  // HYQ_TESTS_ORACLES_H_
