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

#include "hyq/rng.h"

#include <cmath>
#include <stdexcept>

namespace hyq {

namespace {

// splitmix64 finalizer; decorrelates nearby (seed, stream) pairs.
uint64_t Mix(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Rng MakeRng(uint64_t seed, uint64_t stream) {
  return Rng(Mix(Mix(seed) ^ (stream * 0xd1b54a32d192ed03ULL + 1)));
}

double Uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int UniformInt(Rng& rng, int n) {
  if (n <= 0) throw std::invalid_argument("UniformInt: n must be positive");
  const uint64_t range = static_cast<uint64_t>(n);
  const uint64_t limit = Rng::max() - Rng::max() % range;
  uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<int>(x % range);
}

double StandardNormal(Rng& rng) {
  double u, v, s;
  do {
    u = 2.0 * Uniform01(rng) - 1.0;
    v = 2.0 * Uniform01(rng) - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  return u * std::sqrt(-2.0 * std::log(s) / s);
}

int SampleCategorical(Rng& rng, std::span<const double> probs) {
  const double u = Uniform01(rng);
  double acc = 0.0;
  int last_positive = -1;
  for (size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last_positive = static_cast<int>(i);
    if (u < acc) return last_positive;
  }
  if (last_positive < 0) {
    throw std::invalid_argument("SampleCategorical: no positive mass");
  }
  return last_positive;
}

}  // namespace hyq
