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

#ifndef HYQ_RNG_H_
#define HYQ_RNG_H_

#include <cstdint>
#include <random>
#include <span>

namespace hyq {

// All sampling goes through mt19937_64 plus the helpers below rather than the
// <random> distributions, whose output is implementation-defined. This keeps
// datasets and run records byte-identical across standard libraries.
using Rng = std::mt19937_64;

// Derives an independent stream from a base seed and a stream tag.
Rng MakeRng(uint64_t seed, uint64_t stream = 0);

// Uniform in [0, 1) with 53 random bits.
double Uniform01(Rng& rng);

// Uniform integer in [0, n). Unbiased (rejection sampling).
int UniformInt(Rng& rng, int n);

// Standard normal via the Marsaglia polar method.
double StandardNormal(Rng& rng);

// Draws an index from a probability vector. Entries are assumed nonnegative
// and summing to one; round-off at the tail falls on the last positive entry.
int SampleCategorical(Rng& rng, std::span<const double> probs);

}  // namespace hyq

#endif  // HYQ_RNG_H_
