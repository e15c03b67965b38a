// Copyright 2026 The demosel Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "demosel/core/model.hpp"

namespace demosel {

/// Cosine similarity clamped to [-1, 1]. Throws DimensionMismatch or ZeroVector.
double cosine(const EmbeddingVector& u, const EmbeddingVector& v);

/// Affine map of a cosine onto [0, 1].
constexpr double relevance_from_cosine(double c) noexcept { return (c + 1.0) / 2.0; }

/// softmax(sims / tau), computed with max subtraction. Throws Error if tau <= 0.
std::vector<double> softmax(std::span<const double> sims, double tau);

/// Similarity of the query to each candidate. A zero-norm vector on either
/// side yields similarity 0 and a logged warning instead of an error.
std::vector<double> similarities(const EmbeddingVector& query,
                                 std::span<const EmbeddingVector> candidates);

/// InfoNCE probabilities exp(sim_i/tau) / sum_j exp(sim_j/tau) over all candidates.
std::vector<double> infonce_scores(const EmbeddingVector& query,
                                   std::span<const EmbeddingVector> candidates, double tau);

/// Indices of the `m` largest keys in descending order, ties by ascending index.
std::vector<std::size_t> top_m(std::span<const double> keys, std::size_t m);

}  // namespace demosel
