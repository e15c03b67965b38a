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

#include "demosel/selector/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "demosel/errors.hpp"

namespace demosel {

double cosine(const EmbeddingVector& u, const EmbeddingVector& v) {
    if (u.dim() != v.dim()) {
        throw DimensionMismatch("cosine of vectors with dims " + std::to_string(u.dim()) + " and " +
                                std::to_string(v.dim()));
    }
    const auto a = u.values();
    const auto b = v.values();
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) {
        throw ZeroVector("cosine of a zero-norm vector");
    }
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

std::vector<double> softmax(std::span<const double> sims, double tau) {
    if (!(tau > 0.0)) {
        throw Error("softmax temperature must be positive");
    }
    if (sims.empty()) {
        return {};
    }
    const double peak = *std::max_element(sims.begin(), sims.end());
    std::vector<double> out(sims.size());
    double total = 0.0;
    for (std::size_t i = 0; i < sims.size(); ++i) {
        out[i] = std::exp((sims[i] - peak) / tau);
        total += out[i];
    }
    for (double& p : out) {
        p /= total;
    }
    return out;
}

std::vector<double> similarities(const EmbeddingVector& query,
                                 std::span<const EmbeddingVector> candidates) {
    std::vector<double> sims;
    sims.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        try {
            sims.push_back(cosine(query, candidates[i]));
        } catch (const ZeroVector&) {
            spdlog::warn("zero-norm embedding at candidate {}; similarity set to 0", i);
            sims.push_back(0.0);
        }
    }
    return sims;
}

std::vector<double> infonce_scores(const EmbeddingVector& query,
                                   std::span<const EmbeddingVector> candidates, double tau) {
    if (candidates.empty()) {
        throw Error("infonce_scores needs at least one candidate");
    }
    const auto sims = similarities(query, candidates);
    return softmax(sims, tau);
}

std::vector<std::size_t> top_m(std::span<const double> keys, std::size_t m) {
    std::vector<std::size_t> order(keys.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t k = std::min(m, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          return keys[a] != keys[b] ? keys[a] > keys[b] : a < b;
                      });
    order.resize(k);
    return order;
}

}  // namespace demosel
