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

#include "demosel/backends/hashing.hpp"

#include <cctype>
#include <cmath>

#include "demosel/core/hash.hpp"
#include "demosel/errors.hpp"

namespace demosel {

std::vector<std::string> word_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c) || c >= 0x80) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) {
        out.push_back(std::move(cur));
    }
    return out;
}

HashingEmbedder::HashingEmbedder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim_ == 0) {
        throw ConfigError("hashing embedder dimension must be positive");
    }
}

std::string HashingEmbedder::model_name() const {
    return "hashing-" + std::to_string(dim_) + "-" + std::to_string(seed_);
}

EmbeddingVector HashingEmbedder::embed_text(std::string_view text) const {
    auto tokens = word_tokens(text);
    if (tokens.empty()) {
        // Punctuation-only input still gets a stable, non-zero vector.
        std::string whole;
        for (unsigned char c : text) {
            if (!std::isspace(c)) {
                whole.push_back(static_cast<char>(c));
            }
        }
        tokens.push_back(std::move(whole));
    }
    const std::uint64_t basis = 0xcbf29ce484222325ULL ^ mix64(seed_);
    std::vector<double> signed_counts(dim_, 0.0);
    std::vector<double> counts(dim_, 0.0);
    for (const auto& t : tokens) {
        const std::uint64_t h = fnv1a64(t, basis);
        const std::size_t bucket = static_cast<std::size_t>(mix64(h) % dim_);
        signed_counts[bucket] += (h >> 63) != 0 ? -1.0 : 1.0;
        counts[bucket] += 1.0;
    }
    double sq = 0.0;
    for (double v : signed_counts) {
        sq += v * v;
    }
    // Every feature cancelled out: fall back to unsigned counts.
    auto& chosen = sq > 0.0 ? signed_counts : counts;
    if (sq == 0.0) {
        for (double v : counts) {
            sq += v * v;
        }
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (double& v : chosen) {
        v *= inv;
    }
    return EmbeddingVector(std::move(chosen));
}

std::vector<EmbeddingVector> HashingEmbedder::do_embed(std::span<const std::string> texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        out.push_back(embed_text(t));
    }
    return out;
}

}  // namespace demosel
