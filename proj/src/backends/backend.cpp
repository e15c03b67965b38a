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

#include "demosel/backends/backend.hpp"

#include <algorithm>
#include <cctype>

#include "demosel/errors.hpp"

namespace demosel {

void GenRequest::validate() const {
    if (max_tokens <= 0) {
        throw Error("max_tokens must be positive");
    }
    if (temperature < 0.0) {
        throw Error("temperature must be non-negative");
    }
    if (stop.size() > 4) {
        throw Error("at most 4 stop sequences are allowed");
    }
}

CallTelemetry& CallTelemetry::operator+=(const CallTelemetry& other) {
    gen_calls += other.gen_calls;
    embed_calls += other.embed_calls;
    tokens_in += other.tokens_in;
    tokens_out += other.tokens_out;
    return *this;
}

void TelemetryCounters::record_generation(std::uint64_t tokens_in, std::uint64_t tokens_out) {
    gen_calls_.fetch_add(1, std::memory_order_relaxed);
    tokens_in_.fetch_add(tokens_in, std::memory_order_relaxed);
    tokens_out_.fetch_add(tokens_out, std::memory_order_relaxed);
}

void TelemetryCounters::record_embedding(std::uint64_t tokens_in) {
    embed_calls_.fetch_add(1, std::memory_order_relaxed);
    tokens_in_.fetch_add(tokens_in, std::memory_order_relaxed);
}

CallTelemetry TelemetryCounters::snapshot() const {
    return {gen_calls_.load(std::memory_order_relaxed), embed_calls_.load(std::memory_order_relaxed),
            tokens_in_.load(std::memory_order_relaxed), tokens_out_.load(std::memory_order_relaxed)};
}

std::uint64_t approx_tokens(std::string_view text) {
    std::uint64_t n = 0;
    bool in_word = false;
    for (unsigned char c : text) {
        const bool space = std::isspace(c) != 0;
        if (!space && !in_word) {
            ++n;
        }
        in_word = !space;
    }
    return n;
}

std::string apply_stops(std::string text, std::span<const std::string> stops) {
    std::size_t cut = text.size();
    for (const auto& s : stops) {
        if (s.empty()) {
            continue;
        }
        cut = std::min(cut, text.find(s));
    }
    text.resize(cut);
    return text;
}

std::string GenerationBackend::generate(const GenRequest& request) {
    request.validate();
    std::string out;
    try {
        out = do_generate(request);
    } catch (...) {
        counters_.record_generation(approx_tokens(request.prompt), 0);
        throw;
    }
    counters_.record_generation(approx_tokens(request.prompt), approx_tokens(out));
    if (out.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw EmptyCompletion("backend '" + model_name() + "' returned an empty completion");
    }
    return out;
}

std::vector<EmbeddingVector> EmbeddingBackend::embed(std::span<const std::string> texts) {
    if (texts.empty()) {
        throw Error("embed() needs at least one text");
    }
    std::uint64_t tokens = 0;
    for (const auto& t : texts) {
        if (t.find_first_not_of(" \t\r\n") == std::string::npos) {
            throw Error("embed() input is blank");
        }
        tokens += approx_tokens(t);
    }
    counters_.record_embedding(tokens);
    auto out = do_embed(texts);
    if (out.size() != texts.size()) {
        throw DimensionMismatch("embedding backend returned " + std::to_string(out.size()) +
                                " vectors for " + std::to_string(texts.size()) + " inputs");
    }
    for (const auto& v : out) {
        if (v.dim() != dim()) {
            throw DimensionMismatch("embedding of dim " + std::to_string(v.dim()) +
                                    ", expected " + std::to_string(dim()));
        }
    }
    return out;
}

EmbeddingVector EmbeddingBackend::embed_one(const std::string& text) {
    return std::move(embed(std::span<const std::string>(&text, 1)).front());
}

std::string CountingGenerator::do_generate(const GenRequest& request) {
    return inner_.generate(request);
}

std::vector<EmbeddingVector> CountingEmbedder::do_embed(std::span<const std::string> texts) {
    return inner_.embed(texts);
}

}  // namespace demosel
