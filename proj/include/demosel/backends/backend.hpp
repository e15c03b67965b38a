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

#include <atomic>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "demosel/core/model.hpp"

namespace demosel {

struct GenRequest {
    std::string prompt;
    int max_tokens = 256;
    double temperature = 0.0;
    std::vector<std::string> stop;

    /// Throws Error when max_tokens <= 0, temperature < 0 or more than 4 stops.
    void validate() const;
};

struct CallTelemetry {
    std::uint64_t gen_calls = 0;
    std::uint64_t embed_calls = 0;
    std::uint64_t tokens_in = 0;
    std::uint64_t tokens_out = 0;

    CallTelemetry& operator+=(const CallTelemetry& other);
    bool operator==(const CallTelemetry&) const = default;
};

/// Lock-free counters shared by concurrent callers.
class TelemetryCounters {
public:
    void record_generation(std::uint64_t tokens_in, std::uint64_t tokens_out);
    void record_embedding(std::uint64_t tokens_in);
    CallTelemetry snapshot() const;

private:
    std::atomic<std::uint64_t> gen_calls_{0};
    std::atomic<std::uint64_t> embed_calls_{0};
    std::atomic<std::uint64_t> tokens_in_{0};
    std::atomic<std::uint64_t> tokens_out_{0};
};

/// Whitespace-delimited word count; the token estimate used by telemetry and caps.
std::uint64_t approx_tokens(std::string_view text);

/// Cuts `text` at the earliest occurrence of any stop sequence.
std::string apply_stops(std::string text, std::span<const std::string> stops);

/// Text generation. Every call to generate() counts as exactly one gen call,
/// whatever its outcome. Implementations must be safe for concurrent use.
class GenerationBackend {
public:
    virtual ~GenerationBackend() = default;

    /// Throws BackendUnreachable, BackendRefusal or EmptyCompletion.
    std::string generate(const GenRequest& request);

    virtual std::string model_name() const = 0;
    CallTelemetry telemetry() const { return counters_.snapshot(); }

protected:
    virtual std::string do_generate(const GenRequest& request) = 0;

private:
    TelemetryCounters counters_;
};

/// Text embedding. Every call to embed() counts as one embed call.
class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;

    /// One vector per input, all of dim(). Throws Error on empty input,
    /// BackendUnreachable or DimensionMismatch.
    std::vector<EmbeddingVector> embed(std::span<const std::string> texts);
    EmbeddingVector embed_one(const std::string& text);

    virtual std::size_t dim() const = 0;
    virtual std::string model_name() const = 0;
    CallTelemetry telemetry() const { return counters_.snapshot(); }

protected:
    virtual std::vector<EmbeddingVector> do_embed(std::span<const std::string> texts) = 0;

private:
    TelemetryCounters counters_;
};

/// Forwards to a shared backend while keeping private counters, so one
/// episode can account for its own calls.
class CountingGenerator final : public GenerationBackend {
public:
    explicit CountingGenerator(GenerationBackend& inner) : inner_(inner) {}
    std::string model_name() const override { return inner_.model_name(); }

protected:
    std::string do_generate(const GenRequest& request) override;

private:
    GenerationBackend& inner_;
};

class CountingEmbedder final : public EmbeddingBackend {
public:
    explicit CountingEmbedder(EmbeddingBackend& inner) : inner_(inner) {}
    std::size_t dim() const override { return inner_.dim(); }
    std::string model_name() const override { return inner_.model_name(); }

protected:
    std::vector<EmbeddingVector> do_embed(std::span<const std::string> texts) override;

private:
    EmbeddingBackend& inner_;
};

}  // namespace demosel
