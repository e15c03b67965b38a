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

#include <chrono>
#include <optional>
#include <string>

#include "demosel/backends/backend.hpp"

namespace demosel {

struct HttpEndpoint {
    std::string url;      // full URL, e.g. http://localhost:8000/v1/chat/completions
    std::string model;
    std::string api_key;  // empty for unauthenticated servers
    std::chrono::seconds timeout{60};
};

/// Transport errors and 429/5xx are retried; other 4xx responses are terminal.
struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{500};
};

/// Reads the API key from the named environment variable; empty name -> "".
std::string api_key_from_env(const std::string& variable);

/// Chat-completions client: posts {"model", "messages", "temperature",
/// "max_tokens", "stop"} and reads choices[0].message.content.
class HttpGenerator final : public GenerationBackend {
public:
    HttpGenerator(HttpEndpoint endpoint, RetryPolicy retry = {});
    std::string model_name() const override { return endpoint_.model; }

protected:
    std::string do_generate(const GenRequest& request) override;

private:
    HttpEndpoint endpoint_;
    RetryPolicy retry_;
};

/// Embeddings client: posts {"model", "input"} and reads data[i].embedding.
class HttpEmbedder final : public EmbeddingBackend {
public:
    HttpEmbedder(HttpEndpoint endpoint, std::size_t dim, RetryPolicy retry = {});
    std::size_t dim() const override { return dim_; }
    std::string model_name() const override { return endpoint_.model; }

protected:
    std::vector<EmbeddingVector> do_embed(std::span<const std::string> texts) override;

private:
    HttpEndpoint endpoint_;
    std::size_t dim_;
    RetryPolicy retry_;
};

}  // namespace demosel
