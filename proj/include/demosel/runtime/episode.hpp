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

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "demosel/backends/backend.hpp"
#include "demosel/env/environment.hpp"
#include "demosel/runtime/prompt.hpp"
#include "demosel/selector/selector.hpp"

namespace demosel {

struct RuntimeConfig {
    std::size_t max_steps = 8;
    std::size_t max_demos = 2;
    PromptLayout layout = default_prompt_layout();
    int max_tokens = 256;
    double temperature = 0.0;
    std::vector<std::string> stop = {"Observation:"};
    std::size_t max_parse_failures = 3;
};

enum class Termination { finished, step_limit, parse_failures, backend_error };

std::string_view to_string(Termination t) noexcept;

struct Outcome {
    std::optional<std::string> answer;
    bool success = false;
    double score = 0.0;

    bool operator==(const Outcome&) const = default;
};

/// One agent step. `selection` is set only when a selection event happened
/// before this step; otherwise the previous demo block stayed active.
struct TraceEntry {
    std::optional<SelectionResult> selection;
    Step step;

    bool operator==(const TraceEntry&) const = default;
};

struct EpisodeTelemetry {
    CallTelemetry agent;      // agent turns
    CallTelemetry selection;  // retriever generations and embeddings

    bool operator==(const EpisodeTelemetry&) const = default;
};

struct EpisodeResult {
    std::string task_id;
    Outcome outcome;
    std::vector<TraceEntry> trace;
    EpisodeTelemetry telemetry;
    Termination termination = Termination::step_limit;
    std::string error;  // backend error message when termination == backend_error

    std::size_t selection_events() const;
    /// Mean over selection events of the mean relevance of the selected demos.
    std::optional<double> mean_relevance() const;

    bool operator==(const EpisodeResult&) const = default;
};

/// ReAct loop: before each generation ask the selector for demos, assemble the
/// prompt, generate, parse, step the environment and append to the context.
/// Backend unreachable/refusal ends the episode with backend_error; other
/// failures become observations.
EpisodeResult run_episode(const Task& task, EnvSession& env, GenerationBackend& agent,
                          EpisodeSelector& selector, const RuntimeConfig& cfg);

/// Line-delimited trace: one record per step, then a footer with the outcome.
std::string episode_trace_jsonl(const EpisodeResult& result);

}  // namespace demosel
