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
#include <optional>
#include <span>
#include <string>

#include "demosel/core/model.hpp"

namespace demosel {

struct PromptLayout {
    std::string header;
    std::string demo_separator = "\n";
    std::string example_prefix;
    std::size_t max_prompt_chars = 60000;
};

/// ReAct-style instruction for the wiki question-answering tools.
PromptLayout default_prompt_layout();

/// header, then each demo (in the given rank order), then "Question: <task>\n"
/// and the history in chronological order. When the result would exceed
/// max_prompt_chars, the lowest-ranked demos are dropped first; task and
/// history are never truncated.
std::string assemble_prompt(const PromptLayout& layout, std::span<const Trajectory> demos,
                            const std::string& task, std::span<const Step> history);

/// Number of demos assemble_prompt() keeps under the size limit.
std::size_t demos_that_fit(const PromptLayout& layout, std::span<const Trajectory> demos,
                           const std::string& task, std::span<const Step> history);

struct ParsedAction {
    std::optional<std::string> thought;
    Action action;
};

inline constexpr std::string_view kInvalidActionObservation =
    "Invalid action. Valid actions are Search[entity], Lookup[string], Finish[answer].";

/// First line of the form "Action: NAME[ARG]" (NAME alphanumeric, ARG up to
/// the last ']' on the line), plus the nearest preceding "Thought:" line.
/// Throws MalformedAction when no line parses.
ParsedAction parse_action(std::string_view completion);

}  // namespace demosel
