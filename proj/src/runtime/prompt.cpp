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

#include "demosel/runtime/prompt.hpp"

#include <cctype>

#include "demosel/errors.hpp"

namespace demosel {

PromptLayout default_prompt_layout() {
    PromptLayout layout;
    layout.header =
        "Solve a question answering task with interleaving Thought, Action, Observation steps. "
        "Thought can reason about the current situation, and Action can be three types:\n"
        "(1) Search[entity], which searches the exact entity in the wiki and returns the first "
        "paragraph if it exists. If not, it will return some similar entities to search.\n"
        "(2) Lookup[keyword], which returns the next sentence containing keyword in the last "
        "passage successfully found by Search.\n"
        "(3) Finish[answer], which returns the answer and finishes the task.\n\n";
    return layout;
}

namespace {

std::string render_tail(const std::string& task, std::span<const Step> history) {
    std::string out = "Question: " + task + "\n";
    for (const auto& s : history) {
        out += render_step(s);
    }
    return out;
}

}  // namespace

std::size_t demos_that_fit(const PromptLayout& layout, std::span<const Trajectory> demos,
                           const std::string& task, std::span<const Step> history) {
    std::size_t used = layout.header.size() + render_tail(task, history).size();
    std::size_t kept = 0;
    for (const auto& d : demos) {
        const std::size_t cost =
            layout.example_prefix.size() + render_trajectory(d).size() + layout.demo_separator.size();
        if (used + cost > layout.max_prompt_chars) {
            break;
        }
        used += cost;
        ++kept;
    }
    return kept;
}

std::string assemble_prompt(const PromptLayout& layout, std::span<const Trajectory> demos,
                            const std::string& task, std::span<const Step> history) {
    const std::size_t kept = demos_that_fit(layout, demos, task, history);
    std::string out = layout.header;
    for (std::size_t i = 0; i < kept; ++i) {
        out += layout.example_prefix;
        out += render_trajectory(demos[i]);
        out += layout.demo_separator;
    }
    out += render_tail(task, history);
    return out;
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
        s.remove_prefix(1);
    }
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
        s.remove_suffix(1);
    }
    return s;
}

std::optional<Action> parse_action_line(std::string_view line) {
    line = trim(line);
    constexpr std::string_view prefix = "Action:";
    if (!line.starts_with(prefix)) {
        return std::nullopt;
    }
    line = trim(line.substr(prefix.size()));
    std::size_t name_end = 0;
    while (name_end < line.size() && std::isalnum(static_cast<unsigned char>(line[name_end]))) {
        ++name_end;
    }
    if (name_end == 0 || name_end >= line.size() || line[name_end] != '[') {
        return std::nullopt;
    }
    const auto close = line.rfind(']');
    if (close == std::string_view::npos || close <= name_end) {
        return std::nullopt;
    }
    try {
        return Action(std::string(line.substr(0, name_end)),
                      std::string(line.substr(name_end + 1, close - name_end - 1)));
    } catch (const InvalidAction&) {
        return std::nullopt;
    }
}

}  // namespace

ParsedAction parse_action(std::string_view completion) {
    std::optional<std::string> thought;
    std::size_t pos = 0;
    while (pos <= completion.size()) {
        auto end = completion.find('\n', pos);
        if (end == std::string_view::npos) {
            end = completion.size();
        }
        const std::string_view line = completion.substr(pos, end - pos);
        if (auto action = parse_action_line(line)) {
            return ParsedAction{std::move(thought), std::move(*action)};
        }
        const auto t = trim(line);
        if (t.starts_with("Thought:")) {
            thought = std::string(trim(t.substr(8)));
        }
        pos = end + 1;
    }
    throw MalformedAction("no 'Action: NAME[ARG]' line in completion");
}

}  // namespace demosel
