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

#include "demosel/core/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "demosel/core/hash.hpp"
#include "demosel/errors.hpp"

namespace demosel {

std::string to_hex(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

Action::Action(std::string name, std::string argument)
    : name_(std::move(name)), argument_(std::move(argument)) {
    if (name_.empty()) {
        throw InvalidAction("action name is empty");
    }
    if (name_.find_first_of("[]") != std::string::npos) {
        throw InvalidAction("action name contains a bracket: " + name_);
    }
    if (argument_.find(']') != std::string::npos) {
        throw InvalidAction("action argument contains ']': " + argument_);
    }
}

Action Action::parse(std::string_view rendered) {
    const auto open = rendered.find('[');
    if (open == std::string_view::npos || rendered.empty() || rendered.back() != ']') {
        throw InvalidAction("not of the form name[argument]: " + std::string(rendered));
    }
    return Action(std::string(rendered.substr(0, open)),
                  std::string(rendered.substr(open + 1, rendered.size() - open - 2)));
}

std::string Action::render() const { return name_ + "[" + argument_ + "]"; }

std::string render_step(const Step& step) {
    std::string out;
    if (step.thought) {
        out += "Thought: " + *step.thought + "\n";
    }
    out += "Action: " + step.action.render() + "\n";
    out += "Observation: " + step.observation + "\n";
    return out;
}

std::string content_id(std::string_view task, std::span<const Step> steps) {
    std::string text(task);
    text += '\n';
    for (const auto& step : steps) {
        text += render_step(step);
    }
    return hash_hex(text);
}

Trajectory make_trajectory(std::string task, std::vector<Step> steps, bool success,
                           double score) {
    Trajectory t;
    t.id = content_id(task, steps);
    t.task = std::move(task);
    t.steps = std::move(steps);
    t.success = success;
    t.score = score;
    return t;
}

std::string render_trajectory(const Trajectory& trajectory) {
    std::string out = "Question: " + trajectory.task + "\n";
    for (const auto& step : trajectory.steps) {
        out += render_step(step);
    }
    return out;
}

void validate_trajectory(const Trajectory& t, bool for_pool) {
    if (t.id.empty()) {
        throw FormatError(0, "trajectory id is empty");
    }
    if (!(t.score >= 0.0 && t.score <= 1.0)) {
        throw FormatError(0, "score outside [0, 1] in trajectory " + t.id);
    }
    for (std::size_t i = 0; i + 1 < t.steps.size(); ++i) {
        if (t.steps[i].observation.empty()) {
            throw FormatError(0, "empty observation on non-terminal step " + std::to_string(i) +
                                     " of trajectory " + t.id);
        }
    }
    if (!t.steps.empty() && t.steps.back().observation.empty() &&
        !t.steps.back().action.is_finish()) {
        throw FormatError(0, "empty observation on a non-Finish terminal step of " + t.id);
    }
    if (t.success && !t.steps.empty() && !t.steps.back().action.is_finish()) {
        throw FormatError(0, "successful trajectory " + t.id + " does not end with Finish");
    }
    if (for_pool) {
        if (t.steps.empty()) {
            throw FormatError(0, "pool trajectory " + t.id + " has no steps");
        }
        if (!t.success) {
            throw FormatError(0, "pool trajectory " + t.id + " is not successful");
        }
    }
}

AgentContext::AgentContext(std::string task, std::size_t max_demos)
    : task_(std::move(task)), max_demos_(max_demos) {}

AgentContext context_append(const AgentContext& ctx, Step step) {
    AgentContext out = ctx;
    out.history_.push_back(std::move(step));
    return out;
}

AgentContext context_replace_demos(const AgentContext& ctx, std::vector<Trajectory> demos) {
    if (demos.size() > ctx.max_demos_) {
        throw TooManyDemos("demo block of " + std::to_string(demos.size()) +
                           " exceeds the limit of " + std::to_string(ctx.max_demos_));
    }
    AgentContext out = ctx;
    out.demos_ = std::move(demos);
    return out;
}

AgentContext context_from_parts(std::string task, std::size_t max_demos,
                                std::vector<Trajectory> demos, std::vector<Step> history) {
    AgentContext ctx(std::move(task), max_demos);
    ctx = context_replace_demos(ctx, std::move(demos));
    ctx.history_ = std::move(history);
    return ctx;
}

EmbeddingVector::EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) {
        throw DimensionMismatch("embedding vector has dimension 0");
    }
    if (!std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); })) {
        throw Error("embedding vector contains a non-finite value");
    }
}

double EmbeddingVector::norm() const noexcept {
    double sq = 0.0;
    for (double v : values_) {
        sq += v * v;
    }
    return std::sqrt(sq);
}

DemoPool::DemoPool(std::vector<Trajectory> entries, TkCache tk_cache)
    : entries_(std::move(entries)), tk_cache_(std::move(tk_cache)) {
    std::set<std::string_view> seen;
    for (const auto& e : entries_) {
        if (!seen.insert(e.id).second) {
            throw FormatError(0, "duplicate trajectory id in pool: " + e.id);
        }
        if (!e.success) {
            throw FormatError(0, "unsuccessful trajectory in pool: " + e.id);
        }
    }
}

std::optional<std::size_t> DemoPool::index_of(std::string_view id) const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].id == id) {
            return i;
        }
    }
    return std::nullopt;
}

const TkRecord* DemoPool::cached(std::size_t i) const {
    auto it = tk_cache_.find(entries_.at(i).id);
    return it == tk_cache_.end() ? nullptr : &it->second;
}

bool DemoPool::cache_warm(std::string_view fingerprint) const {
    return std::all_of(entries_.begin(), entries_.end(), [&](const Trajectory& e) {
        auto it = tk_cache_.find(e.id);
        return it != tk_cache_.end() && it->second.retriever_fingerprint == fingerprint;
    });
}

bool DemoPool::cache_warm() const {
    if (entries_.empty()) {
        return true;
    }
    const TkRecord* first = cached(0);
    return first != nullptr && cache_warm(first->retriever_fingerprint);
}

DemoPool DemoPool::with_cache(TkCache cache) const {
    DemoPool out = *this;
    out.tk_cache_ = std::move(cache);
    return out;
}

DemoPool DemoPool::subset(std::span<const std::size_t> indices) const {
    DemoPool out;
    for (std::size_t i : indices) {
        const auto& e = entries_.at(i);
        out.entries_.push_back(e);
        if (auto it = tk_cache_.find(e.id); it != tk_cache_.end()) {
            out.tk_cache_.emplace(it->first, it->second);
        }
    }
    return out;
}

}  // namespace demosel
