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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace demosel {

inline constexpr std::string_view kFinish = "Finish";
inline constexpr std::string_view kSearch = "Search";
inline constexpr std::string_view kLookup = "Lookup";

/// A tool invocation rendered as `name[argument]`.
///
/// The name must be non-empty and bracket-free, the argument must not contain
/// ']'. Under those rules `Action::parse(a.render()) == a` for every action.
class Action {
public:
    /// Throws InvalidAction when the grammar constraints are violated.
    Action(std::string name, std::string argument);

    /// Parses the exact `name[argument]` form. Throws InvalidAction.
    static Action parse(std::string_view rendered);

    const std::string& name() const noexcept { return name_; }
    const std::string& argument() const noexcept { return argument_; }
    bool is_finish() const noexcept { return name_ == kFinish; }

    std::string render() const;

    bool operator==(const Action&) const = default;

private:
    std::string name_;
    std::string argument_;
};

struct Step {
    std::optional<std::string> thought;
    Action action;
    std::string observation;

    bool operator==(const Step&) const = default;
};

/// "Thought: ...\nAction: name[arg]\nObservation: ...\n" (thought line omitted when absent).
std::string render_step(const Step& step);

struct Trajectory {
    std::string id;
    std::string task;
    std::vector<Step> steps;
    bool success = false;
    double score = 1.0;

    bool operator==(const Trajectory&) const = default;
};

/// Content hash of the task text and rendered steps; used as the trajectory id.
std::string content_id(std::string_view task, std::span<const Step> steps);

/// Builds a trajectory whose id is its content hash.
Trajectory make_trajectory(std::string task, std::vector<Step> steps, bool success,
                           double score = 1.0);

/// "Question: <task>\n" followed by every rendered step.
std::string render_trajectory(const Trajectory& trajectory);

/// Checks the structural invariants. With `for_pool` set, also requires
/// non-empty steps, success and a final Finish action. Throws FormatError.
void validate_trajectory(const Trajectory& trajectory, bool for_pool);

/// Live agent context: demo block, task and the action/observation history.
class AgentContext {
public:
    AgentContext(std::string task, std::size_t max_demos);

    const std::vector<Trajectory>& demos() const noexcept { return demos_; }
    const std::string& task() const noexcept { return task_; }
    const std::vector<Step>& history() const noexcept { return history_; }
    std::size_t step_index() const noexcept { return history_.size(); }
    std::size_t max_demos() const noexcept { return max_demos_; }

    bool operator==(const AgentContext&) const = default;

private:
    friend AgentContext context_append(const AgentContext&, Step);
    friend AgentContext context_replace_demos(const AgentContext&, std::vector<Trajectory>);
    friend AgentContext context_from_parts(std::string, std::size_t, std::vector<Trajectory>,
                                           std::vector<Step>);

    std::vector<Trajectory> demos_;
    std::string task_;
    std::vector<Step> history_;
    std::size_t max_demos_;
};

[[nodiscard]] AgentContext context_append(const AgentContext& ctx, Step step);

/// Throws TooManyDemos when `demos` exceeds the context's demo limit.
[[nodiscard]] AgentContext context_replace_demos(const AgentContext& ctx,
                                                 std::vector<Trajectory> demos);

/// Reassembles a context, validating the demo limit.
[[nodiscard]] AgentContext context_from_parts(std::string task, std::size_t max_demos,
                                              std::vector<Trajectory> demos,
                                              std::vector<Step> history);

/// A fixed-dimension, finite embedding.
class EmbeddingVector {
public:
    EmbeddingVector() = default;
    /// Throws Error on empty input or non-finite values.
    explicit EmbeddingVector(std::vector<double> values);

    std::size_t dim() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    double norm() const noexcept;

    bool operator==(const EmbeddingVector&) const = default;

private:
    std::vector<double> values_;
};

/// Transferable-knowledge text extracted from a demo or a live context.
struct TkRecord {
    std::string source_id;
    std::string tk_text;
    EmbeddingVector embedding;
    std::string retriever_fingerprint;

    bool operator==(const TkRecord&) const = default;
};

using TkCache = std::map<std::string, TkRecord>;

/// Ordered pool of successful demonstrations with an optional TK cache.
class DemoPool {
public:
    DemoPool() = default;
    /// Throws FormatError on duplicate ids or unsuccessful entries.
    explicit DemoPool(std::vector<Trajectory> entries, TkCache tk_cache = {});

    const std::vector<Trajectory>& entries() const noexcept { return entries_; }
    const TkCache& tk_cache() const noexcept { return tk_cache_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    const Trajectory& operator[](std::size_t i) const { return entries_.at(i); }

    std::optional<std::size_t> index_of(std::string_view id) const;

    /// Cached record for entry `i`, if any.
    const TkRecord* cached(std::size_t i) const;

    /// True when every entry has a cached record with this fingerprint.
    bool cache_warm(std::string_view fingerprint) const;
    /// True when every entry has a cached record and all fingerprints agree.
    bool cache_warm() const;

    [[nodiscard]] DemoPool with_cache(TkCache cache) const;
    [[nodiscard]] DemoPool subset(std::span<const std::size_t> indices) const;

    bool operator==(const DemoPool&) const = default;

private:
    std::vector<Trajectory> entries_;
    TkCache tk_cache_;
};

}  // namespace demosel
