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

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "demosel/backends/backend.hpp"
#include "demosel/backends/scripted.hpp"
#include "demosel/core/model.hpp"
#include "demosel/env/toy_wiki.hpp"

namespace demosel {

/// Strategy a synthetic task requires.
///   direct           the question names the entity exactly
///   search_recovery  the mention is incomplete; only the Similar list leads on
///   two_hop          the answer sits deep in a second article reached via a bridge
enum class Pattern { direct, search_recovery, two_hop };

std::string_view to_string(Pattern p) noexcept;
Pattern pattern_from_string(std::string_view name);

struct PatternWeight {
    Pattern pattern;
    double weight;

    bool operator==(const PatternWeight&) const = default;
};
using PatternMix = std::vector<PatternWeight>;

PatternMix default_pattern_mix();  // search_recovery:0.5, two_hop:0.5

/// "search_recovery:0.5,two_hop:0.5". Throws ConfigError on bad syntax.
PatternMix parse_pattern_mix(std::string_view text);
std::string format_pattern_mix(const PatternMix& mix);

/// Throws ConfigError unless weights are non-negative, patterns are distinct
/// and the weights sum to 1.
void validate_pattern_mix(const PatternMix& mix);

enum class SuiteVariant { qa, shop };

std::string_view to_string(SuiteVariant v) noexcept;
SuiteVariant variant_from_string(std::string_view name);

struct SuiteOptions {
    std::size_t n_tasks = 30;
    std::size_t n_pool = 20;
    PatternMix mix = default_pattern_mix();
    std::uint64_t seed = 7;
    SuiteVariant variant = SuiteVariant::qa;
};

struct SyntheticSuite {
    std::shared_ptr<const ToyWikiWorld> world;  // carries the evaluation tasks
    DemoPool pool;                              // no TK cache yet
    std::vector<Task> pool_tasks;               // tasks the pool demos solved
    // eval task id -> ids of pool demos exhibiting the task's pattern
    std::map<std::string, std::vector<std::string>> labels;

    const std::vector<Task>& tasks() const { return world->tasks(); }
};

/// Deterministic in the options. Pool demos are successful replays of
/// separate pool tasks; about 60% of the pool are direct-pattern distractors
/// unless direct is itself in the mix.
SyntheticSuite make_synthetic_suite(const SuiteOptions& options);
SyntheticSuite make_synthetic_suite(std::size_t n_tasks, std::size_t n_pool,
                                    const PatternMix& mix, std::uint64_t seed);

/// Scripted retriever rules mapping demo and context prompts of a synthetic
/// suite to pattern-level TK text. Relies on the default TK templates.
std::vector<ScriptedRule> synthetic_retriever_rules();

/// Same demo rules, but every context prompt maps to `context_tk`.
std::vector<ScriptedRule> constant_context_rules(std::string context_tk);

/// Pattern-following agent: reads the demo block of the prompt and knows how
/// to recover from a failed search only when a demo shows "Could not find",
/// and how to chain through a bridge article only when a demo uses Lookup.
/// A pure function of the prompt.
class SyntheticSolver final : public GenerationBackend {
public:
    std::string model_name() const override { return "synthetic-solver"; }

    static std::string respond(std::string_view prompt);

private:
    std::string do_generate(const GenRequest& request) override;
};

}  // namespace demosel
