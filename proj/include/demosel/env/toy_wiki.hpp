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

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "demosel/env/environment.hpp"

namespace demosel {

/// Lowercase, strip ASCII punctuation, collapse whitespace, drop one leading
/// article (a/an/the).
std::string normalize_answer(std::string_view text);

/// 1 iff the normalized strings are equal.
int exact_match(std::string_view pred, std::string_view gold);

inline constexpr std::size_t kParagraphSentences = 3;
inline constexpr std::size_t kMaxSimilar = 5;

/// A miniature wiki: articles are ordered sentence lists, looked up by
/// case-insensitive name or alias. Immutable after construction.
class ToyWikiWorld final : public Environment {
public:
    using Articles = std::map<std::string, std::vector<std::string>>;
    using Aliases = std::map<std::string, std::string>;

    /// Throws FormatError when a gold answer is absent from every article or a
    /// hop entity does not exist.
    ToyWikiWorld(Articles articles, Aliases aliases, std::vector<Task> tasks);

    const Articles& articles() const noexcept { return articles_; }
    const Aliases& aliases() const noexcept { return aliases_; }
    const std::vector<Task>& tasks() const override { return tasks_; }
    std::unique_ptr<EnvSession> start(const Task& task) const override;

    /// Entity for a name or alias, case-insensitively.
    std::optional<std::string> resolve(std::string_view name) const;

    /// Up to kMaxSimilar entity names sharing at least one word with `query`,
    /// most shared words first, then by name.
    std::vector<std::string> similar(std::string_view query) const;

    nlohmann::json to_json() const;
    static ToyWikiWorld from_json(const nlohmann::json& doc);

    void save(const std::filesystem::path& path) const;
    static ToyWikiWorld load(const std::filesystem::path& path);

private:
    Articles articles_;
    Aliases aliases_;
    std::vector<Task> tasks_;
    std::map<std::string, std::string> alias_index_;  // lowercase name -> entity
};

/// Per-episode state of a wiki interaction.
struct WikiState {
    std::optional<std::string> article;  // last successfully searched entity
    std::string lookup_keyword;
    std::vector<std::size_t> lookup_hits;
    std::size_t lookup_cursor = 0;
    bool done = false;

    bool operator==(const WikiState&) const = default;
};

struct WikiStepResult {
    EnvObservation observation;
    WikiState state;
};

/// Pure transition: Search, Lookup and Finish; any other action name yields
/// "Invalid action." and leaves the state unchanged.
WikiStepResult env_step(const ToyWikiWorld& world, const Task& task, const WikiState& state,
                        const Action& action);

/// Finish reward: fraction of task attributes whose words all occur in the chosen
/// entity's article when the task lists attributes, else exact match against gold.
double finish_reward(const ToyWikiWorld& world, const Task& task, std::string_view answer);

}  // namespace demosel
