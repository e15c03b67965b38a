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
#include <initializer_list>
#include <regex>
#include <string>
#include <vector>

#include "demosel/backends/backend.hpp"

namespace demosel {

struct ScriptedRule {
    enum class Kind { substring, regex };

    std::string match;
    std::string completion;
    Kind kind = Kind::substring;
};

/// Rule-table generator: the first rule whose pattern occurs in the prompt
/// supplies the completion. No match raises EmptyCompletion.
class ScriptedGenerator final : public GenerationBackend {
public:
    explicit ScriptedGenerator(std::vector<ScriptedRule> rules, std::string model = "scripted");
    explicit ScriptedGenerator(std::initializer_list<ScriptedRule> rules, std::string model = "scripted")
        : ScriptedGenerator(std::vector<ScriptedRule>(rules), std::move(model)) {}

    std::string model_name() const override { return model_; }
    const std::vector<ScriptedRule>& rules() const noexcept { return rules_; }

protected:
    std::string do_generate(const GenRequest& request) override;

private:
    std::vector<ScriptedRule> rules_;
    std::vector<std::regex> compiled_;
    std::string model_;
};

/// Reads `[{"match": str, "completion": str, "kind"?: "substring"|"regex"}]`.
/// Throws IoError or FormatError.
std::vector<ScriptedRule> load_scripted_rules(const std::filesystem::path& path);

/// Identity of a rule table, folded into retriever fingerprints.
std::string rules_fingerprint(const std::vector<ScriptedRule>& rules);

}  // namespace demosel
