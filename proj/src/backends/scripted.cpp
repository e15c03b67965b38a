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

#include "demosel/backends/scripted.hpp"

#include "demosel/core/hash.hpp"
#include "demosel/core/persistence.hpp"
#include "demosel/errors.hpp"

namespace demosel {

ScriptedGenerator::ScriptedGenerator(std::vector<ScriptedRule> rules, std::string model)
    : rules_(std::move(rules)), model_(std::move(model)) {
    compiled_.reserve(rules_.size());
    for (const auto& r : rules_) {
        if (r.kind == ScriptedRule::Kind::regex) {
            try {
                compiled_.emplace_back(r.match, std::regex::ECMAScript);
            } catch (const std::regex_error& e) {
                throw ConfigError("invalid rule regex '" + r.match + "': " + e.what());
            }
        } else {
            compiled_.emplace_back();
        }
    }
}

std::string ScriptedGenerator::do_generate(const GenRequest& request) {
    for (std::size_t i = 0; i < rules_.size(); ++i) {
        const auto& r = rules_[i];
        const bool hit = r.kind == ScriptedRule::Kind::regex
                             ? std::regex_search(request.prompt, compiled_[i])
                             : request.prompt.find(r.match) != std::string::npos;
        if (hit) {
            return apply_stops(r.completion, request.stop);
        }
    }
    throw EmptyCompletion("no scripted rule matches the prompt");
}

std::vector<ScriptedRule> load_scripted_rules(const std::filesystem::path& path) {
    Json doc;
    try {
        doc = Json::parse(read_file(path));
    } catch (const Json::parse_error& e) {
        throw FormatError(0, path.string() + ": invalid JSON: " + e.what());
    }
    if (!doc.is_array()) {
        throw FormatError(0, path.string() + ": rules file must be a JSON array");
    }
    std::vector<ScriptedRule> rules;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto& j = doc[i];
        if (!j.is_object() || !j.contains("match") || !j.contains("completion")) {
            throw FormatError(0, path.string() + ": rule " + std::to_string(i) +
                                     " needs 'match' and 'completion'");
        }
        ScriptedRule r;
        r.match = j.at("match").get<std::string>();
        r.completion = j.at("completion").get<std::string>();
        const auto kind = j.value("kind", std::string("substring"));
        if (kind == "regex") {
            r.kind = ScriptedRule::Kind::regex;
        } else if (kind != "substring") {
            throw FormatError(0, path.string() + ": unknown rule kind '" + kind + "'");
        }
        rules.push_back(std::move(r));
    }
    return rules;
}

std::string rules_fingerprint(const std::vector<ScriptedRule>& rules) {
    std::uint64_t h = fnv1a64("rules");
    for (const auto& r : rules) {
        h = fnv1a64(r.match, h);
        h = fnv1a64(r.kind == ScriptedRule::Kind::regex ? "\x01" : "\x02", h);
        h = fnv1a64(r.completion, h);
    }
    return to_hex(h);
}

}  // namespace demosel
