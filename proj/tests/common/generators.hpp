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
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "demosel/core/model.hpp"

namespace demosel::testing {

using Rng = std::mt19937_64;

inline std::size_t uniform_index(Rng& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

/// Random text over a mixed alphabet that includes '[', JSON escapes, quotes,
/// newlines and multi-byte UTF-8. `allow_close_bracket` admits ']'.
inline std::string random_text(Rng& rng, std::size_t max_len, bool allow_close_bracket = true) {
    static const std::vector<std::string> kAtoms = {
        "a", "b", "z", "Q", "0", "7", " ", " ", "[", "]", "\"", "\\", "\n", "\t", "/",
        ":", ",", "{", "}", "é", "日", "—", "Search", "Finish", "Observation:"};
    std::string out;
    const std::size_t n = uniform_index(rng, 0, max_len);
    while (out.size() < n) {
        const auto& atom = kAtoms[uniform_index(rng, 0, kAtoms.size() - 1)];
        if (!allow_close_bracket && atom == "]") {
            continue;
        }
        out += atom;
    }
    return out;
}

inline std::string random_action_name(Rng& rng) {
    static const std::vector<std::string> kNames = {"Search", "Lookup", "Finish", "think",
                                                    "go to", "click", "Buy Now", "é-act"};
    if (uniform_index(rng, 0, 3) == 0) {
        std::string name;
        const std::size_t n = uniform_index(rng, 1, 12);
        while (name.size() < n) {
            const char c = static_cast<char>(uniform_index(rng, 32, 126));
            if (c != '[' && c != ']') {
                name.push_back(c);
            }
        }
        return name;
    }
    return kNames[uniform_index(rng, 0, kNames.size() - 1)];
}

inline Action random_action(Rng& rng) {
    return Action(random_action_name(rng), random_text(rng, 40, false));
}

inline Step random_step(Rng& rng, bool terminal) {
    Step s{std::nullopt, random_action(rng), random_text(rng, 60)};
    if (uniform_index(rng, 0, 1) == 1) {
        s.thought = random_text(rng, 50);
    }
    if (terminal) {
        s.action = Action(std::string(kFinish), random_text(rng, 20, false));
    } else if (s.observation.empty()) {
        s.observation = "ok";
    }
    return s;
}

/// A structurally valid trajectory; successful ones end with Finish.
inline Trajectory random_trajectory(Rng& rng) {
    const bool success = uniform_index(rng, 0, 1) == 1;
    const std::size_t n = uniform_index(rng, success ? 1 : 0, 6);
    std::vector<Step> steps;
    for (std::size_t i = 0; i < n; ++i) {
        steps.push_back(random_step(rng, success && i + 1 == n));
    }
    const double score = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    return make_trajectory(random_text(rng, 80), std::move(steps), success,
                           success ? 1.0 : score);
}

inline EmbeddingVector random_embedding(Rng& rng, std::size_t dim) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> v(dim);
    for (auto& x : v) {
        x = n(rng);
    }
    return EmbeddingVector(std::move(v));
}

/// A successful demo "Question: <task>" with one Search and a Finish.
inline Trajectory simple_demo(const std::string& task, const std::string& entity,
                              const std::string& answer) {
    return make_trajectory(task,
                           {Step{"I should search.", Action("Search", entity), entity + " is a thing."},
                            Step{std::nullopt, Action("Finish", answer), ""}},
                           true);
}

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("demosel-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace demosel::testing
