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

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "demosel/core/model.hpp"

namespace demosel {

struct Task {
    std::string id;
    std::string question;
    std::string gold;
    std::vector<std::string> hops;
    // Shopping-style tasks: reward is the fraction of these matched at Finish.
    std::vector<std::string> attributes;
    // Synthetic suites only: strategy the task requires and a winning action sequence.
    std::string pattern;
    std::vector<Action> witness;

    bool operator==(const Task&) const = default;
};

struct EnvObservation {
    std::string text;
    bool done = false;
    double reward = 0.0;
};

/// Per-episode environment state. Not shared between episodes.
class EnvSession {
public:
    virtual ~EnvSession() = default;
    virtual EnvObservation step(const Action& action) = 0;
};

/// Immutable task source; safe to share across concurrent episodes.
class Environment {
public:
    virtual ~Environment() = default;
    virtual const std::vector<Task>& tasks() const = 0;
    virtual std::unique_ptr<EnvSession> start(const Task& task) const = 0;

    const Task* find_task(std::string_view id) const;
};

}  // namespace demosel
