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

#include <map>
#include <string>
#include <vector>

#include "demosel/env/environment.hpp"

namespace demosel {

/// Test environment with canned observations keyed by rendered action.
/// Finish[a] ends the episode with exact-match reward against the task's gold;
/// unscripted actions observe `fallback`.
class ScriptedEnvironment final : public Environment {
public:
    ScriptedEnvironment(std::vector<Task> tasks, std::map<std::string, std::string> observations,
                        std::string fallback = "Nothing happens.");

    const std::vector<Task>& tasks() const override { return tasks_; }
    std::unique_ptr<EnvSession> start(const Task& task) const override;

private:
    std::vector<Task> tasks_;
    std::map<std::string, std::string> observations_;
    std::string fallback_;
};

}  // namespace demosel
