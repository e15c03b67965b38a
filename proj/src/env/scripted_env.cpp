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

#include "demosel/env/scripted_env.hpp"

#include "demosel/env/toy_wiki.hpp"

namespace demosel {

namespace {

class ScriptedSession final : public EnvSession {
public:
    ScriptedSession(const std::map<std::string, std::string>& obs, const std::string& fallback,
                    Task task)
        : observations_(obs), fallback_(fallback), task_(std::move(task)) {}

    EnvObservation step(const Action& action) override {
        if (action.is_finish()) {
            const double reward = exact_match(action.argument(), task_.gold);
            return {"Episode finished, reward = " + std::to_string(static_cast<int>(reward)), true,
                    reward};
        }
        auto it = observations_.find(action.render());
        return {it != observations_.end() ? it->second : fallback_, false, 0.0};
    }

private:
    const std::map<std::string, std::string>& observations_;
    const std::string& fallback_;
    Task task_;
};

}  // namespace

ScriptedEnvironment::ScriptedEnvironment(std::vector<Task> tasks,
                                         std::map<std::string, std::string> observations,
                                         std::string fallback)
    : tasks_(std::move(tasks)), observations_(std::move(observations)), fallback_(std::move(fallback)) {}

std::unique_ptr<EnvSession> ScriptedEnvironment::start(const Task& task) const {
    return std::make_unique<ScriptedSession>(observations_, fallback_, task);
}

}  // namespace demosel
