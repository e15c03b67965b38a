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
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "demosel/backends/backend.hpp"
#include "demosel/cli/config.hpp"
#include "demosel/env/environment.hpp"
#include "demosel/retriever/tk_retriever.hpp"

namespace demosel {

enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,     // episode ran but did not succeed
    kExitUsage = 2,       // configuration, format, unknown task, cold cache, overlap
    kExitBackend = 3,     // backend unreachable or refusing
    kExitInternal = 4,
};

/// Exit code for an exception escaping a command.
int exit_code_for(const std::exception& e) noexcept;

struct Backends {
    std::unique_ptr<GenerationBackend> agent;
    std::unique_ptr<GenerationBackend> retriever_gen;
    std::unique_ptr<EmbeddingBackend> embedder;
    std::unique_ptr<TkRetriever> retriever;
};

/// Builds agent, retriever and embedder as configured. No network traffic.
Backends make_backends(const RunConfig& cfg);

struct LoadedEnv {
    std::shared_ptr<const Environment> env;
    std::vector<Task> tasks;
    std::optional<DemoPool> suite_pool;  // synthetic suites carry their own pool
    std::string metric;                  // "em", or "sr" for attribute-scored tasks
};

LoadedEnv load_env(const RunConfig& cfg);

struct CommandIo {
    std::ostream& out;
    std::ostream& err;
};

int cmd_make_suite(const RunConfig& cfg, CommandIo io);
int cmd_build_pool(const RunConfig& cfg, const std::filesystem::path& runs_path, CommandIo io);
int cmd_run(const RunConfig& cfg, const std::string& task_id, CommandIo io);
int cmd_eval(const RunConfig& cfg, CommandIo io);
int cmd_ablate(const RunConfig& cfg, CommandIo io);
int cmd_score(const RunConfig& cfg, const std::filesystem::path& context_path, CommandIo io);

/// Parses the command line (flags > DEMOSEL_* environment > --config file >
/// defaults), dispatches, and maps errors to exit codes.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace demosel
