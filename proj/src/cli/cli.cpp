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

#include <iostream>
#include <map>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"

#include "demosel/cli/commands.hpp"
#include "demosel/errors.hpp"

namespace demosel {

namespace {

struct Alias {
    const char* flag;
    const char* key;
    const char* help;
};

constexpr Alias kAliases[] = {
    {"--strategy", "selector.strategy", "alias of --selector.strategy"},
    {"--m", "selector.m", "alias of --selector.m"},
    {"--max-steps", "runtime.max_steps", "alias of --runtime.max_steps"},
    {"--seed", "runtime.seed", "alias of --runtime.seed"},
    {"--workers", "runtime.workers", "alias of --runtime.workers"},
    {"--pool", "paths.pool", "alias of --paths.pool"},
    {"--env", "env.kind", "alias of --env.kind"},
    {"--strategies", "eval.strategies", "alias of --eval.strategies"},
    {"--out", "paths.out_dir", "alias of --paths.out_dir"},
};

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Dynamic in-context demo selection for tool-using agents", "demosel"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    app.add_option("--config", config_path, "key = value configuration file")->check(CLI::ExistingFile);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "debug logging");

    std::map<std::string, std::string> flag_values;
    for (const auto& key : config_schema()) {
        const std::string name(key.key);
        app.add_option("--" + name, flag_values[name], std::string(key.help))
            ->default_str(std::string(key.default_value));
    }
    std::map<std::string, std::string> alias_values;
    for (const auto& a : kAliases) {
        app.add_option(a.flag, alias_values[a.key], a.help);
    }
    std::string suite_path;
    app.add_option("--suite", suite_path, "world document to evaluate (sets env.kind = world)");

    auto* make_suite = app.add_subcommand("make-suite", "write a synthetic world, raw runs and labels");
    auto* build_pool = app.add_subcommand("build-pool", "filter raw runs and warm the TK cache");
    std::string runs_path;
    build_pool->add_option("--runs", runs_path, "raw run log (JSONL)")->required();
    auto* run = app.add_subcommand("run", "run one episode and write its trace");
    std::string task_id;
    run->add_option("--task", task_id, "task id")->required();
    auto* eval = app.add_subcommand("eval", "evaluate strategies on a task suite");
    auto* ablate = app.add_subcommand("ablate", "strategies, relevance buckets, demo-count sweep, low-quality pools");
    auto* score = app.add_subcommand("score", "print the selection for a saved agent context");
    std::string context_path;
    score->add_option("--context", context_path, "agent context (JSON)")->required();
    for (auto* sub : {make_suite, build_pool, run, eval, ablate, score}) {
        sub->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);

    try {
        ConfigSources sources;
        if (!config_path.empty()) {
            sources.file = config_path;
        }
        for (const auto& [key, value] : flag_values) {
            if (app.count("--" + key) > 0) {
                sources.overrides[key] = value;
            }
        }
        for (const auto& a : kAliases) {
            if (app.count(a.flag) > 0) {
                sources.overrides[a.key] = alias_values[a.key];
            }
        }
        if (!suite_path.empty()) {
            sources.overrides["env.kind"] = "world";
            sources.overrides["env.world_path"] = suite_path;
        }
        const RunConfig cfg = resolve_config(merge_config(sources));
        const CommandIo io{out, err};
        if (make_suite->parsed()) {
            return cmd_make_suite(cfg, io);
        }
        if (build_pool->parsed()) {
            return cmd_build_pool(cfg, runs_path, io);
        }
        if (run->parsed()) {
            return cmd_run(cfg, task_id, io);
        }
        if (eval->parsed()) {
            return cmd_eval(cfg, io);
        }
        if (ablate->parsed()) {
            return cmd_ablate(cfg, io);
        }
        return cmd_score(cfg, context_path, io);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
}

}  // namespace demosel
