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

#include "demosel/cli/commands.hpp"

#include <algorithm>
#include <iostream>
#include <set>

#include <spdlog/spdlog.h>

#include "demosel/backends/hashing.hpp"
#include "demosel/backends/http.hpp"
#include "demosel/backends/scripted.hpp"
#include "demosel/core/persistence.hpp"
#include "demosel/env/synthetic.hpp"
#include "demosel/env/toy_wiki.hpp"
#include "demosel/errors.hpp"
#include "demosel/eval/harness.hpp"
#include "demosel/selector/scoring.hpp"

namespace demosel {

int exit_code_for(const std::exception& e) noexcept {
    if (dynamic_cast<const BackendUnreachable*>(&e) != nullptr ||
        dynamic_cast<const BackendRefusal*>(&e) != nullptr ||
        dynamic_cast<const TkExtractionFailed*>(&e) != nullptr) {
        return kExitBackend;
    }
    if (dynamic_cast<const Error*>(&e) != nullptr) {
        return kExitUsage;
    }
    return kExitInternal;
}

namespace {

HttpEndpoint endpoint_of(const HttpSettings& s) {
    return HttpEndpoint{s.endpoint_url, s.model, api_key_from_env(s.api_key_env),
                        std::chrono::seconds(s.timeout_s)};
}

RetryPolicy retry_of(const HttpSettings& s) {
    return RetryPolicy{s.retries, std::chrono::milliseconds(s.backoff_ms)};
}

std::string resolve_kind(const std::string& kind, const std::string& backend,
                         const std::string& offline_default) {
    if (kind != "auto") {
        return kind;
    }
    return backend == "http" ? "http" : offline_default;
}

}  // namespace

Backends make_backends(const RunConfig& cfg) {
    Backends b;
    const std::string agent_kind =
        resolve_kind(cfg.agent_kind, cfg.backend_kind, cfg.gen.rules_path.empty() ? "solver" : "scripted");
    if (agent_kind == "http") {
        b.agent = std::make_unique<HttpGenerator>(endpoint_of(cfg.gen), retry_of(cfg.gen));
    } else if (agent_kind == "scripted") {
        if (cfg.gen.rules_path.empty()) {
            throw ConfigError("agent.kind = scripted needs gen.rules_path");
        }
        b.agent = std::make_unique<ScriptedGenerator>(load_scripted_rules(cfg.gen.rules_path));
    } else {
        b.agent = std::make_unique<SyntheticSolver>();
    }

    const std::string retriever_kind = resolve_kind(cfg.retriever_kind, cfg.backend_kind, "scripted");
    if (retriever_kind == "http") {
        b.retriever_gen = std::make_unique<HttpGenerator>(endpoint_of(cfg.retriever), retry_of(cfg.retriever));
    } else if (!cfg.retriever.rules_path.empty()) {
        auto rules = load_scripted_rules(cfg.retriever.rules_path);
        const std::string model = "scripted-" + rules_fingerprint(rules);
        b.retriever_gen = std::make_unique<ScriptedGenerator>(std::move(rules), model);
    } else {
        b.retriever_gen = std::make_unique<ScriptedGenerator>(synthetic_retriever_rules(), "scripted-synthetic");
    }

    const std::string embed_kind = resolve_kind(cfg.embed_kind, cfg.backend_kind, "hashing");
    if (embed_kind == "http") {
        b.embedder = std::make_unique<HttpEmbedder>(endpoint_of(cfg.embed), cfg.embed_dim, retry_of(cfg.embed));
    } else {
        b.embedder = std::make_unique<HashingEmbedder>(cfg.embed_dim, cfg.embed_seed);
    }

    TkTemplates templates =
        cfg.template_path.empty() ? default_tk_templates() : load_tk_templates(cfg.template_path);
    b.retriever = std::make_unique<TkRetriever>(*b.retriever_gen, *b.embedder, std::move(templates),
                                                cfg.retriever.max_tokens);
    return b;
}

LoadedEnv load_env(const RunConfig& cfg) {
    LoadedEnv out;
    if (cfg.env_kind == "world") {
        auto world = std::make_shared<ToyWikiWorld>(ToyWikiWorld::load(cfg.world_path));
        out.tasks = world->tasks();
        const bool scored = std::any_of(out.tasks.begin(), out.tasks.end(),
                                        [](const Task& t) { return !t.attributes.empty(); });
        out.metric = scored ? "sr" : "em";
        out.env = std::move(world);
        return out;
    }
    SyntheticSuite suite = make_synthetic_suite(cfg.suite);
    out.tasks = suite.tasks();
    out.metric = cfg.suite.variant == SuiteVariant::shop ? "sr" : "em";
    out.suite_pool = std::move(suite.pool);
    out.env = std::move(suite.world);
    return out;
}

namespace {

std::filesystem::path cache_path_of(const RunConfig& cfg) {
    return cfg.tk_cache_path.empty() ? tk_cache_path_for(cfg.pool_path)
                                     : std::filesystem::path(cfg.tk_cache_path);
}

bool needs_tk(const std::vector<Strategy>& strategies) {
    return std::any_of(strategies.begin(), strategies.end(), [](Strategy s) { return uses_tk(s); });
}

// The pool from paths.pool, or the synthetic suite's own pool with its TK
// cache built in memory when a dice strategy needs it.
DemoPool resolve_pool(const RunConfig& cfg, const LoadedEnv& env, TkRetriever& retriever,
                      bool warm_in_memory) {
    if (!cfg.pool_path.empty()) {
        if (!std::filesystem::exists(cfg.pool_path)) {
            throw ConfigError("paths.pool refers to a missing file: " + cfg.pool_path);
        }
        return pool_load(cfg.pool_path, cache_path_of(cfg));
    }
    if (!env.suite_pool) {
        throw ConfigError("paths.pool is required unless env.kind = synthetic");
    }
    if (!warm_in_memory || env.suite_pool->empty()) {
        return *env.suite_pool;
    }
    spdlog::info("building the TK cache for {} synthetic demos in memory", env.suite_pool->size());
    return build_pool_cache(*env.suite_pool, retriever, cfg.workers);
}

RuntimeConfig runtime_of(const RunConfig& cfg) {
    RuntimeConfig rt;
    rt.max_steps = cfg.max_steps;
    rt.max_demos = cfg.selector.m;
    rt.layout.max_prompt_chars = cfg.max_prompt_chars;
    rt.max_tokens = cfg.gen.max_tokens;
    rt.temperature = cfg.gen.temperature;
    return rt;
}

EvalConfig eval_config_of(const RunConfig& cfg) {
    EvalConfig ec;
    ec.strategies = cfg.strategies;
    ec.selector = cfg.selector;
    ec.runtime = runtime_of(cfg);
    ec.seed = cfg.seed;
    ec.workers = cfg.workers;
    ec.config_fingerprint = cfg.fingerprint();
    return ec;
}

void echo_config(const RunConfig& cfg, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_file_atomic(dir / "config.resolved", cfg.echo());
    write_file_atomic(dir / "config.fingerprint", cfg.fingerprint() + "\n");
}

Trajectory trajectory_of(const Task& task, const EpisodeResult& ep) {
    std::vector<Step> steps;
    for (const auto& e : ep.trace) {
        steps.push_back(e.step);
    }
    return make_trajectory(task.question, std::move(steps), ep.outcome.success, ep.outcome.score);
}

}  // namespace

int cmd_make_suite(const RunConfig& cfg, CommandIo io) {
    if (cfg.env_kind != "synthetic") {
        throw ConfigError("make-suite needs env.kind = synthetic");
    }
    SyntheticSuite suite = make_synthetic_suite(cfg.suite);
    const std::filesystem::path dir = cfg.out_dir;
    std::filesystem::create_directories(dir);
    suite.world->save(dir / "world.json");

    // Raw run log: each pool task's failed zero-shot attempt, if any, then
    // its demonstrated solution.
    const ToyWikiWorld pool_world(suite.world->articles(), {}, suite.pool_tasks);
    SyntheticSolver solver;
    const DemoPool empty;
    const SelectorBundle zero_shot{&empty, nullptr, nullptr, nullptr, SelectorConfig{0}};
    RuntimeConfig rt = runtime_of(cfg);
    rt.max_demos = 0;
    std::vector<Trajectory> runs;
    std::size_t failures = 0;
    for (std::size_t i = 0; i < suite.pool_tasks.size(); ++i) {
        const Task& task = suite.pool_tasks[i];
        auto session = pool_world.start(task);
        auto selector = zero_shot.start_episode(0);
        const EpisodeResult ep = run_episode(task, *session, solver, *selector, rt);
        if (!ep.outcome.success) {
            runs.push_back(trajectory_of(task, ep));
            ++failures;
        }
        runs.push_back(suite.pool[i]);
    }
    run_log_save(runs, dir / "runs.jsonl");

    nlohmann::json labels = suite.labels;
    write_file_atomic(dir / "labels.json", labels.dump(1) + "\n");
    echo_config(cfg, dir);
    io.out << "wrote " << suite.tasks().size() << " tasks to " << (dir / "world.json").string() << "\n"
           << "wrote " << runs.size() << " runs (" << failures << " failed) to "
           << (dir / "runs.jsonl").string() << "\n";
    return kExitOk;
}

int cmd_build_pool(const RunConfig& cfg, const std::filesystem::path& runs_path, CommandIo io) {
    if (cfg.pool_path.empty()) {
        throw ConfigError("build-pool needs paths.pool (--pool)");
    }
    const auto runs = run_log_load(runs_path);
    std::vector<Trajectory> kept;
    std::set<std::string> seen;
    for (const auto& t : runs) {
        if (!t.success) {
            continue;
        }
        try {
            validate_trajectory(t, true);
        } catch (const FormatError& e) {
            spdlog::warn("dropping run {}: {}", t.id, e.what());
            continue;
        }
        if (seen.insert(t.id).second) {
            kept.push_back(t);
        }
    }
    io.out << "kept " << kept.size() << " / " << runs.size() << "\n"
           << "dropped " << runs.size() - kept.size() << "\n";

    const auto cache_path = cache_path_of(cfg);
    if (kept.empty()) {
        io.err << "warning: no successful runs in " << runs_path.string() << "; writing an empty pool\n";
        pool_save(DemoPool{}, cfg.pool_path, cache_path);
        io.out << "0 extraction calls\n";
        return kExitOk;
    }
    TkCache previous;
    if (std::filesystem::exists(cache_path)) {
        previous = tk_cache_load(cache_path);
    }
    Backends backends = make_backends(cfg);
    DemoPool pool = DemoPool(std::move(kept)).with_cache(std::move(previous));
    pool = build_pool_cache(pool, *backends.retriever, cfg.workers);
    pool_save(pool, cfg.pool_path, cache_path);
    io.out << backends.retriever_gen->telemetry().gen_calls << " extraction calls\n"
           << "wrote " << cfg.pool_path << " and " << cache_path.string() << "\n";
    return kExitOk;
}

int cmd_run(const RunConfig& cfg, const std::string& task_id, CommandIo io) {
    const LoadedEnv env = load_env(cfg);
    const Task* task = env.env->find_task(task_id);
    if (task == nullptr) {
        io.err << "error: unknown task id '" << task_id << "'\n";
        return kExitUsage;
    }
    Backends backends = make_backends(cfg);
    const DemoPool pool = resolve_pool(cfg, env, *backends.retriever, uses_tk(cfg.selector.strategy));
    check_disjoint({*task}, pool);
    std::optional<KnnRawIndex> knn;
    if (cfg.selector.strategy == Strategy::knn_raw) {
        knn.emplace(pool, *backends.embedder);
    }
    const SelectorBundle bundle{&pool, backends.retriever.get(), backends.embedder.get(),
                                knn ? &*knn : nullptr, cfg.selector};
    bundle.validate();
    auto session = env.env->start(*task);
    auto selector = bundle.start_episode(episode_seed(cfg.seed, task->id));
    const EpisodeResult ep = run_episode(*task, *session, *backends.agent, *selector, runtime_of(cfg));

    const std::filesystem::path dir = cfg.out_dir;
    echo_config(cfg, dir);
    std::filesystem::create_directories(dir / "traces");
    const auto trace_path = dir / "traces" / ("run-" + task->id + ".jsonl");
    write_file_atomic(trace_path, episode_trace_jsonl(ep));
    io.out << "task " << task->id << ": " << (ep.outcome.success ? "success" : "failure") << " ("
           << to_string(ep.termination) << ", score " << ep.outcome.score << ", "
           << ep.trace.size() << " steps)\n"
           << "trace: " << trace_path.string() << "\n";
    if (ep.termination == Termination::backend_error) {
        io.err << "error: " << ep.error << "\n";
        return kExitBackend;
    }
    return ep.outcome.success ? kExitOk : kExitFailure;
}

namespace {

struct EvalSetup {
    LoadedEnv env;
    Backends backends;
    DemoPool pool;
};

EvalSetup prepare_eval(const RunConfig& cfg, bool with_low_quality) {
    EvalSetup s{load_env(cfg), make_backends(cfg), {}};
    const bool warm = needs_tk(cfg.strategies) || with_low_quality;
    s.pool = resolve_pool(cfg, s.env, *s.backends.retriever, warm);
    return s;
}

void print_reports(const std::vector<SuiteReport>& reports, const std::string& metric, CommandIo io) {
    for (const auto& r : reports) {
        io.out << r.strategy << ": " << metric << " = " << r.em_or_sr << " over " << r.n_tasks
               << " tasks (avg score " << r.avg_score << ")\n";
    }
}

nlohmann::json summary_extra(const RunConfig& cfg, const EvalSetup& s) {
    return {{"config_fingerprint", cfg.fingerprint()},
            {"pool_size", s.pool.size()},
            {"n_tasks", s.env.tasks.size()}};
}

}  // namespace

int cmd_eval(const RunConfig& cfg, CommandIo io) {
    EvalSetup s = prepare_eval(cfg, false);
    const EvalResources res{&s.pool, s.backends.retriever.get(), s.backends.embedder.get(),
                            s.backends.agent.get()};
    AblationResult result;
    result.reports = evaluate(s.env.tasks, *s.env.env, res, eval_config_of(cfg));
    std::vector<SuiteReport> tk_reports;
    for (const auto& r : result.reports) {
        if (r.strategy == to_string(Strategy::dice_stepwise)) {
            tk_reports.push_back(r);
        }
    }
    result.buckets = bucket_by_relevance(tk_reports.empty() ? result.reports : tk_reports, cfg.bucket_edges);
    echo_config(cfg, cfg.out_dir);
    write_outputs(cfg.out_dir, result, s.env.metric, summary_extra(cfg, s));
    print_reports(result.reports, s.env.metric, io);
    io.out << "wrote " << cfg.out_dir << "\n";
    return kExitOk;
}

int cmd_ablate(const RunConfig& cfg, CommandIo io) {
    EvalSetup s = prepare_eval(cfg, true);
    const EvalResources res{&s.pool, s.backends.retriever.get(), s.backends.embedder.get(),
                            s.backends.agent.get()};
    AblationOptions options;
    options.bucket_edges = cfg.bucket_edges;
    options.sweep_m = cfg.sweep_m;
    options.low_quality_threshold = cfg.low_quality_threshold;
    options.metric = s.env.metric;
    const AblationResult result = run_ablation(s.env.tasks, *s.env.env, res, eval_config_of(cfg), options);
    echo_config(cfg, cfg.out_dir);
    write_outputs(cfg.out_dir, result, s.env.metric, summary_extra(cfg, s));
    print_reports(result.reports, s.env.metric, io);
    for (const auto& row : result.low_quality) {
        io.out << "low-quality pools (relevance < " << row.threshold << "): " << row.n_empty_pools
               << " of " << row.n_tasks << " empty, success rate " << row.success_rate << "\n";
    }
    io.out << "wrote " << cfg.out_dir << "\n";
    return kExitOk;
}

int cmd_score(const RunConfig& cfg, const std::filesystem::path& context_path, CommandIo io) {
    Json doc;
    try {
        doc = Json::parse(read_file(context_path));
    } catch (const Json::parse_error& e) {
        throw FormatError(0, context_path.string() + ": invalid JSON: " + e.what());
    }
    const AgentContext ctx = context_from_json(doc);
    Backends backends = make_backends(cfg);
    LoadedEnv env;
    if (cfg.pool_path.empty()) {
        env = load_env(cfg);
    }
    const DemoPool pool = resolve_pool(cfg, env, *backends.retriever, uses_tk(cfg.selector.strategy));
    Json out;
    out["strategy"] = to_string(cfg.selector.strategy);
    SelectionResult result;
    switch (cfg.selector.strategy) {
    case Strategy::dice_stepwise:
    case Strategy::dice_taskwise: {
        const SelectorBundle bundle{&pool, backends.retriever.get(), nullptr, nullptr, cfg.selector};
        bundle.validate();
        const AgentContext scored = cfg.selector.strategy == Strategy::dice_taskwise
                                        ? AgentContext(ctx.task(), ctx.max_demos())
                                        : ctx;
        const TkRecord tk = backends.retriever->extract_tk_context(scored);
        out["tk_text"] = tk.tk_text;
        result = select(pool, &tk, cfg.selector, 0, ctx.step_index());
        break;
    }
    case Strategy::random:
        result = select(pool, nullptr, cfg.selector, 0, ctx.step_index());
        break;
    case Strategy::knn_raw: {
        const KnnRawIndex knn(pool, *backends.embedder);
        if (!pool.empty()) {
            result = select_knn_raw(knn, backends.embedder->embed_one(ctx.task()), cfg.selector);
        }
        result.step_index = ctx.step_index();
        break;
    }
    }
    std::vector<std::string> ids;
    for (std::size_t i : result.indices) {
        ids.push_back(pool[i].id);
    }
    out["step_index"] = result.step_index;
    out["indices"] = result.indices;
    out["ids"] = ids;
    out["probs"] = result.probs;
    out["relevance"] = result.relevance;
    io.out << out.dump(2) << "\n";
    return kExitOk;
}

}  // namespace demosel
