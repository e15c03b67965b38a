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

#include "demosel/eval/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include <spdlog/spdlog.h>

#include "demosel/core/hash.hpp"
#include "demosel/core/parallel.hpp"
#include "demosel/core/persistence.hpp"
#include "demosel/errors.hpp"
#include "demosel/selector/scoring.hpp"

namespace demosel {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

double rate(std::size_t k, std::size_t n) {
    return n == 0 ? 0.0 : static_cast<double>(k) / static_cast<double>(n);
}

}  // namespace

std::uint64_t episode_seed(std::uint64_t run_seed, std::string_view task_id) {
    return mix64(fnv1a64(task_id, mix64(run_seed)));
}

void check_disjoint(const std::vector<Task>& tasks, const DemoPool& pool) {
    std::set<std::string_view> pool_ids;
    std::set<std::string_view> pool_questions;
    for (const auto& e : pool.entries()) {
        pool_ids.insert(e.id);
        pool_questions.insert(e.task);
    }
    for (const auto& t : tasks) {
        if (pool_ids.contains(t.id) || pool_questions.contains(t.question)) {
            throw OverlapError(t.id);
        }
    }
}

SuiteReport run_suite(const std::vector<Task>& tasks, const Environment& env,
                      const SelectorBundle& bundle, GenerationBackend& agent,
                      const EvalConfig& cfg, std::string strategy_label) {
    RuntimeConfig runtime = cfg.runtime;
    runtime.max_demos = bundle.cfg.m;
    SuiteReport report;
    report.strategy = std::move(strategy_label);
    report.n_tasks = tasks.size();
    report.config_fingerprint = cfg.config_fingerprint;
    report.episodes.resize(tasks.size());
    parallel_for(tasks.size(), cfg.workers, [&](std::size_t i) {
        const Task& task = tasks[i];
        auto session = env.start(task);
        auto selector = bundle.start_episode(episode_seed(cfg.seed, task.id));
        report.episodes[i] = run_episode(task, *session, agent, *selector, runtime);
    });
    std::size_t successes = 0;
    double score_total = 0.0;
    for (const auto& ep : report.episodes) {
        report.per_task.push_back(TaskResult{ep.task_id, ep.outcome.success, ep.outcome.score,
                                             ep.mean_relevance(), ep.termination});
        successes += ep.outcome.success ? 1 : 0;
        score_total += ep.outcome.score;
        if (ep.termination == Termination::backend_error) {
            spdlog::warn("task {}: {}", ep.task_id, ep.error);
        }
    }
    report.em_or_sr = rate(successes, tasks.size());
    report.avg_score = tasks.empty() ? 0.0 : score_total / static_cast<double>(tasks.size());
    return report;
}

std::vector<SuiteReport> evaluate(const std::vector<Task>& tasks, const Environment& env,
                                  const EvalResources& res, const EvalConfig& cfg) {
    if (res.pool == nullptr || res.agent == nullptr) {
        throw ConfigError("evaluation needs a pool and an agent backend");
    }
    check_disjoint(tasks, *res.pool);
    std::optional<KnnRawIndex> knn;
    const bool wants_knn = std::find(cfg.strategies.begin(), cfg.strategies.end(),
                                     Strategy::knn_raw) != cfg.strategies.end();
    if (wants_knn && res.embedder != nullptr) {
        knn.emplace(*res.pool, *res.embedder);
    }
    std::vector<SelectorBundle> bundles;
    for (Strategy s : cfg.strategies) {
        SelectorBundle b{res.pool, res.retriever, res.embedder, knn ? &*knn : nullptr, cfg.selector};
        b.cfg.strategy = s;
        b.validate();
        bundles.push_back(b);
    }
    std::vector<SuiteReport> reports;
    for (const auto& b : bundles) {
        reports.push_back(run_suite(tasks, env, b, *res.agent, cfg, std::string(to_string(b.cfg.strategy))));
    }
    return reports;
}

std::vector<double> default_bucket_edges() { return {0.0, 0.25, 0.5, 0.75, 1.0}; }

void validate_bucket_edges(const std::vector<double>& edges) {
    if (edges.size() < 2) {
        throw ConfigError("bucket edges need at least two values");
    }
    for (std::size_t i = 0; i < edges.size(); ++i) {
        if (!(edges[i] >= 0.0 && edges[i] <= 1.0)) {
            throw ConfigError("bucket edges must lie within [0, 1]");
        }
        if (i > 0 && !(edges[i] > edges[i - 1])) {
            throw ConfigError("bucket edges must be strictly increasing");
        }
    }
}

std::vector<BucketRow> bucket_by_relevance(const std::vector<SuiteReport>& reports,
                                           const std::vector<double>& edges) {
    validate_bucket_edges(edges);
    const std::size_t nb = edges.size() - 1;
    std::vector<std::size_t> n(nb, 0);
    std::vector<std::size_t> wins(nb, 0);
    for (const auto& report : reports) {
        for (const auto& row : report.per_task) {
            if (!row.mean_relevance) {
                continue;
            }
            const double r = *row.mean_relevance;
            for (std::size_t b = 0; b < nb; ++b) {
                const bool last = b + 1 == nb;
                if (r >= edges[b] && (r < edges[b + 1] || (last && r <= edges[b + 1]))) {
                    ++n[b];
                    wins[b] += row.success ? 1 : 0;
                    break;
                }
            }
        }
    }
    std::vector<BucketRow> rows;
    for (std::size_t b = 0; b < nb; ++b) {
        rows.push_back(BucketRow{edges[b], edges[b + 1], n[b], rate(wins[b], n[b])});
    }
    return rows;
}

bool buckets_non_decreasing(const std::vector<BucketRow>& rows) {
    std::optional<double> previous;
    for (const auto& r : rows) {
        if (r.n == 0) {
            continue;
        }
        if (previous && r.success_rate < *previous) {
            return false;
        }
        previous = r.success_rate;
    }
    return true;
}

std::vector<SweepRow> sweep_num_demos(const std::vector<Task>& tasks, const Environment& env,
                                      const EvalResources& res,
                                      const std::vector<std::size_t>& m_values,
                                      const EvalConfig& cfg) {
    for (std::size_t m : m_values) {
        if (m > res.pool->size()) {
            throw ConfigError("sweep value m = " + std::to_string(m) + " exceeds the pool size " +
                              std::to_string(res.pool->size()));
        }
    }
    std::vector<SweepRow> rows;
    for (std::size_t m : m_values) {
        EvalConfig cell = cfg;
        cell.selector.m = m;
        for (const auto& report : evaluate(tasks, env, res, cell)) {
            rows.push_back(SweepRow{m, report.strategy, report.em_or_sr});
        }
    }
    return rows;
}

DemoPool low_quality_filter(const DemoPool& pool, double threshold, const TkRecord& tk_reference) {
    if (!pool.cache_warm(tk_reference.retriever_fingerprint)) {
        throw ColdCache("cold cache; run build-pool");
    }
    if (threshold >= 1.0) {
        return pool;
    }
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const double rel = relevance_from_cosine(cosine(tk_reference.embedding, pool.cached(i)->embedding));
        if (rel < threshold) {
            keep.push_back(i);
        }
    }
    if (keep.empty()) {
        throw EmptyPool("no pool entry has relevance below " + num(threshold));
    }
    return pool.subset(keep);
}

LowQualityRow low_quality_eval(const std::vector<Task>& tasks, const Environment& env,
                               const EvalResources& res, double threshold, const EvalConfig& cfg) {
    if (res.retriever == nullptr) {
        throw ConfigError("the low-quality stress test needs a knowledge retriever");
    }
    check_disjoint(tasks, *res.pool);
    SelectorConfig sel = cfg.selector;
    sel.strategy = Strategy::dice_stepwise;
    RuntimeConfig runtime = cfg.runtime;
    runtime.max_demos = sel.m;

    std::vector<EpisodeResult> episodes(tasks.size());
    std::vector<char> empty(tasks.size(), 0);
    parallel_for(tasks.size(), cfg.workers, [&](std::size_t i) {
        const Task& task = tasks[i];
        const TkRecord reference = res.retriever->extract_tk_context(AgentContext(task.question, sel.m));
        DemoPool filtered;
        try {
            filtered = low_quality_filter(*res.pool, threshold, reference);
        } catch (const EmptyPool&) {
            empty[i] = 1;
        }
        SelectorBundle bundle{&filtered, res.retriever, nullptr, nullptr, sel};
        bundle.validate();
        auto session = env.start(task);
        auto selector = bundle.start_episode(episode_seed(cfg.seed, task.id));
        episodes[i] = run_episode(task, *session, *res.agent, *selector, runtime);
    });
    LowQualityRow row;
    row.strategy = std::string(to_string(sel.strategy));
    row.threshold = threshold;
    row.n_tasks = tasks.size();
    std::size_t wins = 0;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        row.n_empty_pools += empty[i];
        wins += episodes[i].outcome.success ? 1 : 0;
    }
    row.success_rate = rate(wins, tasks.size());
    return row;
}

std::string suite_csv(const std::vector<SuiteReport>& reports, std::string_view metric) {
    std::string out = "strategy,n_tasks,metric,value\n";
    for (const auto& r : reports) {
        out += r.strategy + "," + std::to_string(r.n_tasks) + "," + std::string(metric) + "," +
               num(r.em_or_sr) + "\n";
    }
    return out;
}

std::string buckets_csv(const std::vector<BucketRow>& rows) {
    std::string out = "lo,hi,n,success_rate\n";
    for (const auto& r : rows) {
        out += num(r.lo) + "," + num(r.hi) + "," + std::to_string(r.n) + "," + num(r.success_rate) + "\n";
    }
    return out;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "m,strategy,success_rate\n";
    for (const auto& r : rows) {
        out += std::to_string(r.m) + "," + r.strategy + "," + num(r.success_rate) + "\n";
    }
    return out;
}

std::string low_quality_csv(const std::vector<LowQualityRow>& rows) {
    std::string out = "strategy,threshold,n_tasks,n_empty_pools,success_rate\n";
    for (const auto& r : rows) {
        out += r.strategy + "," + num(r.threshold) + "," + std::to_string(r.n_tasks) + "," +
               std::to_string(r.n_empty_pools) + "," + num(r.success_rate) + "\n";
    }
    return out;
}

nlohmann::json report_json(const SuiteReport& report) {
    Json per_task = Json::array();
    for (const auto& t : report.per_task) {
        per_task.push_back({{"task_id", t.task_id},
                            {"success", t.success},
                            {"score", t.score},
                            {"mean_relevance", t.mean_relevance ? Json(*t.mean_relevance) : Json()},
                            {"termination", to_string(t.termination)}});
    }
    CallTelemetry agent;
    CallTelemetry selection;
    for (const auto& ep : report.episodes) {
        agent += ep.telemetry.agent;
        selection += ep.telemetry.selection;
    }
    auto tel = [](const CallTelemetry& t) {
        return Json{{"gen_calls", t.gen_calls},
                    {"embed_calls", t.embed_calls},
                    {"tokens_in", t.tokens_in},
                    {"tokens_out", t.tokens_out}};
    };
    return {{"strategy", report.strategy},
            {"n_tasks", report.n_tasks},
            {"em_or_sr", report.em_or_sr},
            {"avg_score", report.avg_score},
            {"config_fingerprint", report.config_fingerprint},
            {"telemetry", {{"agent", tel(agent)}, {"selection", tel(selection)}}},
            {"per_task", std::move(per_task)}};
}

std::string suite_traces_jsonl(const SuiteReport& report) {
    std::string out;
    for (const auto& ep : report.episodes) {
        out += episode_trace_jsonl(ep);
    }
    return out;
}

AblationResult run_ablation(const std::vector<Task>& tasks, const Environment& env,
                            const EvalResources& res, const EvalConfig& cfg,
                            const AblationOptions& options) {
    validate_bucket_edges(options.bucket_edges);
    AblationResult out;
    out.reports = evaluate(tasks, env, res, cfg);

    std::vector<SuiteReport> bucket_source;
    for (const auto& r : out.reports) {
        if (r.strategy == to_string(Strategy::dice_stepwise)) {
            bucket_source.push_back(r);
        }
    }
    out.buckets = bucket_by_relevance(bucket_source.empty() ? out.reports : bucket_source,
                                      options.bucket_edges);

    std::vector<std::size_t> m_values;
    for (std::size_t m : options.sweep_m) {
        if (m <= res.pool->size()) {
            m_values.push_back(m);
        }
    }
    EvalConfig sweep_cfg = cfg;
    sweep_cfg.strategies.clear();
    for (Strategy s : options.sweep_strategies) {
        if (!uses_tk(s) || res.retriever != nullptr) {
            sweep_cfg.strategies.push_back(s);
        }
    }
    if (!sweep_cfg.strategies.empty() && !m_values.empty()) {
        out.sweep = sweep_num_demos(tasks, env, res, m_values, sweep_cfg);
    }
    if (res.retriever != nullptr && !res.pool->empty()) {
        out.low_quality.push_back(
            low_quality_eval(tasks, env, res, options.low_quality_threshold, cfg));
    }
    return out;
}

void write_outputs(const std::filesystem::path& out_dir, const AblationResult& result,
                   std::string_view metric, const nlohmann::json& extra_summary) {
    std::filesystem::create_directories(out_dir / "traces");
    for (const auto& r : result.reports) {
        write_file_atomic(out_dir / "traces" / (r.strategy + ".jsonl"), suite_traces_jsonl(r));
    }
    write_file_atomic(out_dir / "suite.csv", suite_csv(result.reports, metric));
    if (!result.buckets.empty()) {
        write_file_atomic(out_dir / "buckets.csv", buckets_csv(result.buckets));
    }
    if (!result.sweep.empty()) {
        write_file_atomic(out_dir / "sweep.csv", sweep_csv(result.sweep));
    }
    if (!result.low_quality.empty()) {
        write_file_atomic(out_dir / "low_quality.csv", low_quality_csv(result.low_quality));
    }
    Json summary = extra_summary.is_object() ? extra_summary : Json::object();
    summary["metric"] = metric;
    summary["reports"] = Json::array();
    for (const auto& r : result.reports) {
        summary["reports"].push_back(report_json(r));
    }
    summary["buckets_non_decreasing"] = buckets_non_decreasing(result.buckets);
    write_file_atomic(out_dir / "summary.json", summary.dump(2) + "\n");
}

}  // namespace demosel
