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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "demosel/env/environment.hpp"
#include "demosel/runtime/episode.hpp"
#include "demosel/selector/selector.hpp"

namespace demosel {

struct TaskResult {
    std::string task_id;
    bool success = false;
    double score = 0.0;
    std::optional<double> mean_relevance;
    Termination termination = Termination::step_limit;

    bool operator==(const TaskResult&) const = default;
};

struct SuiteReport {
    std::string strategy;
    std::size_t n_tasks = 0;
    double em_or_sr = 0.0;   // mean per-task success
    double avg_score = 0.0;  // mean per-task score
    std::vector<TaskResult> per_task;
    std::string config_fingerprint;
    std::vector<EpisodeResult> episodes;  // task order, for traces
};

/// Shared backends and pool for an evaluation. The agent, retriever and
/// embedder must tolerate concurrent calls.
struct EvalResources {
    const DemoPool* pool = nullptr;
    const TkRetriever* retriever = nullptr;  // dice_* strategies
    EmbeddingBackend* embedder = nullptr;    // knn_raw
    GenerationBackend* agent = nullptr;
};

struct EvalConfig {
    std::vector<Strategy> strategies = {Strategy::random, Strategy::knn_raw,
                                        Strategy::dice_taskwise, Strategy::dice_stepwise};
    SelectorConfig selector;  // strategy is overridden per report
    RuntimeConfig runtime;
    std::uint64_t seed = 7;
    std::size_t workers = 4;
    std::string config_fingerprint;
};

/// Seed for task `task_id`'s episode; the same under every strategy.
std::uint64_t episode_seed(std::uint64_t run_seed, std::string_view task_id);

/// Throws OverlapError naming the first task whose id or question text is
/// also a pool entry.
void check_disjoint(const std::vector<Task>& tasks, const DemoPool& pool);

/// One episode per task under `bundle`, reduced in task order.
SuiteReport run_suite(const std::vector<Task>& tasks, const Environment& env,
                      const SelectorBundle& bundle, GenerationBackend& agent,
                      const EvalConfig& cfg, std::string strategy_label);

/// One report per configured strategy, identical episode seeds throughout.
std::vector<SuiteReport> evaluate(const std::vector<Task>& tasks, const Environment& env,
                                  const EvalResources& res, const EvalConfig& cfg);

struct BucketRow {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t n = 0;
    double success_rate = 0.0;  // 0 when n = 0

    bool operator==(const BucketRow&) const = default;
};

std::vector<double> default_bucket_edges();

/// Throws ConfigError unless edges has >= 2 strictly increasing entries in [0,1].
void validate_bucket_edges(const std::vector<double>& edges);

/// Episodes pooled across `reports`, bucketed by their step-weighted mean
/// relevance (lo <= r < hi; the last bucket includes hi). Episodes without
/// any scored selection are left out.
std::vector<BucketRow> bucket_by_relevance(const std::vector<SuiteReport>& reports,
                                           const std::vector<double>& edges);

/// Success rate never decreases across the non-empty buckets.
bool buckets_non_decreasing(const std::vector<BucketRow>& rows);

struct SweepRow {
    std::size_t m = 0;
    std::string strategy;
    double success_rate = 0.0;

    bool operator==(const SweepRow&) const = default;
};

/// Runs cfg.strategies for every m. Throws ConfigError when some m exceeds
/// the pool size.
std::vector<SweepRow> sweep_num_demos(const std::vector<Task>& tasks, const Environment& env,
                                      const EvalResources& res, const std::vector<std::size_t>& m_values,
                                      const EvalConfig& cfg);

/// Pool entries whose relevance against `tk_reference` is below `threshold`;
/// a threshold of 1 or more keeps the pool unchanged. Throws ColdCache when
/// the cache does not match the reference and EmptyPool when nothing survives.
DemoPool low_quality_filter(const DemoPool& pool, double threshold, const TkRecord& tk_reference);

struct LowQualityRow {
    std::string strategy;
    double threshold = 0.0;
    std::size_t n_tasks = 0;
    std::size_t n_empty_pools = 0;
    double success_rate = 0.0;

    bool operator==(const LowQualityRow&) const = default;
};

/// dice_stepwise with every task restricted to its own low-relevance pool.
/// Tasks whose filtered pool is empty run zero-shot and are counted.
LowQualityRow low_quality_eval(const std::vector<Task>& tasks, const Environment& env,
                               const EvalResources& res, double threshold, const EvalConfig& cfg);

std::string suite_csv(const std::vector<SuiteReport>& reports, std::string_view metric);
std::string buckets_csv(const std::vector<BucketRow>& rows);
std::string sweep_csv(const std::vector<SweepRow>& rows);
std::string low_quality_csv(const std::vector<LowQualityRow>& rows);
nlohmann::json report_json(const SuiteReport& report);

/// Traces of every episode in task order.
std::string suite_traces_jsonl(const SuiteReport& report);

struct AblationOptions {
    std::vector<double> bucket_edges = default_bucket_edges();
    std::vector<std::size_t> sweep_m = {0, 1, 2, 3, 4, 6};
    std::vector<Strategy> sweep_strategies = {Strategy::dice_stepwise, Strategy::random};
    double low_quality_threshold = 0.5;
    std::string metric = "em";
};

struct AblationResult {
    std::vector<SuiteReport> reports;
    std::vector<BucketRow> buckets;
    std::vector<SweepRow> sweep;
    std::vector<LowQualityRow> low_quality;
};

/// evaluate + buckets (over the dice_stepwise report when present) + demo-count
/// sweep + low-quality pool stress test. The sweep drops m values beyond the
/// pool size; the low-quality run needs a retriever and is skipped without one.
AblationResult run_ablation(const std::vector<Task>& tasks, const Environment& env,
                            const EvalResources& res, const EvalConfig& cfg,
                            const AblationOptions& options);

/// Writes suite.csv, and when present buckets.csv, sweep.csv, low_quality.csv,
/// plus summary.json and traces/<strategy>.jsonl. Every file is written
/// atomically.
void write_outputs(const std::filesystem::path& out_dir, const AblationResult& result,
                   std::string_view metric, const nlohmann::json& extra_summary);

}  // namespace demosel
