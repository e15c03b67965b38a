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
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "demosel/backends/backend.hpp"
#include "demosel/core/model.hpp"
#include "demosel/retriever/tk_retriever.hpp"

namespace demosel {

enum class Strategy { dice_stepwise, dice_taskwise, random, knn_raw };

std::string_view to_string(Strategy s) noexcept;
/// Throws ConfigError on unknown names.
Strategy strategy_from_string(std::string_view name);
bool uses_tk(Strategy s) noexcept;

struct SelectorConfig {
    std::size_t m = 2;
    double beta = 1.0;  // recorded in configs and traces; selection does not read it
    double tau = 1.0;
    Strategy strategy = Strategy::dice_stepwise;
    std::uint64_t seed = 7;

    /// Throws ConfigError when beta or tau is not positive.
    void validate() const;
};

struct SelectionResult {
    std::vector<std::size_t> indices;  // rank order, most relevant first
    std::vector<double> probs;         // over the full pool
    std::vector<double> relevance;     // over the full pool; empty when not scored
    std::size_t step_index = 0;

    /// Mean relevance of the selected entries; nullopt when nothing is scored.
    std::optional<double> mean_selected_relevance() const;

    bool operator==(const SelectionResult&) const = default;
};

/// Scores every candidate against the query and keeps the top m.
SelectionResult rank_candidates(const EmbeddingVector& query,
                                std::span<const EmbeddingVector> candidates, std::size_t m,
                                double tau, std::size_t step_index = 0);

/// Selects demos for one step.
///
/// dice_*: ranks the TK cache against `tk_t`; throws ColdCache when the cache
/// is incomplete or was built under a different fingerprint than `tk_t`.
/// random: seeded uniform sample without replacement, uniform probs.
/// knn_raw is not handled here (see select_knn_raw).
/// An empty pool gives an empty result.
SelectionResult select(const DemoPool& pool, const TkRecord* tk_t, const SelectorConfig& cfg,
                       std::uint64_t episode_seed = 0, std::size_t step_index = 0);

/// Embeddings of the raw demo task texts, for the task-level kNN baseline.
class KnnRawIndex {
public:
    KnnRawIndex() = default;
    KnnRawIndex(const DemoPool& pool, EmbeddingBackend& embedder);

    std::span<const EmbeddingVector> candidates() const noexcept { return candidates_; }

private:
    std::vector<EmbeddingVector> candidates_;
};

SelectionResult select_knn_raw(const KnnRawIndex& index, const EmbeddingVector& task_embedding,
                               const SelectorConfig& cfg);

/// TK of the task-only context (t = 0), then select. The result is meant to be
/// frozen for the whole episode.
SelectionResult select_taskwise(const DemoPool& pool, const std::string& task_text,
                                const SelectorConfig& cfg, const TkRetriever& retriever,
                                GenerationBackend& gen, EmbeddingBackend& embedder);

/// Per-episode selection policy. The runtime calls on_step() before every
/// generation; returning nullopt keeps the current demo block. Other agent
/// frameworks can plug in by implementing this interface.
class EpisodeSelector {
public:
    virtual ~EpisodeSelector() = default;
    virtual std::optional<SelectionResult> on_step(const AgentContext& ctx) = 0;
    virtual const DemoPool& pool() const = 0;
    /// Calls made on behalf of selection during this episode.
    virtual CallTelemetry telemetry() const = 0;
};

/// Shared, immutable selection resources for many concurrent episodes.
struct SelectorBundle {
    const DemoPool* pool = nullptr;
    const TkRetriever* retriever = nullptr;  // required for dice_*
    EmbeddingBackend* embedder = nullptr;    // required for knn_raw
    const KnnRawIndex* knn = nullptr;        // required for knn_raw
    SelectorConfig cfg;

    /// Throws ColdCache / ConfigError when the bundle cannot serve cfg.strategy.
    void validate() const;
    std::unique_ptr<EpisodeSelector> start_episode(std::uint64_t episode_seed) const;
};

}  // namespace demosel
