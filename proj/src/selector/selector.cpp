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

#include "demosel/selector/selector.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "demosel/core/hash.hpp"
#include "demosel/errors.hpp"
#include "demosel/selector/scoring.hpp"

namespace demosel {

std::string_view to_string(Strategy s) noexcept {
    switch (s) {
    case Strategy::dice_stepwise:
        return "dice_stepwise";
    case Strategy::dice_taskwise:
        return "dice_taskwise";
    case Strategy::random:
        return "random";
    case Strategy::knn_raw:
        return "knn_raw";
    }
    return "unknown";
}

Strategy strategy_from_string(std::string_view name) {
    for (auto s : {Strategy::dice_stepwise, Strategy::dice_taskwise, Strategy::random,
                   Strategy::knn_raw}) {
        if (to_string(s) == name) {
            return s;
        }
    }
    throw ConfigError("unknown selector strategy '" + std::string(name) +
                      "' (expected dice_stepwise, dice_taskwise, random or knn_raw)");
}

bool uses_tk(Strategy s) noexcept {
    return s == Strategy::dice_stepwise || s == Strategy::dice_taskwise;
}

void SelectorConfig::validate() const {
    if (!(beta > 0.0)) {
        throw ConfigError("selector.beta must be positive");
    }
    if (!(tau > 0.0)) {
        throw ConfigError("selector.tau must be positive");
    }
}

std::optional<double> SelectionResult::mean_selected_relevance() const {
    if (indices.empty() || relevance.empty()) {
        return std::nullopt;
    }
    double total = 0.0;
    for (std::size_t i : indices) {
        total += relevance.at(i);
    }
    return total / static_cast<double>(indices.size());
}

SelectionResult rank_candidates(const EmbeddingVector& query,
                                std::span<const EmbeddingVector> candidates, std::size_t m,
                                double tau, std::size_t step_index) {
    SelectionResult out;
    out.step_index = step_index;
    if (candidates.empty()) {
        return out;
    }
    const auto sims = similarities(query, candidates);
    out.probs = softmax(sims, tau);
    out.relevance.reserve(sims.size());
    for (double s : sims) {
        out.relevance.push_back(relevance_from_cosine(s));
    }
    // softmax is strictly increasing in the similarity, so ranking on the
    // similarity gives the InfoNCE argmax without exp() rounding ties.
    out.indices = top_m(sims, m);
    return out;
}

namespace {

std::vector<EmbeddingVector> cached_embeddings(const DemoPool& pool, const TkRecord& tk_t) {
    if (!pool.cache_warm(tk_t.retriever_fingerprint)) {
        throw ColdCache("TK cache is missing entries or was built by a different retriever");
    }
    std::vector<EmbeddingVector> out;
    out.reserve(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        out.push_back(pool.cached(i)->embedding);
    }
    return out;
}

}  // namespace

SelectionResult select(const DemoPool& pool, const TkRecord* tk_t, const SelectorConfig& cfg,
                       std::uint64_t episode_seed, std::size_t step_index) {
    cfg.validate();
    if (pool.empty()) {
        return SelectionResult{{}, {}, {}, step_index};
    }
    switch (cfg.strategy) {
    case Strategy::dice_stepwise:
    case Strategy::dice_taskwise: {
        if (tk_t == nullptr) {
            throw Error("dice selection needs the context TK");
        }
        const auto candidates = cached_embeddings(pool, *tk_t);
        return rank_candidates(tk_t->embedding, candidates, cfg.m, cfg.tau, step_index);
    }
    case Strategy::random: {
        SelectionResult out;
        out.step_index = step_index;
        std::vector<std::size_t> order(pool.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 rng(mix64(cfg.seed ^ mix64(episode_seed)));
        std::shuffle(order.begin(), order.end(), rng);
        order.resize(std::min(cfg.m, order.size()));
        out.indices = std::move(order);
        out.probs.assign(pool.size(), 1.0 / static_cast<double>(pool.size()));
        if (tk_t != nullptr && pool.cache_warm(tk_t->retriever_fingerprint)) {
            const auto candidates = cached_embeddings(pool, *tk_t);
            for (double s : similarities(tk_t->embedding, candidates)) {
                out.relevance.push_back(relevance_from_cosine(s));
            }
        }
        return out;
    }
    case Strategy::knn_raw:
        throw Error("knn_raw selection goes through select_knn_raw");
    }
    return {};
}

KnnRawIndex::KnnRawIndex(const DemoPool& pool, EmbeddingBackend& embedder) {
    if (pool.empty()) {
        return;
    }
    std::vector<std::string> texts;
    texts.reserve(pool.size());
    for (const auto& e : pool.entries()) {
        texts.push_back(e.task);
    }
    candidates_ = embedder.embed(texts);
}

SelectionResult select_knn_raw(const KnnRawIndex& index, const EmbeddingVector& task_embedding,
                               const SelectorConfig& cfg) {
    cfg.validate();
    return rank_candidates(task_embedding, index.candidates(), cfg.m, cfg.tau, 0);
}

SelectionResult select_taskwise(const DemoPool& pool, const std::string& task_text,
                                const SelectorConfig& cfg, const TkRetriever& retriever,
                                GenerationBackend& gen, EmbeddingBackend& embedder) {
    if (pool.empty() || cfg.m == 0) {
        return SelectionResult{};
    }
    const AgentContext initial(task_text, cfg.m);
    const TkRecord tk = retriever.extract_tk_context(initial, gen, embedder);
    return select(pool, &tk, cfg, 0, 0);
}

namespace {

class StrategyEpisodeSelector final : public EpisodeSelector {
public:
    StrategyEpisodeSelector(const SelectorBundle& bundle, std::uint64_t seed)
        : bundle_(bundle), seed_(seed) {
        if (bundle_.retriever != nullptr) {
            gen_.emplace(bundle_.retriever->generator());
            tk_embedder_.emplace(bundle_.retriever->embedder());
        }
        if (bundle_.embedder != nullptr) {
            raw_embedder_.emplace(*bundle_.embedder);
        }
    }

    std::optional<SelectionResult> on_step(const AgentContext& ctx) override {
        const auto& cfg = bundle_.cfg;
        const std::size_t t = ctx.step_index();
        const bool first = !selected_once_;
        selected_once_ = true;
        if (cfg.strategy != Strategy::dice_stepwise && !first) {
            return std::nullopt;
        }
        const DemoPool& pool = *bundle_.pool;
        if (pool.empty() || cfg.m == 0) {
            return SelectionResult{{}, {}, {}, t};
        }
        switch (cfg.strategy) {
        case Strategy::dice_stepwise:
        case Strategy::dice_taskwise: {
            const TkRecord tk = bundle_.retriever->extract_tk_context(ctx, *gen_, *tk_embedder_);
            return select(pool, &tk, cfg, seed_, t);
        }
        case Strategy::random:
            return select(pool, nullptr, cfg, seed_, t);
        case Strategy::knn_raw: {
            auto result = select_knn_raw(*bundle_.knn, raw_embedder_->embed_one(ctx.task()), cfg);
            result.step_index = t;
            return result;
        }
        }
        return std::nullopt;
    }

    const DemoPool& pool() const override { return *bundle_.pool; }

    CallTelemetry telemetry() const override {
        CallTelemetry total;
        if (gen_) {
            total += gen_->telemetry();
        }
        if (tk_embedder_) {
            total += tk_embedder_->telemetry();
        }
        if (raw_embedder_) {
            total += raw_embedder_->telemetry();
        }
        return total;
    }

private:
    const SelectorBundle& bundle_;
    std::uint64_t seed_;
    bool selected_once_ = false;
    std::optional<CountingGenerator> gen_;
    std::optional<CountingEmbedder> tk_embedder_;
    std::optional<CountingEmbedder> raw_embedder_;
};

}  // namespace

void SelectorBundle::validate() const {
    cfg.validate();
    if (pool == nullptr) {
        throw ConfigError("selector bundle has no pool");
    }
    if (uses_tk(cfg.strategy)) {
        if (retriever == nullptr) {
            throw ConfigError("dice strategies need a knowledge retriever");
        }
        if (!pool->empty() && !pool->cache_warm(retriever->fingerprint())) {
            throw ColdCache("cold cache; run build-pool");
        }
    }
    if (cfg.strategy == Strategy::knn_raw && (embedder == nullptr || knn == nullptr)) {
        throw ConfigError("knn_raw needs an embedder and a raw-text index");
    }
}

std::unique_ptr<EpisodeSelector> SelectorBundle::start_episode(std::uint64_t episode_seed) const {
    return std::make_unique<StrategyEpisodeSelector>(*this, episode_seed);
}

}  // namespace demosel
