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

#include "demosel/retriever/tk_retriever.hpp"

#include <atomic>
#include <cctype>
#include <exception>
#include <optional>
#include <thread>

#include "demosel/core/hash.hpp"
#include "demosel/core/persistence.hpp"
#include "demosel/errors.hpp"

namespace demosel {

TkTemplates default_tk_templates() {
    return TkTemplates{
        "tk-v1",
        "Summarize, in 2–4 sentences, the reusable strategies, tool-usage patterns, and "
        "error-recovery tactics demonstrated below, omitting all task-specific entities and "
        "answers.",
        "Given the task and the interaction so far, describe in 2–4 sentences what kind of "
        "knowledge, strategy, or recovery tactic would most help decide the next action. Omit "
        "task-specific entities.",
    };
}

TkTemplates load_tk_templates(const std::filesystem::path& path) {
    Json j;
    try {
        j = Json::parse(read_file(path));
    } catch (const Json::parse_error& e) {
        throw FormatError(0, path.string() + ": invalid JSON: " + e.what());
    }
    TkTemplates t;
    try {
        t.version = j.at("version").get<std::string>();
        t.demo = j.at("demo").get<std::string>();
        t.context = j.at("context").get<std::string>();
    } catch (const Json::exception& e) {
        throw FormatError(0, path.string() + ": " + e.what());
    }
    return t;
}

std::string render_demo_prompt(const TkTemplates& templates, const Trajectory& demo) {
    return templates.demo + "\n\n" + render_trajectory(demo);
}

std::string render_context_prompt(const TkTemplates& templates, const AgentContext& ctx) {
    std::string out = templates.context + "\n\nQuestion: " + ctx.task() + "\n";
    for (const auto& step : ctx.history()) {
        out += render_step(step);
    }
    return out;
}

std::string cap_tk_text(std::string_view completion, int max_tokens) {
    const auto first = completion.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = completion.find_last_not_of(" \t\r\n");
    std::string_view text = completion.substr(first, last - first + 1);

    // Locate the end of the max_tokens-th word.
    std::size_t words = 0;
    std::size_t cut = text.size();
    bool in_word = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const bool space = std::isspace(static_cast<unsigned char>(text[i])) != 0;
        if (!space && !in_word && ++words > static_cast<std::size_t>(max_tokens)) {
            cut = i;
            break;
        }
        in_word = !space;
    }
    if (cut == text.size()) {
        return std::string(text);
    }
    std::string_view capped = text.substr(0, cut);
    const auto sentence_end = capped.find_last_of(".!?");
    if (sentence_end != std::string_view::npos) {
        capped = capped.substr(0, sentence_end + 1);
    }
    const auto end = capped.find_last_not_of(" \t\r\n");
    return std::string(capped.substr(0, end + 1));
}

std::string retriever_fingerprint(const TkTemplates& templates, std::string_view retriever_model,
                                  std::string_view embedding_model) {
    std::uint64_t h = fnv1a64(templates.version);
    h = fnv1a64(templates.demo, h);
    h = fnv1a64(templates.context, h);
    h = fnv1a64(retriever_model, h);
    h = fnv1a64("\x1f", h);
    h = fnv1a64(embedding_model, h);
    return to_hex(h);
}

TkRetriever::TkRetriever(GenerationBackend& gen, EmbeddingBackend& embedder,
                         TkTemplates templates, int max_tokens)
    : gen_(gen),
      embedder_(embedder),
      templates_(std::move(templates)),
      max_tokens_(max_tokens),
      fingerprint_(retriever_fingerprint(templates_, gen.model_name(), embedder.model_name())) {}

TkRecord TkRetriever::extract(const std::string& source_id, const std::string& prompt,
                              GenerationBackend& gen, EmbeddingBackend& embedder) const {
    GenRequest req{prompt, max_tokens_, 0.0, {}};
    std::string text;
    try {
        text = cap_tk_text(gen.generate(req), max_tokens_);
    } catch (const EmptyCompletion&) {
    }
    if (text.empty()) {
        req.prompt = prompt + std::string(kTkFallbackInstruction);
        try {
            text = cap_tk_text(gen.generate(req), max_tokens_);
        } catch (const EmptyCompletion& e) {
            throw TkExtractionFailed(source_id, e.what());
        }
        if (text.empty()) {
            throw TkExtractionFailed(source_id, "empty completion after fallback");
        }
    }
    TkRecord r;
    r.source_id = source_id;
    r.embedding = embedder.embed_one(text);
    r.tk_text = std::move(text);
    r.retriever_fingerprint = fingerprint_;
    return r;
}

TkRecord TkRetriever::extract_tk_demo(const Trajectory& demo) {
    if (demo.steps.empty()) {
        throw TkExtractionFailed(demo.id, "demo has no steps");
    }
    const std::string key = demo.id + '\x1f' + fingerprint_;
    {
        std::lock_guard lock(memo_mutex_);
        if (auto it = memo_.find(key); it != memo_.end()) {
            return it->second;
        }
    }
    TkRecord r = extract(demo.id, render_demo_prompt(templates_, demo), gen_, embedder_);
    std::lock_guard lock(memo_mutex_);
    return memo_.try_emplace(key, std::move(r)).first->second;
}

TkRecord TkRetriever::extract_tk_context(const AgentContext& ctx) const {
    return extract_tk_context(ctx, gen_, embedder_);
}

TkRecord TkRetriever::extract_tk_context(const AgentContext& ctx, GenerationBackend& gen,
                                         EmbeddingBackend& embedder) const {
    if (ctx.task().empty()) {
        throw TkExtractionFailed("context", "context has no task");
    }
    return extract("context@" + std::to_string(ctx.step_index()),
                   render_context_prompt(templates_, ctx), gen, embedder);
}

void TkRetriever::clear_memo() {
    std::lock_guard lock(memo_mutex_);
    memo_.clear();
}

DemoPool build_pool_cache(const DemoPool& pool, TkRetriever& retriever, std::size_t workers) {
    if (pool.empty()) {
        throw EmptyPool("cannot build a TK cache for an empty pool");
    }
    const auto& fp = retriever.fingerprint();
    std::vector<std::optional<TkRecord>> fresh(pool.size());
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const TkRecord* r = pool.cached(i);
        if (r == nullptr || r->retriever_fingerprint != fp) {
            todo.push_back(i);
        }
    }

    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> failures(todo.size());
    auto work = [&] {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= todo.size()) {
                return;
            }
            try {
                fresh[todo[k]] = retriever.extract_tk_demo(pool[todo[k]]);
            } catch (...) {
                failures[k] = std::current_exception();
            }
        }
    };
    const std::size_t width = std::max<std::size_t>(1, std::min(workers, todo.size()));
    {
        std::vector<std::jthread> threads;
        for (std::size_t w = 1; w < width; ++w) {
            threads.emplace_back(work);
        }
        work();
    }
    // Report the lowest failing pool index regardless of completion order.
    for (const auto& f : failures) {
        if (f) {
            std::rethrow_exception(f);
        }
    }

    TkCache cache;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const auto& id = pool[i].id;
        cache.insert_or_assign(id, fresh[i] ? std::move(*fresh[i]) : *pool.cached(i));
    }
    return pool.with_cache(std::move(cache));
}

}  // namespace demosel
