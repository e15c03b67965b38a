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
#include <mutex>
#include <string>
#include <unordered_map>

#include "demosel/backends/backend.hpp"
#include "demosel/core/model.hpp"

namespace demosel {

/// Versioned prompt templates for the knowledge retriever.
struct TkTemplates {
    std::string version;
    std::string demo;     // followed by the rendered trajectory
    std::string context;  // followed by the task and history, never the demos
};

TkTemplates default_tk_templates();

/// Reads `{"version": str, "demo": str, "context": str}`. Throws IoError/FormatError.
TkTemplates load_tk_templates(const std::filesystem::path& path);

std::string render_demo_prompt(const TkTemplates& templates, const Trajectory& demo);
std::string render_context_prompt(const TkTemplates& templates, const AgentContext& ctx);

inline constexpr int kTkMaxTokens = 128;
inline constexpr std::string_view kTkFallbackInstruction =
    "\n\nRespond with at least one complete sentence.";

/// Trims, then caps at `max_tokens` words, cutting back to the last sentence
/// end inside the cap when there is one.
std::string cap_tk_text(std::string_view completion, int max_tokens = kTkMaxTokens);

/// Identity of (templates, retriever model, embedding model). Cached records
/// are valid only under the fingerprint that produced them.
std::string retriever_fingerprint(const TkTemplates& templates, std::string_view retriever_model,
                                  std::string_view embedding_model);

/// Extracts transferable-knowledge text with a generation backend and embeds it.
/// Demo extractions are memoized by (demo id, fingerprint); the memo is safe
/// for concurrent insert-if-absent.
class TkRetriever {
public:
    TkRetriever(GenerationBackend& gen, EmbeddingBackend& embedder,
                TkTemplates templates = default_tk_templates(), int max_tokens = kTkMaxTokens);

    const std::string& fingerprint() const noexcept { return fingerprint_; }
    const TkTemplates& templates() const noexcept { return templates_; }
    int max_tokens() const noexcept { return max_tokens_; }
    GenerationBackend& generator() const noexcept { return gen_; }
    EmbeddingBackend& embedder() const noexcept { return embedder_; }

    /// One generation and one embedding call unless memoized.
    /// Throws TkExtractionFailed when the completion stays empty after one retry.
    TkRecord extract_tk_demo(const Trajectory& demo);

    /// TK of the live context from task and history only. One generation and
    /// one embedding call; never memoized.
    TkRecord extract_tk_context(const AgentContext& ctx) const;

    /// Same, but routed through caller-supplied backends (per-episode counters).
    TkRecord extract_tk_context(const AgentContext& ctx, GenerationBackend& gen,
                                EmbeddingBackend& embedder) const;

    void clear_memo();

private:
    TkRecord extract(const std::string& source_id, const std::string& prompt,
                     GenerationBackend& gen, EmbeddingBackend& embedder) const;

    GenerationBackend& gen_;
    EmbeddingBackend& embedder_;
    TkTemplates templates_;
    int max_tokens_;
    std::string fingerprint_;
    std::mutex memo_mutex_;
    std::unordered_map<std::string, TkRecord> memo_;
};

/// Fills the TK cache for every pool entry lacking a record under the
/// retriever's fingerprint. Records under another fingerprint are recomputed.
/// Throws EmptyPool on an empty pool and TkExtractionFailed naming the demo.
DemoPool build_pool_cache(const DemoPool& pool, TkRetriever& retriever, std::size_t workers = 1);

}  // namespace demosel
