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

#include "demosel/cli/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "demosel/core/hash.hpp"
#include "demosel/core/persistence.hpp"
#include "demosel/errors.hpp"
#include "demosel/eval/harness.hpp"

namespace demosel {

const std::vector<ConfigKey>& config_schema() {
    static const std::vector<ConfigKey> schema = {
        {"backend.kind", "scripted", "scripted (offline) or http"},
        {"agent.kind", "auto", "auto, solver, scripted or http"},
        {"retriever.kind", "auto", "auto, scripted or http"},
        {"embed.kind", "auto", "auto, hashing or http"},
        {"gen.endpoint_url", "http://localhost:8000/v1/chat/completions", "chat-completions URL"},
        {"gen.model", "gpt-3.5-turbo", "agent model name"},
        {"gen.api_key_env", "OPENAI_API_KEY", "environment variable holding the API key"},
        {"gen.rules_path", "", "rule table for a scripted agent"},
        {"gen.max_tokens", "256", "agent completion budget"},
        {"gen.temperature", "0", "agent sampling temperature"},
        {"gen.retries", "3", "attempts per HTTP request"},
        {"gen.backoff_ms", "500", "initial retry backoff"},
        {"gen.timeout_s", "60", "HTTP timeout"},
        {"retriever.endpoint_url", "", "defaults to gen.endpoint_url"},
        {"retriever.model", "", "defaults to gen.model"},
        {"retriever.template_path", "", "JSON file with TK prompt templates"},
        {"retriever.rules_path", "", "rule table for a scripted retriever"},
        {"retriever.max_tokens", "128", "TK completion budget"},
        {"embed.endpoint_url", "http://localhost:8000/v1/embeddings", "embeddings URL"},
        {"embed.model", "text-embedding-3-small", "embedding model name"},
        {"embed.dim", "256", "embedding dimension"},
        {"embed.seed", "0", "hashing embedder seed"},
        {"selector.strategy", "dice_stepwise", "dice_stepwise, dice_taskwise, random or knn_raw"},
        {"selector.m", "2", "demos per prompt"},
        {"selector.tau", "1", "InfoNCE temperature"},
        {"selector.beta", "1", "information-bottleneck weight (recorded only)"},
        {"selector.seed", "7", "seed for random selection"},
        {"env.kind", "synthetic", "synthetic or world"},
        {"env.world_path", "", "world document for env.kind = world"},
        {"env.n_tasks", "30", "synthetic evaluation tasks"},
        {"env.n_pool", "20", "synthetic pool demos"},
        {"env.pattern_mix", "search_recovery:0.5,two_hop:0.5", "synthetic pattern weights"},
        {"env.seed", "7", "synthetic suite seed"},
        {"env.variant", "qa", "qa or shop"},
        {"runtime.max_steps", "8", "step limit per episode"},
        {"runtime.workers", "4", "parallel episodes"},
        {"runtime.seed", "7", "run seed; episode seeds derive from it"},
        {"runtime.max_prompt_chars", "60000", "prompt size limit"},
        {"paths.pool", "", "pool file"},
        {"paths.tk_cache", "", "TK cache file; defaults next to the pool"},
        {"paths.out_dir", "out", "output directory"},
        {"eval.strategies", "random,knn_raw,dice_taskwise,dice_stepwise", "strategies to compare"},
        {"eval.bucket_edges", "0,0.25,0.5,0.75,1", "relevance bucket edges"},
        {"eval.sweep_m", "0,1,2,3,4,6", "demo counts for the sweep"},
        {"eval.low_quality_threshold", "0.5", "relevance cutoff for the stress test"},
    };
    return schema;
}

bool is_config_key(std::string_view key) {
    const auto& s = config_schema();
    return std::any_of(s.begin(), s.end(), [&](const ConfigKey& k) { return k.key == key; });
}

std::string env_var_for(std::string_view key) {
    std::string out = "DEMOSEL_";
    for (char c : key) {
        out.push_back(c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
    return out;
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

void check_key(const std::string& key, std::string_view origin) {
    if (is_config_key(key)) {
        return;
    }
    if (key.find("api_key") != std::string::npos) {
        throw ConfigError(std::string(origin) + ": '" + key +
                          "' is not allowed; API keys are read from the environment variable "
                          "named by gen.api_key_env");
    }
    throw ConfigError(std::string(origin) + ": unknown key '" + key + "'");
}

}  // namespace

ConfigTree parse_config_text(std::string_view text, std::string_view origin) {
    ConfigTree tree;
    std::string section;
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) {
            continue;
        }
        const std::string where = std::string(origin) + " line " + std::to_string(line_no);
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError(where + ": unterminated section header");
            }
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(where + ": expected key = value");
        }
        std::string key = trim(std::string_view(line).substr(0, eq));
        if (!section.empty()) {
            key = section + "." + key;
        }
        check_key(key, where);
        tree[key] = trim(std::string_view(line).substr(eq + 1));
    }
    return tree;
}

ConfigTree load_config_file(const std::filesystem::path& path) {
    return parse_config_text(read_file(path), path.string());
}

EnvLookup process_env() {
    return [](const std::string& name) -> std::optional<std::string> {
        const char* v = std::getenv(name.c_str());
        if (v == nullptr) {
            return std::nullopt;
        }
        return std::string(v);
    };
}

ConfigTree merge_config(const ConfigSources& sources) {
    ConfigTree tree;
    for (const auto& k : config_schema()) {
        tree[std::string(k.key)] = std::string(k.default_value);
    }
    if (sources.file) {
        for (auto& [k, v] : load_config_file(*sources.file)) {
            tree[k] = v;
        }
    }
    if (sources.env) {
        for (const auto& k : config_schema()) {
            if (auto v = sources.env(env_var_for(k.key))) {
                tree[std::string(k.key)] = *v;
            }
        }
    }
    for (const auto& [k, v] : sources.overrides) {
        check_key(k, "command line");
        tree[k] = v;
    }
    return tree;
}

namespace {

class Reader {
public:
    explicit Reader(const ConfigTree& tree) : tree_(tree) {}

    const std::string& str(const std::string& key) const { return tree_.at(key); }

    std::uint64_t uint(const std::string& key) const {
        const auto& v = str(key);
        if (v.empty() || !std::all_of(v.begin(), v.end(), [](unsigned char c) { return std::isdigit(c); })) {
            throw ConfigError(key + " must be a non-negative integer, got '" + v + "'");
        }
        try {
            return std::stoull(v);
        } catch (const std::out_of_range&) {
            throw ConfigError(key + " is out of range");
        }
    }

    int small_int(const std::string& key, std::uint64_t lo, std::uint64_t hi) const {
        const auto v = uint(key);
        if (v < lo || v > hi) {
            throw ConfigError(key + " must be between " + std::to_string(lo) + " and " + std::to_string(hi));
        }
        return static_cast<int>(v);
    }

    double real(const std::string& key) const { return parse_real(key, str(key)); }

    std::string choice(const std::string& key, std::initializer_list<std::string_view> options) const {
        const auto& v = str(key);
        for (auto o : options) {
            if (v == o) {
                return v;
            }
        }
        std::string list;
        for (auto o : options) {
            list += (list.empty() ? "" : ", ") + std::string(o);
        }
        throw ConfigError(key + " must be one of " + list + ", got '" + v + "'");
    }

    std::vector<std::string> list(const std::string& key) const {
        std::vector<std::string> out;
        std::stringstream ss(str(key));
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (!item.empty()) {
                out.push_back(item);
            }
        }
        return out;
    }

    static double parse_real(const std::string& key, const std::string& v) {
        try {
            std::size_t used = 0;
            const double d = std::stod(v, &used);
            if (used != v.size() || !std::isfinite(d)) {
                throw std::invalid_argument(v);
            }
            return d;
        } catch (const std::logic_error&) {
            throw ConfigError(key + " must be a number, got '" + v + "'");
        }
    }

private:
    const ConfigTree& tree_;
};

void require_file(const std::string& key, const std::string& path) {
    if (!path.empty() && !std::filesystem::exists(path)) {
        throw ConfigError(key + " refers to a missing file: " + path);
    }
}

}  // namespace

RunConfig resolve_config(const ConfigTree& tree) {
    for (const auto& [k, v] : tree) {
        check_key(k, "config");
    }
    ConfigTree full;
    for (const auto& k : config_schema()) {
        full[std::string(k.key)] = std::string(k.default_value);
    }
    for (const auto& [k, v] : tree) {
        full[k] = v;
    }
    const Reader r(full);
    RunConfig c;
    c.values = full;

    c.backend_kind = r.choice("backend.kind", {"scripted", "http"});
    c.agent_kind = r.choice("agent.kind", {"auto", "solver", "scripted", "http"});
    c.retriever_kind = r.choice("retriever.kind", {"auto", "scripted", "http"});
    c.embed_kind = r.choice("embed.kind", {"auto", "hashing", "http"});

    c.gen.endpoint_url = r.str("gen.endpoint_url");
    c.gen.model = r.str("gen.model");
    c.gen.api_key_env = r.str("gen.api_key_env");
    c.gen.rules_path = r.str("gen.rules_path");
    c.gen.max_tokens = r.small_int("gen.max_tokens", 1, 1 << 20);
    c.gen.temperature = r.real("gen.temperature");
    c.gen.retries = r.small_int("gen.retries", 1, 100);
    c.gen.backoff_ms = r.small_int("gen.backoff_ms", 0, 600000);
    c.gen.timeout_s = r.small_int("gen.timeout_s", 1, 3600);
    if (c.gen.temperature < 0.0) {
        throw ConfigError("gen.temperature must be non-negative");
    }

    c.retriever = c.gen;
    if (!r.str("retriever.endpoint_url").empty()) {
        c.retriever.endpoint_url = r.str("retriever.endpoint_url");
    }
    if (!r.str("retriever.model").empty()) {
        c.retriever.model = r.str("retriever.model");
    }
    c.retriever.rules_path = r.str("retriever.rules_path");
    c.retriever.max_tokens = r.small_int("retriever.max_tokens", 1, 1 << 20);
    c.template_path = r.str("retriever.template_path");

    c.embed = c.gen;
    c.embed.endpoint_url = r.str("embed.endpoint_url");
    c.embed.model = r.str("embed.model");
    c.embed_dim = r.uint("embed.dim");
    c.embed_seed = r.uint("embed.seed");
    if (c.embed_dim == 0) {
        throw ConfigError("embed.dim must be positive");
    }

    c.selector.strategy = strategy_from_string(r.str("selector.strategy"));
    c.selector.m = r.uint("selector.m");
    c.selector.tau = r.real("selector.tau");
    c.selector.beta = r.real("selector.beta");
    c.selector.seed = r.uint("selector.seed");
    c.selector.validate();

    c.env_kind = r.choice("env.kind", {"synthetic", "world"});
    c.world_path = r.str("env.world_path");
    c.suite.n_tasks = r.uint("env.n_tasks");
    c.suite.n_pool = r.uint("env.n_pool");
    c.suite.mix = parse_pattern_mix(r.str("env.pattern_mix"));
    c.suite.seed = r.uint("env.seed");
    c.suite.variant = variant_from_string(r.str("env.variant"));
    if (c.env_kind == "world" && c.world_path.empty()) {
        throw ConfigError("env.kind = world needs env.world_path");
    }

    c.max_steps = r.uint("runtime.max_steps");
    c.workers = r.uint("runtime.workers");
    c.seed = r.uint("runtime.seed");
    c.max_prompt_chars = r.uint("runtime.max_prompt_chars");
    if (c.max_steps == 0) {
        throw ConfigError("runtime.max_steps must be positive");
    }
    if (c.workers == 0) {
        throw ConfigError("runtime.workers must be positive");
    }

    c.pool_path = r.str("paths.pool");
    c.tk_cache_path = r.str("paths.tk_cache");
    c.out_dir = r.str("paths.out_dir");
    if (c.out_dir.empty()) {
        throw ConfigError("paths.out_dir must not be empty");
    }

    for (const auto& s : r.list("eval.strategies")) {
        const Strategy st = strategy_from_string(s);
        if (std::find(c.strategies.begin(), c.strategies.end(), st) != c.strategies.end()) {
            throw ConfigError("eval.strategies lists " + s + " twice");
        }
        c.strategies.push_back(st);
    }
    if (c.strategies.empty()) {
        throw ConfigError("eval.strategies is empty");
    }
    for (const auto& e : r.list("eval.bucket_edges")) {
        c.bucket_edges.push_back(Reader::parse_real("eval.bucket_edges", e));
    }
    validate_bucket_edges(c.bucket_edges);
    for (const auto& m : r.list("eval.sweep_m")) {
        if (m.empty() || !std::all_of(m.begin(), m.end(), [](unsigned char ch) { return std::isdigit(ch); })) {
            throw ConfigError("eval.sweep_m entries must be non-negative integers, got '" + m + "'");
        }
        c.sweep_m.push_back(std::stoull(m));
    }
    c.low_quality_threshold = r.real("eval.low_quality_threshold");
    if (c.low_quality_threshold < 0.0) {
        throw ConfigError("eval.low_quality_threshold must be non-negative");
    }

    require_file("env.world_path", c.env_kind == "world" ? c.world_path : "");
    require_file("gen.rules_path", c.gen.rules_path);
    require_file("retriever.rules_path", c.retriever.rules_path);
    require_file("retriever.template_path", c.template_path);
    return c;
}

std::string RunConfig::fingerprint() const {
    std::string canonical;
    for (const auto& [k, v] : values) {
        if (k == "paths.out_dir" || k == "runtime.workers") {
            continue;
        }
        canonical += k + "=" + v + "\n";
    }
    return hash_hex(canonical);
}

std::string RunConfig::echo() const {
    std::string out;
    for (const auto& [k, v] : values) {
        out += k + " = " + v + "\n";
    }
    return out;
}

}  // namespace demosel
