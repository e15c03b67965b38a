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
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "demosel/env/synthetic.hpp"
#include "demosel/selector/selector.hpp"

namespace demosel {

/// Flat view of the configuration tree: dotted key -> value text.
using ConfigTree = std::map<std::string, std::string>;

struct ConfigKey {
    std::string_view key;
    std::string_view default_value;
    std::string_view help;
};

/// Every recognised key with its default.
const std::vector<ConfigKey>& config_schema();
bool is_config_key(std::string_view key);

/// DEMOSEL_ + key upper-cased with '.' -> '_', e.g. DEMOSEL_SELECTOR_M.
std::string env_var_for(std::string_view key);

/// Parses `key = value` lines; `[section]` lines prefix the following keys
/// with "section."; '#' starts a comment. Unknown keys are rejected.
ConfigTree parse_config_text(std::string_view text, std::string_view origin = "config");
ConfigTree load_config_file(const std::filesystem::path& path);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

struct ConfigSources {
    std::optional<std::filesystem::path> file;
    ConfigTree overrides;  // from command-line flags
    EnvLookup env = process_env();
};

/// defaults < file < environment < flags.
ConfigTree merge_config(const ConfigSources& sources);

struct HttpSettings {
    std::string endpoint_url;
    std::string model;
    std::string api_key_env;
    std::string rules_path;
    int max_tokens = 256;
    double temperature = 0.0;
    int retries = 3;
    int backoff_ms = 500;
    int timeout_s = 60;
};

struct RunConfig {
    ConfigTree values;

    std::string backend_kind;
    std::string agent_kind;
    std::string retriever_kind;
    std::string embed_kind;
    HttpSettings gen;
    HttpSettings retriever;
    std::string template_path;
    HttpSettings embed;
    std::size_t embed_dim = 256;
    std::uint64_t embed_seed = 0;

    SelectorConfig selector;

    std::string env_kind;
    std::string world_path;
    SuiteOptions suite;

    std::size_t max_steps = 8;
    std::size_t workers = 4;
    std::uint64_t seed = 7;
    std::size_t max_prompt_chars = 60000;

    std::string pool_path;
    std::string tk_cache_path;
    std::string out_dir;

    std::vector<Strategy> strategies;
    std::vector<double> bucket_edges;
    std::vector<std::size_t> sweep_m;
    double low_quality_threshold = 0.5;

    /// Hash of every setting that can change results (everything except
    /// paths.out_dir and runtime.workers).
    std::string fingerprint() const;

    /// Sorted `key = value` lines.
    std::string echo() const;
};

/// Typed view of a merged tree. Throws ConfigError on bad values and when a
/// referenced input file does not exist.
RunConfig resolve_config(const ConfigTree& tree);

}  // namespace demosel
