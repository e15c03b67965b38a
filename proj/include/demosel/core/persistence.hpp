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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "demosel/core/model.hpp"

namespace demosel {

using Json = nlohmann::json;

/// First line of every pool file; raw run logs carry no header.
inline constexpr std::string_view kPoolFormat = "demosel.pool";
inline constexpr int kPoolFormatVersion = 1;

Json to_json(const Action& action);
Json to_json(const Step& step);
Json to_json(const Trajectory& trajectory);
Json to_json(const EmbeddingVector& embedding);
Json to_json(const TkRecord& record);
Json to_json(const AgentContext& ctx);

// `line` is used only for error messages; FormatError names the missing field.
Trajectory trajectory_from_json(const Json& j, std::size_t line = 0);
TkRecord tk_record_from_json(const Json& j, std::size_t line = 0);
AgentContext context_from_json(const Json& j);

/// Default location of the TK cache that accompanies a pool file:
/// `pool.jsonl` -> `pool.tk.jsonl`.
std::filesystem::path tk_cache_path_for(const std::filesystem::path& pool_path);

/// Writes the pool (header + one trajectory per line) and, when the pool has a
/// cache, the sibling TK cache file. Both writes are atomic.
void pool_save(const DemoPool& pool, const std::filesystem::path& path,
               std::optional<std::filesystem::path> cache_path = std::nullopt);

/// Loads a pool file, rejecting unsuccessful records. The cache file is read
/// when it exists. Throws IoError or FormatError.
DemoPool pool_load(const std::filesystem::path& path,
                   std::optional<std::filesystem::path> cache_path = std::nullopt);

void tk_cache_save(const TkCache& cache, const std::filesystem::path& path);
TkCache tk_cache_load(const std::filesystem::path& path);

/// Raw run logs: trajectories of any outcome, one per line, no header.
std::vector<Trajectory> run_log_load(const std::filesystem::path& path);
void run_log_save(std::span<const Trajectory> runs, const std::filesystem::path& path);

/// Reads a whole file. Throws IoError.
std::string read_file(const std::filesystem::path& path);

/// Writes via a temp file and rename, so readers never see partial output.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Advisory exclusive lock on `<path>.lock`, held for the object's lifetime.
class FileLock {
public:
    explicit FileLock(const std::filesystem::path& path);
    ~FileLock();
    FileLock(const FileLock&) = delete;
    FileLock& operator=(const FileLock&) = delete;

private:
    int fd_ = -1;
};

}  // namespace demosel
