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

#include "demosel/core/persistence.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "demosel/errors.hpp"

namespace demosel {

namespace {

const Json& require(const Json& j, const char* field, std::size_t line) {
    if (!j.is_object()) {
        throw FormatError(line, "record is not a JSON object");
    }
    auto it = j.find(field);
    if (it == j.end()) {
        throw FormatError(line, std::string("missing field '") + field + "'");
    }
    return *it;
}

template <typename T>
T require_as(const Json& j, const char* field, std::size_t line) {
    const Json& v = require(j, field, line);
    try {
        return v.get<T>();
    } catch (const Json::exception&) {
        throw FormatError(line, std::string("field '") + field + "' has the wrong type");
    }
}

Json parse_line(const std::string& text, std::size_t line) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw FormatError(line, std::string("invalid JSON: ") + e.what());
    }
}

Step step_from_json(const Json& j, std::size_t line) {
    const Json& action = require(j, "action", line);
    std::optional<std::string> thought;
    if (auto it = j.find("thought"); it != j.end() && !it->is_null()) {
        if (!it->is_string()) {
            throw FormatError(line, "field 'thought' has the wrong type");
        }
        thought = it->get<std::string>();
    }
    try {
        return Step{std::move(thought),
                    Action(require_as<std::string>(action, "name", line),
                           require_as<std::string>(action, "arg", line)),
                    require_as<std::string>(j, "observation", line)};
    } catch (const InvalidAction& e) {
        throw FormatError(line, e.what());
    }
}

// Calls `fn(json, line_number)` for every non-blank line.
template <typename Fn>
void for_each_record(const std::filesystem::path& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        fn(parse_line(text, line), line);
    }
}

}  // namespace

Json to_json(const Action& action) { return {{"name", action.name()}, {"arg", action.argument()}}; }

Json to_json(const Step& step) {
    Json j;
    j["thought"] = step.thought ? Json(*step.thought) : Json(nullptr);
    j["action"] = to_json(step.action);
    j["observation"] = step.observation;
    return j;
}

Json to_json(const Trajectory& t) {
    Json steps = Json::array();
    for (const auto& s : t.steps) {
        steps.push_back(to_json(s));
    }
    return {{"id", t.id}, {"task", t.task}, {"success", t.success}, {"score", t.score},
            {"steps", std::move(steps)}};
}

Json to_json(const EmbeddingVector& embedding) {
    return Json(std::vector<double>(embedding.values().begin(), embedding.values().end()));
}

Json to_json(const TkRecord& r) {
    return {{"id", r.source_id},
            {"tk_text", r.tk_text},
            {"embedding", to_json(r.embedding)},
            {"retriever_fingerprint", r.retriever_fingerprint}};
}

Json to_json(const AgentContext& ctx) {
    Json demos = Json::array();
    for (const auto& d : ctx.demos()) {
        demos.push_back(to_json(d));
    }
    Json history = Json::array();
    for (const auto& s : ctx.history()) {
        history.push_back(to_json(s));
    }
    return {{"task", ctx.task()},
            {"max_demos", ctx.max_demos()},
            {"demos", std::move(demos)},
            {"history", std::move(history)},
            {"step_index", ctx.step_index()}};
}

Trajectory trajectory_from_json(const Json& j, std::size_t line) {
    Trajectory t;
    t.id = require_as<std::string>(j, "id", line);
    t.task = require_as<std::string>(j, "task", line);
    t.success = require_as<bool>(j, "success", line);
    t.score = require_as<double>(j, "score", line);
    const Json& steps = require(j, "steps", line);
    if (!steps.is_array()) {
        throw FormatError(line, "field 'steps' has the wrong type");
    }
    for (const auto& s : steps) {
        t.steps.push_back(step_from_json(s, line));
    }
    return t;
}

TkRecord tk_record_from_json(const Json& j, std::size_t line) {
    TkRecord r;
    r.source_id = require_as<std::string>(j, "id", line);
    r.tk_text = require_as<std::string>(j, "tk_text", line);
    try {
        r.embedding = EmbeddingVector(require_as<std::vector<double>>(j, "embedding", line));
    } catch (const FormatError&) {
        throw;
    } catch (const Error& e) {
        throw FormatError(line, std::string("bad embedding: ") + e.what());
    }
    r.retriever_fingerprint = require_as<std::string>(j, "retriever_fingerprint", line);
    if (r.tk_text.empty()) {
        throw FormatError(line, "field 'tk_text' is empty");
    }
    return r;
}

AgentContext context_from_json(const Json& j) {
    std::vector<Trajectory> demos;
    for (const auto& d : require(j, "demos", 0)) {
        demos.push_back(trajectory_from_json(d));
    }
    std::vector<Step> history;
    for (const auto& s : require(j, "history", 0)) {
        history.push_back(step_from_json(s, 0));
    }
    if (auto it = j.find("step_index"); it != j.end() && it->get<std::size_t>() != history.size()) {
        throw FormatError(0, "step_index does not match the history length");
    }
    try {
        return context_from_parts(require_as<std::string>(j, "task", 0),
                                  require_as<std::size_t>(j, "max_demos", 0), std::move(demos),
                                  std::move(history));
    } catch (const TooManyDemos& e) {
        throw FormatError(0, e.what());
    }
}

std::filesystem::path tk_cache_path_for(const std::filesystem::path& pool_path) {
    auto out = pool_path;
    out.replace_extension();
    out += ".tk.jsonl";
    return out;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot write " + tmp.string());
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out.flush()) {
            throw IoError("write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw IoError("cannot rename into " + path.string() + ": " + ec.message());
    }
}

FileLock::FileLock(const std::filesystem::path& path) {
    auto lock_path = path;
    lock_path += ".lock";
    if (lock_path.has_parent_path()) {
        std::filesystem::create_directories(lock_path.parent_path());
    }
    fd_ = ::open(lock_path.c_str(), O_CREAT | O_RDWR, 0644);
    if (fd_ < 0 || ::flock(fd_, LOCK_EX) != 0) {
        if (fd_ >= 0) {
            ::close(fd_);
        }
        throw IoError("cannot lock " + lock_path.string());
    }
}

FileLock::~FileLock() {
    if (fd_ >= 0) {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
}

void tk_cache_save(const TkCache& cache, const std::filesystem::path& path) {
    std::string out;
    for (const auto& [id, record] : cache) {
        out += to_json(record).dump() + "\n";
    }
    FileLock lock(path);
    write_file_atomic(path, out);
}

TkCache tk_cache_load(const std::filesystem::path& path) {
    TkCache cache;
    for_each_record(path, [&](const Json& j, std::size_t line) {
        auto r = tk_record_from_json(j, line);
        auto id = r.source_id;
        cache.insert_or_assign(std::move(id), std::move(r));
    });
    return cache;
}

void pool_save(const DemoPool& pool, const std::filesystem::path& path,
               std::optional<std::filesystem::path> cache_path) {
    Json header = {{"format", kPoolFormat}, {"version", kPoolFormatVersion},
                   {"records", pool.size()}};
    std::string out = header.dump() + "\n";
    for (const auto& t : pool.entries()) {
        out += to_json(t).dump() + "\n";
    }
    {
        FileLock lock(path);
        write_file_atomic(path, out);
    }
    auto cp = cache_path.value_or(tk_cache_path_for(path));
    if (!pool.tk_cache().empty()) {
        tk_cache_save(pool.tk_cache(), cp);
    } else {
        std::error_code ec;
        std::filesystem::remove(cp, ec);
    }
}

DemoPool pool_load(const std::filesystem::path& path,
                   std::optional<std::filesystem::path> cache_path) {
    std::vector<Trajectory> entries;
    bool header_seen = false;
    for_each_record(path, [&](const Json& j, std::size_t line) {
        if (!header_seen) {
            if (!j.is_object() || j.value("format", "") != kPoolFormat) {
                throw FormatError(line, "missing pool header; is this a raw run log?");
            }
            if (j.value("version", 0) != kPoolFormatVersion) {
                throw FormatError(line, "unsupported pool format version");
            }
            header_seen = true;
            return;
        }
        auto t = trajectory_from_json(j, line);
        try {
            validate_trajectory(t, /*for_pool=*/true);
        } catch (const FormatError& e) {
            throw FormatError(line, e.what());
        }
        entries.push_back(std::move(t));
    });
    if (!header_seen) {
        throw FormatError(1, "empty file has no pool header");
    }
    TkCache cache;
    auto cp = cache_path.value_or(tk_cache_path_for(path));
    if (std::filesystem::exists(cp)) {
        cache = tk_cache_load(cp);
        std::erase_if(cache, [&](const auto& kv) {
            return std::none_of(entries.begin(), entries.end(),
                                [&](const Trajectory& t) { return t.id == kv.first; });
        });
    }
    try {
        return DemoPool(std::move(entries), std::move(cache));
    } catch (const FormatError& e) {
        throw FormatError(0, path.string() + ": " + e.what());
    }
}

std::vector<Trajectory> run_log_load(const std::filesystem::path& path) {
    std::vector<Trajectory> runs;
    for_each_record(path, [&](const Json& j, std::size_t line) {
        if (j.is_object() && j.contains("format")) {
            return;
        }
        auto t = trajectory_from_json(j, line);
        try {
            validate_trajectory(t, /*for_pool=*/false);
        } catch (const FormatError& e) {
            throw FormatError(line, e.what());
        }
        runs.push_back(std::move(t));
    });
    return runs;
}

void run_log_save(std::span<const Trajectory> runs, const std::filesystem::path& path) {
    std::string out;
    for (const auto& t : runs) {
        out += to_json(t).dump() + "\n";
    }
    write_file_atomic(path, out);
}

}  // namespace demosel
