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

#include <cstddef>
#include <stdexcept>
#include <string>

namespace demosel {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed persisted record. `line` is 1-based, 0 when not line-oriented.
class FormatError : public Error {
public:
    FormatError(std::size_t line, const std::string& message)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + message : message),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class InvalidAction : public Error {
public:
    using Error::Error;
};

class MalformedAction : public Error {
public:
    using Error::Error;
};

class TooManyDemos : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Backend failures. Unreachable is retryable; refusal is not.
class BackendUnreachable : public Error {
public:
    using Error::Error;
};

class BackendRefusal : public Error {
public:
    using Error::Error;
};

class EmptyCompletion : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class ZeroVector : public Error {
public:
    using Error::Error;
};

class TkExtractionFailed : public Error {
public:
    TkExtractionFailed(std::string source_id, const std::string& message)
        : Error("TK extraction failed for '" + source_id + "': " + message),
          source_id_(std::move(source_id)) {}

    const std::string& source_id() const noexcept { return source_id_; }

private:
    std::string source_id_;
};

class EmptyPool : public Error {
public:
    using Error::Error;
};

class ColdCache : public Error {
public:
    using Error::Error;
};

class OverlapError : public Error {
public:
    explicit OverlapError(std::string task_id)
        : Error("evaluation task '" + task_id + "' also appears in the demo pool"),
          task_id_(std::move(task_id)) {}

    const std::string& task_id() const noexcept { return task_id_; }

private:
    std::string task_id_;
};

}  // namespace demosel
