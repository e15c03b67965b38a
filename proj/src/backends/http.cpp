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

#include "demosel/backends/http.hpp"

#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "demosel/errors.hpp"

namespace demosel {

namespace {

using Json = nlohmann::json;

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("endpoint URL needs a scheme: " + url);
    }
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        return {url, "/"};
    }
    return {url.substr(0, path_start), url.substr(path_start)};
}

// POSTs `body` with the retry policy and returns the parsed 2xx response.
Json post_json(const HttpEndpoint& endpoint, const RetryPolicy& retry, const Json& body) {
    const auto [origin, path] = split_url(endpoint.url);
    const std::string payload = body.dump();
    auto backoff = retry.initial_backoff;
    std::string last_error;
    const int attempts = std::max(1, retry.attempts);
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        httplib::Client client(origin);
        client.set_connection_timeout(endpoint.timeout);
        client.set_read_timeout(endpoint.timeout);
        client.set_write_timeout(endpoint.timeout);
        httplib::Headers headers;
        if (!endpoint.api_key.empty()) {
            headers.emplace("Authorization", "Bearer " + endpoint.api_key);
        }
        auto res = client.Post(path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
        } else if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
        } else if (res->status < 200 || res->status >= 300) {
            throw BackendRefusal(endpoint.url + " answered HTTP " + std::to_string(res->status) +
                                 ": " + res->body.substr(0, 200));
        } else {
            try {
                return Json::parse(res->body);
            } catch (const Json::parse_error&) {
                throw BackendRefusal(endpoint.url + " returned a non-JSON body");
            }
        }
        if (attempt < attempts) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }
    throw BackendUnreachable(endpoint.url + " unreachable after " + std::to_string(attempts) +
                             " attempts (" + last_error + ")");
}

}  // namespace

std::string api_key_from_env(const std::string& variable) {
    if (variable.empty()) {
        return {};
    }
    const char* value = std::getenv(variable.c_str());
    return value != nullptr ? std::string(value) : std::string();
}

HttpGenerator::HttpGenerator(HttpEndpoint endpoint, RetryPolicy retry)
    : endpoint_(std::move(endpoint)), retry_(retry) {
    split_url(endpoint_.url);
}

std::string HttpGenerator::do_generate(const GenRequest& request) {
    Json body = {{"model", endpoint_.model},
                 {"messages", Json::array({{{"role", "user"}, {"content", request.prompt}}})},
                 {"temperature", request.temperature},
                 {"max_tokens", request.max_tokens}};
    if (!request.stop.empty()) {
        body["stop"] = request.stop;
    }
    const Json res = post_json(endpoint_, retry_, body);
    try {
        const auto& choice = res.at("choices").at(0);
        if (choice.value("finish_reason", std::string()) == "content_filter") {
            throw BackendRefusal(endpoint_.url + " refused the request (content_filter)");
        }
        const auto& content = choice.at("message").at("content");
        return content.is_null() ? std::string() : content.get<std::string>();
    } catch (const Json::exception& e) {
        throw BackendRefusal(endpoint_.url + " returned an unexpected shape: " + e.what());
    }
}

HttpEmbedder::HttpEmbedder(HttpEndpoint endpoint, std::size_t dim, RetryPolicy retry)
    : endpoint_(std::move(endpoint)), dim_(dim), retry_(retry) {
    split_url(endpoint_.url);
    if (dim_ == 0) {
        throw ConfigError("embedding dimension must be positive");
    }
}

std::vector<EmbeddingVector> HttpEmbedder::do_embed(std::span<const std::string> texts) {
    Json body = {{"model", endpoint_.model},
                 {"input", std::vector<std::string>(texts.begin(), texts.end())}};
    const Json res = post_json(endpoint_, retry_, body);
    std::vector<EmbeddingVector> out;
    try {
        const auto& data = res.at("data");
        for (const auto& item : data) {
            out.emplace_back(item.at("embedding").get<std::vector<double>>());
        }
    } catch (const Json::exception& e) {
        throw BackendRefusal(endpoint_.url + " returned an unexpected shape: " + e.what());
    }
    for (const auto& v : out) {
        if (v.dim() != out.front().dim()) {
            throw DimensionMismatch(endpoint_.url + " returned embeddings of inconsistent size");
        }
    }
    return out;
}

}  // namespace demosel
