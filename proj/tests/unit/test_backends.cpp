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

#include <cmath>
#include <thread>

#include "doctest.h"
#include "httplib.h"

#include "../common/generators.hpp"
#include "demosel/backends/hashing.hpp"
#include "demosel/backends/http.hpp"
#include "demosel/backends/scripted.hpp"
#include "demosel/core/persistence.hpp"
#include "demosel/errors.hpp"
#include "demosel/selector/scoring.hpp"

using namespace demosel;
using namespace demosel::testing;

namespace {

GenRequest request_for(std::string prompt) { return GenRequest{std::move(prompt), 64, 0.0, {}}; }

// Local HTTP server on an ephemeral port, stopped on destruction.
class MockServer {
public:
    MockServer() = default;
    httplib::Server& server() { return server_; }
    void start() {
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    std::string url(const std::string& path) const {
        return "http://127.0.0.1:" + std::to_string(port_) + path;
    }
    ~MockServer() {
        server_.stop();
        if (thread_.joinable()) {
            thread_.join();
        }
    }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
};

}  // namespace

TEST_CASE("gen request validation") {
    CHECK_NOTHROW(request_for("x").validate());
    CHECK_THROWS_AS((GenRequest{"x", 0, 0.0, {}}.validate()), Error);
    CHECK_THROWS_AS((GenRequest{"x", 5, -0.1, {}}.validate()), Error);
    CHECK_THROWS_AS((GenRequest{"x", 5, 0.0, {"a", "b", "c", "d", "e"}}.validate()), Error);
}

TEST_CASE("apply_stops cuts at the earliest stop") {
    const std::vector<std::string> stops = {"Observation:", "\n\n"};
    CHECK(apply_stops("Action: Search[x]\nObservation: y", stops) == "Action: Search[x]\n");
    CHECK(apply_stops("a\n\nb Observation:", stops) == "a");
    CHECK(apply_stops("plain", stops) == "plain");
}

TEST_CASE("scripted backend looks up the first matching rule") {
    ScriptedGenerator gen({{"Question: Q1", "Thought: easy.\nAction: Finish[A1]"},
                           {"Question:", "Action: Search[x]"},
                           {"^Z+$", "zs", ScriptedRule::Kind::regex}});
    CHECK(gen.generate(request_for("prefix\nQuestion: Q1\n")) == "Thought: easy.\nAction: Finish[A1]");
    CHECK(gen.generate(request_for("Question: Q2")) == "Action: Search[x]");
    CHECK(gen.generate(request_for("ZZZ")) == "zs");
    CHECK_THROWS_AS(gen.generate(request_for("nothing matches")), EmptyCompletion);
    CHECK(gen.telemetry().gen_calls == 4);
}

TEST_CASE("scripted backend is deterministic and honours stops") {
    ScriptedGenerator gen({{"Q", "Action: Search[x]\nObservation: invented"}});
    GenRequest req = request_for("Q");
    req.stop = {"Observation:"};
    const auto a = gen.generate(req);
    const auto b = gen.generate(req);
    CHECK(a == b);
    CHECK(a == "Action: Search[x]\n");
}

TEST_CASE("scripted rules file loading") {
    const auto dir = temp_dir("rules");
    write_file_atomic(dir / "rules.json",
                      R"([{"match": "a", "completion": "b"}, {"match": "^c", "completion": "d", "kind": "regex"}])");
    const auto rules = load_scripted_rules(dir / "rules.json");
    REQUIRE(rules.size() == 2);
    CHECK(rules[1].kind == ScriptedRule::Kind::regex);
    CHECK(rules_fingerprint(rules) == rules_fingerprint(load_scripted_rules(dir / "rules.json")));

    write_file_atomic(dir / "bad.json", R"({"match": "a"})");
    CHECK_THROWS_AS(load_scripted_rules(dir / "bad.json"), FormatError);
    write_file_atomic(dir / "kind.json", R"([{"match": "a", "completion": "b", "kind": "glob"}])");
    CHECK_THROWS_AS(load_scripted_rules(dir / "kind.json"), FormatError);
    CHECK_THROWS_AS(load_scripted_rules(dir / "absent.json"), IoError);
}

TEST_CASE("hashing embedder is normalized and order-free") {
    HashingEmbedder emb;
    Rng rng(17);
    for (int i = 0; i < 200; ++i) {
        std::string text = random_text(rng, 80) + " word";
        const auto v = emb.embed_one(text);
        REQUIRE(v.dim() == 256);
        double sq = 0.0;
        for (double x : v.values()) {
            sq += x * x;
        }
        REQUIRE(std::fabs(std::sqrt(sq) - 1.0) < 1e-6);
    }
    CHECK(emb.embed_one("a b") == emb.embed_one("b a"));
    CHECK(emb.embed_one("Same Text") == emb.embed_one("same   text"));
    CHECK(emb.embed_one("search failure recovery") != emb.embed_one("two hop chaining"));
    CHECK(cosine(emb.embed_one("retry shorter name"), emb.embed_one("retry shorter name please")) > 0.7);
}

TEST_CASE("hashing embedder is stable across instances and depends on its seed") {
    HashingEmbedder a(64, 1);
    HashingEmbedder b(64, 1);
    HashingEmbedder c(64, 2);
    CHECK(a.embed_one("alpha beta gamma") == b.embed_one("alpha beta gamma"));
    CHECK(a.embed_one("alpha beta gamma") != c.embed_one("alpha beta gamma"));
    CHECK(a.model_name() != c.model_name());
}

TEST_CASE("embedding rejects empty and blank input") {
    HashingEmbedder emb;
    CHECK_THROWS_AS(emb.embed({}), Error);
    const std::vector<std::string> blank = {"  "};
    CHECK_THROWS_AS(emb.embed(blank), Error);
}

TEST_CASE("counting wrappers keep private counters") {
    ScriptedGenerator gen({{"", "x"}});
    HashingEmbedder emb;
    CountingGenerator g1(gen);
    CountingEmbedder e1(emb);
    (void)g1.generate(request_for("one two three"));
    (void)g1.generate(request_for("four"));
    (void)gen.telemetry();
    (void)e1.embed_one("a b");
    CHECK(g1.telemetry().gen_calls == 2);
    CHECK(g1.telemetry().tokens_in == 4);
    CHECK(g1.telemetry().tokens_out == 2);
    CHECK(gen.telemetry().gen_calls == 2);
    CHECK(e1.telemetry().embed_calls == 1);
    CHECK(emb.telemetry().embed_calls == 1);
}

TEST_CASE("telemetry counters are exact under concurrency") {
    ScriptedGenerator gen({{"", "x"}});
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t) {
        threads.emplace_back([&] {
            for (int i = 0; i < 250; ++i) {
                (void)gen.generate(request_for("p"));
            }
        });
    }
    for (auto& t : threads) {
        t.join();
    }
    CHECK(gen.telemetry().gen_calls == 2000);
    CHECK(gen.telemetry().tokens_out == 2000);
}

TEST_CASE("http generator speaks the chat-completions wire format") {
    MockServer mock;
    nlohmann::json seen;
    std::string auth;
    mock.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        seen = nlohmann::json::parse(req.body);
        auth = req.get_header_value("Authorization");
        res.set_content(R"({"choices": [{"message": {"role": "assistant", "content": "Action: Finish[A]"}}]})",
                        "application/json");
    });
    mock.start();
    HttpGenerator gen(HttpEndpoint{mock.url("/v1/chat/completions"), "m1", "k", std::chrono::seconds(5)});
    GenRequest req{"hello", 32, 0.0, {"Observation:"}};
    CHECK(gen.generate(req) == "Action: Finish[A]");
    CHECK(seen["model"] == "m1");
    CHECK(seen["messages"][0]["role"] == "user");
    CHECK(seen["messages"][0]["content"] == "hello");
    CHECK(seen["max_tokens"] == 32);
    CHECK(seen["temperature"] == 0.0);
    CHECK(seen["stop"] == nlohmann::json::array({"Observation:"}));
    CHECK(auth == "Bearer k");
    CHECK(gen.telemetry().gen_calls == 1);
}

TEST_CASE("http embedder reads data[i].embedding") {
    MockServer mock;
    mock.server().Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
        const auto body = nlohmann::json::parse(req.body);
        nlohmann::json data = nlohmann::json::array();
        for (std::size_t i = 0; i < body["input"].size(); ++i) {
            data.push_back({{"embedding", {1.0, static_cast<double>(i), 0.0}}});
        }
        res.set_content(nlohmann::json{{"data", data}}.dump(), "application/json");
    });
    mock.server().Post("/ragged", [&](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"data": [{"embedding": [1, 2]}, {"embedding": [1, 2, 3]}]})", "application/json");
    });
    mock.start();
    HttpEmbedder emb(HttpEndpoint{mock.url("/v1/embeddings"), "e", "", std::chrono::seconds(5)}, 3);
    const std::vector<std::string> texts = {"a", "b"};
    const auto out = emb.embed(texts);
    REQUIRE(out.size() == 2);
    CHECK(out[1] == EmbeddingVector({1.0, 1.0, 0.0}));

    HttpEmbedder ragged(HttpEndpoint{mock.url("/ragged"), "e", "", std::chrono::seconds(5)}, 3);
    CHECK_THROWS_AS(ragged.embed(texts), DimensionMismatch);
}

TEST_CASE("http 4xx is a refusal without retries, 5xx is retried") {
    MockServer mock;
    int refusals = 0;
    int failures = 0;
    mock.server().Post("/refuse", [&](const httplib::Request&, httplib::Response& res) {
        ++refusals;
        res.status = 400;
    });
    mock.server().Post("/flaky", [&](const httplib::Request&, httplib::Response& res) {
        if (++failures < 3) {
            res.status = 503;
            return;
        }
        res.set_content(R"({"choices": [{"message": {"content": "ok"}}]})", "application/json");
    });
    mock.start();
    const RetryPolicy fast{3, std::chrono::milliseconds(1)};
    HttpGenerator refuse(HttpEndpoint{mock.url("/refuse"), "m", "", std::chrono::seconds(5)}, fast);
    CHECK_THROWS_AS(refuse.generate(request_for("x")), BackendRefusal);
    CHECK(refusals == 1);

    HttpGenerator flaky(HttpEndpoint{mock.url("/flaky"), "m", "", std::chrono::seconds(5)}, fast);
    CHECK(flaky.generate(request_for("x")) == "ok");
    CHECK(failures == 3);
    CHECK(flaky.telemetry().gen_calls == 1);
}

TEST_CASE("unreachable endpoint fails after the configured retries") {
    httplib::Server probe;
    const int port = probe.bind_to_any_port("127.0.0.1");
    probe.stop();
    HttpGenerator gen(HttpEndpoint{"http://127.0.0.1:" + std::to_string(port) + "/v1", "m", "",
                                   std::chrono::seconds(1)},
                      RetryPolicy{2, std::chrono::milliseconds(1)});
    try {
        (void)gen.generate(request_for("x"));
        FAIL("expected BackendUnreachable");
    } catch (const BackendUnreachable& e) {
        CHECK(std::string(e.what()).find("after 2 attempts") != std::string::npos);
    }
    CHECK(gen.telemetry().gen_calls == 1);
}

TEST_CASE("endpoint URLs need a scheme and keys come from the environment") {
    CHECK_THROWS_AS(HttpGenerator(HttpEndpoint{"localhost:8000/v1", "m", "", std::chrono::seconds(1)}),
                    ConfigError);
    ::setenv("DEMOSEL_TEST_KEY", "secret", 1);
    CHECK(api_key_from_env("DEMOSEL_TEST_KEY") == "secret");
    CHECK(api_key_from_env("DEMOSEL_TEST_KEY_UNSET_123").empty());
    CHECK(api_key_from_env("").empty());
}
