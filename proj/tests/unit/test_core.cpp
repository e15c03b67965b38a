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

#include <fstream>

#include "doctest.h"

#include "../common/generators.hpp"
#include "demosel/core/persistence.hpp"
#include "demosel/errors.hpp"
#include "demosel/runtime/prompt.hpp"

using namespace demosel;
using namespace demosel::testing;

TEST_CASE("action renders and parses the bracket grammar") {
    const Action a("Search", "Richard Nixon");
    CHECK(a.render() == "Search[Richard Nixon]");
    CHECK(Action::parse("Search[Richard Nixon]") == a);
    CHECK(Action::parse("Finish[]") == Action("Finish", ""));
    CHECK(Action::parse("Lookup[a [nested b]") == Action("Lookup", "a [nested b"));
    CHECK_THROWS_AS(Action::parse("Lookup[a [nested] b"), InvalidAction);
    CHECK_THROWS_AS(Action::parse("Lookup[a]b]"), InvalidAction);
}

TEST_CASE("action constructor rejects grammar violations") {
    CHECK_THROWS_AS(Action("", "x"), InvalidAction);
    CHECK_THROWS_AS(Action("Sea[rch", "x"), InvalidAction);
    CHECK_THROWS_AS(Action("Search]", "x"), InvalidAction);
    CHECK_THROWS_AS(Action("Search", "a]b"), InvalidAction);
    CHECK_THROWS_AS(Action::parse("Search Inception"), InvalidAction);
    CHECK_THROWS_AS(Action::parse("[x]"), InvalidAction);
    CHECK_THROWS_AS(Action::parse(""), InvalidAction);
}

TEST_CASE("action round trip over generated actions") {
    Rng rng(11);
    for (int i = 0; i < 2000; ++i) {
        const Action a = random_action(rng);
        REQUIRE(Action::parse(a.render()) == a);
    }
}

TEST_CASE("trajectory ids are content hashes") {
    const auto a = simple_demo("Q", "E", "A");
    const auto b = simple_demo("Q", "E", "A");
    const auto c = simple_demo("Q", "E", "B");
    CHECK(a.id == b.id);
    CHECK(a.id != c.id);
    CHECK(a.id.size() == 16);
}

TEST_CASE("trajectory json round trip") {
    Rng rng(5);
    for (int i = 0; i < 500; ++i) {
        const Trajectory t = random_trajectory(rng);
        const Json j = Json::parse(to_json(t).dump());
        REQUIRE(trajectory_from_json(j) == t);
    }
}

TEST_CASE("validate_trajectory enforces the pool invariants") {
    const auto good = simple_demo("Q", "E", "A");
    CHECK_NOTHROW(validate_trajectory(good, true));

    auto failed = good;
    failed.success = false;
    CHECK_NOTHROW(validate_trajectory(failed, false));
    CHECK_THROWS_AS(validate_trajectory(failed, true), FormatError);

    auto no_steps = make_trajectory("Q", {}, true);
    CHECK_THROWS_AS(validate_trajectory(no_steps, true), FormatError);

    auto not_finish = make_trajectory("Q", {Step{std::nullopt, Action("Search", "x"), "obs"}}, true);
    CHECK_THROWS_AS(validate_trajectory(not_finish, true), FormatError);

    auto empty_obs = make_trajectory(
        "Q", {Step{std::nullopt, Action("Search", "x"), ""}, Step{std::nullopt, Action("Finish", "a"), ""}},
        true);
    CHECK_THROWS_AS(validate_trajectory(empty_obs, false), FormatError);

    auto bad_score = good;
    bad_score.score = 1.5;
    CHECK_THROWS_AS(validate_trajectory(bad_score, false), FormatError);
}

TEST_CASE("context_append grows the history and keeps the rest") {
    const AgentContext ctx0("Q", 2);
    CHECK(ctx0.step_index() == 0);
    const Step s1{std::nullopt, Action("Search", "x"), "obs 1"};
    const auto ctx1 = context_append(ctx0, s1);
    CHECK(ctx1.step_index() == 1);
    CHECK(ctx1.history() == std::vector<Step>{s1});
    CHECK(ctx1.task() == "Q");
    CHECK(ctx0.step_index() == 0);

    const auto ctx2 = context_append(context_append(ctx1, s1), Step{"t", Action("Lookup", "y"), "o"});
    CHECK(ctx2.step_index() == 3);
    CHECK(ctx2.history().size() == 3);
}

TEST_CASE("context survives append then serialize then parse") {
    Rng rng(3);
    AgentContext ctx("task text", 2);
    ctx = context_replace_demos(ctx, {simple_demo("Q1", "E1", "A1")});
    for (int i = 0; i < 4; ++i) {
        ctx = context_append(ctx, random_step(rng, false));
        const Json j = Json::parse(to_json(ctx).dump());
        REQUIRE(context_from_json(j) == ctx);
    }
}

TEST_CASE("context_replace_demos enforces the demo limit and ordering") {
    const AgentContext ctx("Q", 2);
    const auto d2 = simple_demo("second demo", "E2", "A2");
    const auto d7 = simple_demo("seventh demo", "E7", "A7");

    const auto empty = context_replace_demos(ctx, {});
    CHECK(empty.demos().empty());

    const auto two = context_replace_demos(ctx, {d2, d7});
    const std::string prompt = assemble_prompt(PromptLayout{}, two.demos(), two.task(), two.history());
    CHECK(prompt.find("second demo") < prompt.find("seventh demo"));
    CHECK(prompt.find("seventh demo") < prompt.find("Question: Q\n"));

    CHECK(context_replace_demos(two, {d2, d7}) == two);
    CHECK_THROWS_AS((void)context_replace_demos(ctx, {d2, d7, d2}), TooManyDemos);
}

TEST_CASE("demo pool enforces unique successful entries") {
    const auto a = simple_demo("Q1", "E", "A");
    auto failed = simple_demo("Q2", "E", "A");
    failed.success = false;
    CHECK_THROWS_AS(DemoPool({a, a}), FormatError);
    CHECK_THROWS_AS(DemoPool({a, failed}), FormatError);
    const DemoPool pool({a});
    CHECK(pool.index_of(a.id) == std::size_t{0});
    CHECK_FALSE(pool.index_of("nope").has_value());
}

TEST_CASE("pool save and load") {
    const auto dir = temp_dir("core-pool");

    SUBCASE("empty pool") {
        pool_save(DemoPool{}, dir / "empty.jsonl");
        CHECK(std::filesystem::file_size(dir / "empty.jsonl") > 0);
        CHECK(pool_load(dir / "empty.jsonl").empty());
    }

    SUBCASE("three records with a cache") {
        std::vector<Trajectory> entries = {simple_demo("Q1", "E1", "A1"), simple_demo("Q2", "E2", "A2"),
                                           simple_demo("Q3", "E3", "A3")};
        TkCache cache;
        for (const auto& e : entries) {
            cache[e.id] = TkRecord{e.id, "tk of " + e.task, EmbeddingVector({0.1, -0.2, 1.0 / 3.0}), "fp"};
        }
        const DemoPool pool(entries, cache);
        pool_save(pool, dir / "pool.jsonl");
        CHECK(std::filesystem::exists(dir / "pool.tk.jsonl"));
        const DemoPool loaded = pool_load(dir / "pool.jsonl");
        CHECK(loaded == pool);
        CHECK(loaded.cache_warm("fp"));
        CHECK_FALSE(loaded.cache_warm("other"));
    }

    SUBCASE("missing field is reported with its name and line") {
        pool_save(DemoPool({simple_demo("Q1", "E1", "A1")}), dir / "bad.jsonl");
        std::ofstream(dir / "bad.jsonl", std::ios::app)
            << R"({"id": "x", "success": true, "score": 1.0, "steps": []})" << "\n";
        try {
            (void)pool_load(dir / "bad.jsonl");
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(e.line() == 3);
            CHECK(std::string(e.what()).find("'task'") != std::string::npos);
        }
    }

    SUBCASE("pool files reject unsuccessful records, run logs keep them") {
        auto failed = simple_demo("Q1", "E1", "A1");
        failed.success = false;
        const std::vector<Trajectory> runs = {failed, simple_demo("Q2", "E2", "A2")};
        run_log_save(runs, dir / "runs.jsonl");
        CHECK(run_log_load(dir / "runs.jsonl") == runs);

        std::ofstream out(dir / "mixed.jsonl");
        out << Json{{"format", kPoolFormat}, {"version", kPoolFormatVersion}}.dump() << "\n"
            << to_json(failed).dump() << "\n";
        out.close();
        CHECK_THROWS_AS((void)pool_load(dir / "mixed.jsonl"), FormatError);
    }

    SUBCASE("missing file") {
        CHECK_THROWS_AS((void)pool_load(dir / "absent.jsonl"), IoError);
    }
}

TEST_CASE("tk cache round trip and sibling path") {
    const auto dir = temp_dir("core-cache");
    CHECK(tk_cache_path_for("/a/b/pool.jsonl") == std::filesystem::path("/a/b/pool.tk.jsonl"));
    TkCache cache;
    cache["x"] = TkRecord{"x", "text", EmbeddingVector({1.0, 2.0}), "fp1"};
    cache["y"] = TkRecord{"y", "other", EmbeddingVector({0.5, -0.5}), "fp1"};
    tk_cache_save(cache, dir / "c.jsonl");
    CHECK(tk_cache_load(dir / "c.jsonl") == cache);
}

TEST_CASE("embedding vectors reject empty and non-finite values") {
    CHECK_THROWS_AS(EmbeddingVector(std::vector<double>{}), Error);
    CHECK_THROWS_AS(EmbeddingVector({1.0, std::numeric_limits<double>::quiet_NaN()}), Error);
    CHECK(EmbeddingVector({3.0, 4.0}).norm() == doctest::Approx(5.0));
}
