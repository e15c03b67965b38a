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

#include "doctest.h"

#include "../common/generators.hpp"
#include "demosel/backends/hashing.hpp"
#include "demosel/backends/scripted.hpp"
#include "demosel/core/persistence.hpp"
#include "demosel/errors.hpp"
#include "demosel/retriever/tk_retriever.hpp"

using namespace demosel;
using namespace demosel::testing;

namespace {

std::vector<Trajectory> five_demos() {
    std::vector<Trajectory> out;
    for (int i = 0; i < 5; ++i) {
        out.push_back(simple_demo("question " + std::to_string(i), "Entity " + std::to_string(i), "A"));
    }
    return out;
}

}  // namespace

TEST_CASE("default templates carry the retriever instructions") {
    const auto t = default_tk_templates();
    CHECK_FALSE(t.version.empty());
    CHECK(t.demo.find("omitting all task-specific entities and answers") != std::string::npos);
    CHECK(t.context.find("Omit task-specific entities.") != std::string::npos);
}

TEST_CASE("demo extraction uses the scripted rule and is memoized") {
    ScriptedGenerator gen({{"Search fails", "on search failure, retry with a shorter entity name"}});
    HashingEmbedder emb;
    TkRetriever retriever(gen, emb);
    const auto demo = make_trajectory(
        "Q", {Step{"Search fails → try shorter query", Action("Search", "x"), "Could not find x."},
              Step{std::nullopt, Action("Finish", "y"), ""}},
        true);
    const TkRecord r = retriever.extract_tk_demo(demo);
    CHECK(r.source_id == demo.id);
    CHECK(r.tk_text == "on search failure, retry with a shorter entity name");
    CHECK(r.embedding == emb.embed_text(r.tk_text));
    CHECK(r.retriever_fingerprint == retriever.fingerprint());
    CHECK(gen.telemetry().gen_calls == 1);
    CHECK(emb.telemetry().embed_calls == 1);

    CHECK(retriever.extract_tk_demo(demo) == r);
    CHECK(gen.telemetry().gen_calls == 1);
    CHECK(emb.telemetry().embed_calls == 1);
}

TEST_CASE("textually identical demos give identical records modulo source id") {
    ScriptedGenerator gen({{"", "Use search, then finish."}});
    HashingEmbedder emb;
    TkRetriever retriever(gen, emb);
    auto a = simple_demo("same", "E", "A");
    auto b = a;
    b.id = "copy";
    auto ra = retriever.extract_tk_demo(a);
    auto rb = retriever.extract_tk_demo(b);
    CHECK(ra.source_id != rb.source_id);
    rb.source_id = ra.source_id;
    CHECK(ra == rb);
}

TEST_CASE("empty completion is retried once with the fallback instruction") {
    ScriptedGenerator gen({{std::string(kTkFallbackInstruction), "Recovered sentence."}, {"", "   "}});
    HashingEmbedder emb;
    TkRetriever retriever(gen, emb);
    const auto r = retriever.extract_tk_demo(simple_demo("Q", "E", "A"));
    CHECK(r.tk_text == "Recovered sentence.");
    CHECK(gen.telemetry().gen_calls == 2);

    ScriptedGenerator never({{"never matches this", "x"}});
    TkRetriever failing(never, emb);
    const auto demo = simple_demo("Q", "E", "A");
    try {
        (void)failing.extract_tk_demo(demo);
        FAIL("expected TkExtractionFailed");
    } catch (const TkExtractionFailed& e) {
        CHECK(e.source_id() == demo.id);
    }
    CHECK(never.telemetry().gen_calls == 2);
}

TEST_CASE("context extraction excludes the demo block") {
    ScriptedGenerator gen({{"", "Search for the entity first."}});
    HashingEmbedder emb;
    TkRetriever retriever(gen, emb);
    const auto demos = five_demos();
    AgentContext base("Who founded Zorblat Industries?", 2);
    base = context_append(base, Step{"look it up", Action("Search", "Zorblat"), "Could not find [Zorblat]."});
    const auto with_a = context_replace_demos(base, {demos[0], demos[1]});
    const auto with_b = context_replace_demos(base, {demos[3]});

    const auto prompt = render_context_prompt(retriever.templates(), with_a);
    for (const auto& d : with_a.demos()) {
        CHECK(prompt.find(d.task) == std::string::npos);
        CHECK(prompt.find(render_trajectory(d)) == std::string::npos);
    }
    CHECK(prompt.find("Question: Who founded Zorblat Industries?\n") != std::string::npos);
    CHECK(prompt.find("Observation: Could not find [Zorblat].") != std::string::npos);
    CHECK(render_context_prompt(retriever.templates(), with_b) == prompt);
    CHECK(retriever.extract_tk_context(with_a) == retriever.extract_tk_context(with_b));
}

TEST_CASE("context extraction at t = 0 reads the task alone") {
    ScriptedGenerator gen({{"Question: T\n", "Plan a direct search."}});
    HashingEmbedder emb;
    TkRetriever retriever(gen, emb);
    const AgentContext ctx("T", 2);
    const auto prompt = render_context_prompt(retriever.templates(), ctx);
    CHECK(prompt == retriever.templates().context + "\n\nQuestion: T\n");
    const auto r = retriever.extract_tk_context(ctx);
    CHECK(r.source_id == "context@0");
    CHECK(r.tk_text == "Plan a direct search.");
}

TEST_CASE("context extraction maps a failed search to a recovery tactic") {
    ScriptedGenerator gen({{"Observation: Could not find", "After a failed search, pick a name from the Similar list."},
                           {"", "Search directly."}});
    HashingEmbedder emb;
    TkRetriever retriever(gen, emb);
    auto ctx = context_append(AgentContext("Q", 2),
                              Step{std::nullopt, Action("Search", "x"), "Could not find [x]. Similar: [x y]."});
    const auto r = retriever.extract_tk_context(ctx);
    CHECK(r.tk_text.find("failed search") != std::string::npos);
    CHECK(r.source_id == "context@1");

    const auto before = gen.telemetry();
    (void)retriever.extract_tk_context(ctx);
    CHECK(gen.telemetry().gen_calls == before.gen_calls + 1);
}

TEST_CASE("tk text is capped at the last sentence boundary") {
    CHECK(cap_tk_text("  One two. Three four five.  ", 128) == "One two. Three four five.");
    CHECK(cap_tk_text("One two. Three four five six", 4) == "One two.");
    CHECK(cap_tk_text("no sentence end at all here", 3) == "no sentence end");
    CHECK(cap_tk_text(" \n ", 10).empty());
}

TEST_CASE("fingerprints cover template, retriever model and embedding model") {
    const auto t = default_tk_templates();
    auto t2 = t;
    t2.version = "other";
    const auto base = retriever_fingerprint(t, "r", "e");
    CHECK(base == retriever_fingerprint(t, "r", "e"));
    CHECK(base != retriever_fingerprint(t2, "r", "e"));
    CHECK(base != retriever_fingerprint(t, "r2", "e"));
    CHECK(base != retriever_fingerprint(t, "r", "e2"));
}

TEST_CASE("build_pool_cache costs one extraction per cold entry") {
    ScriptedGenerator gen({{"", "Search, then finish."}});
    HashingEmbedder emb;
    TkRetriever retriever(gen, emb);
    const DemoPool pool(five_demos());

    const DemoPool warm = build_pool_cache(pool, retriever, 3);
    CHECK(gen.telemetry().gen_calls == 5);
    CHECK(emb.telemetry().embed_calls == 5);
    CHECK(warm.cache_warm(retriever.fingerprint()));
    for (std::size_t i = 0; i < warm.size(); ++i) {
        CHECK(warm.cached(i)->embedding == emb.embed_text(warm.cached(i)->tk_text));
    }

    TkRetriever fresh(gen, emb);
    CHECK(build_pool_cache(warm, fresh, 2) == warm);
    CHECK(gen.telemetry().gen_calls == 5);
    CHECK(emb.telemetry().embed_calls == 5);

    auto templates = default_tk_templates();
    templates.version += "-edited";
    TkRetriever changed(gen, emb, templates);
    const DemoPool rebuilt = build_pool_cache(warm, changed, 1);
    CHECK(gen.telemetry().gen_calls == 10);
    CHECK(emb.telemetry().embed_calls == 10);
    CHECK(rebuilt.cache_warm(changed.fingerprint()));
    CHECK_FALSE(rebuilt.cache_warm(retriever.fingerprint()));
}

TEST_CASE("build_pool_cache reports the failing demo and rejects empty pools") {
    HashingEmbedder emb;
    ScriptedGenerator gen({{"question 3", ""}, {"", "Fine."}});
    TkRetriever retriever(gen, emb);
    const auto demos = five_demos();
    try {
        (void)build_pool_cache(DemoPool(demos), retriever, 4);
        FAIL("expected TkExtractionFailed");
    } catch (const TkExtractionFailed& e) {
        CHECK(e.source_id() == demos[3].id);
    }
    CHECK_THROWS_AS((void)build_pool_cache(DemoPool{}, retriever), EmptyPool);
}

TEST_CASE("template files load and validate") {
    const auto dir = temp_dir("templates");
    write_file_atomic(dir / "t.json", R"({"version": "v9", "demo": "D", "context": "C"})");
    const auto t = load_tk_templates(dir / "t.json");
    CHECK(t.version == "v9");
    CHECK(render_demo_prompt(t, simple_demo("Q", "E", "A")).rfind("D\n\nQuestion: Q\n", 0) == 0);
    write_file_atomic(dir / "bad.json", R"({"version": "v9"})");
    CHECK_THROWS_AS(load_tk_templates(dir / "bad.json"), FormatError);
}
