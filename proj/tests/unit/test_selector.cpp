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
#include <set>

#include "doctest.h"

#include "../common/generators.hpp"
#include "demosel/backends/hashing.hpp"
#include "demosel/backends/scripted.hpp"
#include "demosel/errors.hpp"
#include "demosel/selector/scoring.hpp"
#include "demosel/selector/selector.hpp"

using namespace demosel;
using namespace demosel::testing;

namespace {

// Pool whose cached TK embeddings are unit vectors at the given cosines to (1, 0).
DemoPool pool_with_cosines(const std::vector<double>& cosines, const std::string& fp = "fp") {
    std::vector<Trajectory> entries;
    TkCache cache;
    for (std::size_t i = 0; i < cosines.size(); ++i) {
        auto d = simple_demo("task " + std::to_string(i), "E", "A");
        const double c = cosines[i];
        cache[d.id] = TkRecord{d.id, "tk", EmbeddingVector({c, std::sqrt(1.0 - c * c)}), fp};
        entries.push_back(std::move(d));
    }
    return DemoPool(std::move(entries), std::move(cache));
}

TkRecord query_tk(const std::string& fp = "fp") {
    return TkRecord{"context@0", "q", EmbeddingVector({1.0, 0.0}), fp};
}

SelectorConfig config(Strategy s, std::size_t m, double tau = 1.0) {
    SelectorConfig cfg;
    cfg.strategy = s;
    cfg.m = m;
    cfg.tau = tau;
    return cfg;
}

}  // namespace

TEST_CASE("cosine examples") {
    const EmbeddingVector x({0.3, -1.2, 4.0});
    CHECK(cosine(x, x) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cosine(EmbeddingVector({1.0, 0.0}), EmbeddingVector({0.0, 1.0})) == 0.0);
    // (1*1 + 1*0) / (sqrt(2) * 1)
    CHECK(cosine(EmbeddingVector({1.0, 1.0}), EmbeddingVector({1.0, 0.0})) ==
          doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-9));
    CHECK(std::fabs(cosine(EmbeddingVector({1.0, 1.0}), EmbeddingVector({1.0, 0.0})) - 0.70711) < 1e-5);
    CHECK_THROWS_AS(cosine(EmbeddingVector({1.0, 0.0}), EmbeddingVector({1.0, 0.0, 0.0})), DimensionMismatch);
    CHECK_THROWS_AS(cosine(EmbeddingVector({0.0, 0.0}), EmbeddingVector({1.0, 0.0})), ZeroVector);
}

TEST_CASE("cosine is symmetric and bounded") {
    Rng rng(2);
    for (int i = 0; i < 500; ++i) {
        const std::size_t dim = uniform_index(rng, 1, 32);
        const auto u = random_embedding(rng, dim);
        const auto v = random_embedding(rng, dim);
        const double c = cosine(u, v);
        REQUIRE(c == cosine(v, u));
        REQUIRE(c >= -1.0);
        REQUIRE(c <= 1.0);
        const double r = relevance_from_cosine(c);
        REQUIRE(r >= 0.0);
        REQUIRE(r <= 1.0);
    }
}

TEST_CASE("infonce examples") {
    const EmbeddingVector q({1.0, 0.0});
    const std::vector<EmbeddingVector> same(4, EmbeddingVector({0.6, 0.8}));
    for (double p : infonce_scores(q, same, 1.0)) {
        CHECK(p == doctest::Approx(0.25));
    }
    const std::vector<EmbeddingVector> two = {EmbeddingVector({1.0, 0.0}), EmbeddingVector({0.0, 1.0})};
    const auto p = infonce_scores(q, two, 1.0);
    // e / (e + 1) and 1 / (e + 1)
    const double e = std::exp(1.0);
    CHECK(std::fabs(p[0] - e / (e + 1.0)) < 1e-12);
    CHECK(std::fabs(p[0] - 0.73106) < 1e-5);
    CHECK(std::fabs(p[1] - 0.26894) < 1e-5);
    const std::vector<EmbeddingVector> one = {EmbeddingVector({0.2, 0.1})};
    CHECK(infonce_scores(q, one, 1.0) == std::vector<double>{1.0});
    CHECK_THROWS_AS(infonce_scores(q, {}, 1.0), Error);
    CHECK_THROWS_AS(softmax(std::vector<double>{1.0}, 0.0), Error);
}

TEST_CASE("softmax is stable and increasing in the similarity") {
    const std::vector<double> big = {1000.0, 999.0, -1000.0};
    const auto p = softmax(big, 0.01);
    CHECK(std::isfinite(p[0]));
    CHECK(p[0] > p[1]);
    CHECK(p[1] >= p[2]);
    const std::vector<double> base = {0.1, 0.3, 0.2};
    const std::vector<double> raised = {0.1, 0.35, 0.2};
    CHECK(softmax(raised, 1.0)[1] > softmax(base, 1.0)[1]);
}

TEST_CASE("normalization holds for large pools") {
    Rng rng(9);
    const auto q = random_embedding(rng, 16);
    std::vector<EmbeddingVector> cands;
    for (int i = 0; i < 10000; ++i) {
        cands.push_back(random_embedding(rng, 16));
    }
    double total = 0.0;
    for (double p : infonce_scores(q, cands, 0.1)) {
        REQUIRE(p > 0.0);
        total += p;
    }
    CHECK(std::fabs(total - 1.0) < 1e-9);
}

TEST_CASE("zero-norm candidates get similarity zero") {
    const std::vector<EmbeddingVector> cands = {EmbeddingVector({0.0, 0.0}), EmbeddingVector({1.0, 0.0})};
    const auto sims = similarities(EmbeddingVector({1.0, 0.0}), cands);
    CHECK(sims == std::vector<double>{0.0, 1.0});
}

TEST_CASE("top_m ranks descending with ascending-index ties") {
    CHECK(top_m(std::vector<double>{0.2, 0.9, 0.5}, 2) == std::vector<std::size_t>{1, 2});
    CHECK(top_m(std::vector<double>{0.5, 0.5, 0.1}, 1) == std::vector<std::size_t>{0});
    CHECK(top_m(std::vector<double>{0.1, 0.5, 0.5, 0.5}, 3) == std::vector<std::size_t>{1, 2, 3});
    CHECK(top_m(std::vector<double>{0.1, 0.7, 0.4}, 10) == std::vector<std::size_t>{1, 2, 0});
    CHECK(top_m(std::vector<double>{0.1}, 0).empty());
}

TEST_CASE("dice select examples") {
    const auto tk = query_tk();
    const auto r = select(pool_with_cosines({0.2, 0.9, 0.5}), &tk, config(Strategy::dice_stepwise, 2));
    CHECK(r.indices == std::vector<std::size_t>{1, 2});
    REQUIRE(r.relevance.size() == 3);
    CHECK(r.relevance[1] == doctest::Approx(0.95));
    CHECK(r.mean_selected_relevance().value() == doctest::Approx((0.95 + 0.75) / 2));

    const auto tie = select(pool_with_cosines({0.5, 0.5, 0.1}), &tk, config(Strategy::dice_stepwise, 1));
    CHECK(tie.indices == std::vector<std::size_t>{0});

    const auto all = select(pool_with_cosines({0.1, 0.7, 0.4}), &tk, config(Strategy::dice_taskwise, 5));
    CHECK(all.indices == std::vector<std::size_t>{1, 2, 0});

    CHECK(select(DemoPool{}, &tk, config(Strategy::dice_stepwise, 2)).indices.empty());
}

TEST_CASE("dice select refuses a cold or foreign cache") {
    const auto tk = query_tk("fp");
    std::vector<Trajectory> entries = {simple_demo("a", "E", "A")};
    CHECK_THROWS_AS(select(DemoPool(entries), &tk, config(Strategy::dice_stepwise, 1)), ColdCache);
    CHECK_THROWS_AS(select(pool_with_cosines({0.3}, "other"), &tk, config(Strategy::dice_stepwise, 1)),
                    ColdCache);
}

TEST_CASE("ranking does not depend on tau") {
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = uniform_index(rng, 1, 40);
        std::vector<EmbeddingVector> cands;
        for (std::size_t i = 0; i < n; ++i) {
            cands.push_back(random_embedding(rng, 8));
        }
        const auto q = random_embedding(rng, 8);
        const auto a = rank_candidates(q, cands, 3, 0.1);
        const auto b = rank_candidates(q, cands, 3, 1.0);
        const auto c = rank_candidates(q, cands, 3, 10.0);
        REQUIRE(a.indices == b.indices);
        REQUIRE(b.indices == c.indices);
        REQUIRE(a.relevance == c.relevance);
    }
}

TEST_CASE("duplicated candidates resolve to ascending index") {
    Rng rng(8);
    const auto v = random_embedding(rng, 12);
    const auto w = random_embedding(rng, 12);
    const std::vector<EmbeddingVector> cands = {w, v, w, v, v};
    const auto q = v;
    const auto r = rank_candidates(q, cands, 4, 1.0);
    CHECK(r.indices == std::vector<std::size_t>{1, 3, 4, 0});
    CHECK(rank_candidates(q, cands, 4, 1.0) == r);
}

TEST_CASE("random selection is seeded, uniform and without replacement") {
    const auto pool = pool_with_cosines({0.1, 0.2, 0.3, 0.4, 0.5, 0.6});
    const auto cfg = config(Strategy::random, 3);
    const auto a = select(pool, nullptr, cfg, 42);
    const auto b = select(pool, nullptr, cfg, 42);
    CHECK(a == b);
    CHECK(std::set<std::size_t>(a.indices.begin(), a.indices.end()).size() == 3);
    for (double p : a.probs) {
        CHECK(p == doctest::Approx(1.0 / 6.0));
    }
    CHECK(a.relevance.empty());
    std::set<std::vector<std::size_t>> distinct;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        distinct.insert(select(pool, nullptr, cfg, seed).indices);
    }
    CHECK(distinct.size() > 5);

    const auto tk = query_tk();
    const auto scored = select(pool, &tk, cfg, 42);
    CHECK(scored.indices == a.indices);
    CHECK(scored.relevance.size() == 6);
}

TEST_CASE("selector config validation and strategy names") {
    CHECK_THROWS_AS(config(Strategy::random, 1, 0.0).validate(), ConfigError);
    SelectorConfig bad_beta;
    bad_beta.beta = -1.0;
    CHECK_THROWS_AS(bad_beta.validate(), ConfigError);
    for (auto s : {Strategy::dice_stepwise, Strategy::dice_taskwise, Strategy::random, Strategy::knn_raw}) {
        CHECK(strategy_from_string(to_string(s)) == s);
    }
    CHECK_THROWS_AS(strategy_from_string("kate"), ConfigError);
}

TEST_CASE("knn_raw ranks raw task texts") {
    HashingEmbedder emb;
    const DemoPool pool({simple_demo("capital of france", "E", "A"), simple_demo("founder of the company", "E", "A"),
                         simple_demo("the capital city of spain", "E", "A")});
    const KnnRawIndex index(pool, emb);
    CHECK(index.candidates().size() == 3);
    CHECK(emb.telemetry().embed_calls == 1);
    const auto r = select_knn_raw(index, emb.embed_one("capital of spain"), config(Strategy::knn_raw, 1));
    CHECK(r.indices.size() == 1);
    CHECK(r.indices[0] != 1);
}

TEST_CASE("select_taskwise extracts the t = 0 context once") {
    ScriptedGenerator gen({{"Question: find X\n", "Search directly."}});
    HashingEmbedder emb;
    TkRetriever retriever(gen, emb);
    std::vector<Trajectory> demos = {simple_demo("a", "E", "A"), simple_demo("b", "E", "B")};
    TkCache cache;
    cache[demos[0].id] = TkRecord{demos[0].id, "x", emb.embed_text("two hop chaining"), retriever.fingerprint()};
    cache[demos[1].id] = TkRecord{demos[1].id, "y", emb.embed_text("search directly"), retriever.fingerprint()};
    const DemoPool pool(demos, cache);
    const auto r = select_taskwise(pool, "find X", config(Strategy::dice_taskwise, 1), retriever, gen, emb);
    CHECK(r.indices == std::vector<std::size_t>{1});
    CHECK(gen.telemetry().gen_calls == 1);
    CHECK(select_taskwise(DemoPool{}, "find X", config(Strategy::dice_taskwise, 1), retriever, gen, emb)
              .indices.empty());
}

TEST_CASE("selector bundle validation") {
    ScriptedGenerator gen({{"", "x."}});
    HashingEmbedder emb;
    TkRetriever retriever(gen, emb);
    const DemoPool cold({simple_demo("a", "E", "A")});
    SelectorBundle bundle{&cold, &retriever, nullptr, nullptr, config(Strategy::dice_stepwise, 1)};
    try {
        bundle.validate();
        FAIL("expected ColdCache");
    } catch (const ColdCache& e) {
        CHECK(std::string(e.what()) == "cold cache; run build-pool");
    }
    bundle.cfg.strategy = Strategy::knn_raw;
    CHECK_THROWS_AS(bundle.validate(), ConfigError);
    bundle.cfg.strategy = Strategy::random;
    CHECK_NOTHROW(bundle.validate());
    bundle.pool = nullptr;
    CHECK_THROWS_AS(bundle.validate(), ConfigError);
}
