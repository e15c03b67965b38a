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

#include <memory>

#include "demosel/backends/hashing.hpp"
#include "demosel/backends/scripted.hpp"
#include "demosel/env/synthetic.hpp"
#include "demosel/eval/harness.hpp"
#include "demosel/retriever/tk_retriever.hpp"

namespace demosel::testing {

/// The offline evaluation stack: synthetic suite, scripted retriever over the
/// suite's rules, hashing embedder, pattern-following solver and a warm pool.
struct SyntheticBench {
    SyntheticSuite suite;
    ScriptedGenerator retriever_gen;
    HashingEmbedder embedder;
    TkRetriever retriever;
    SyntheticSolver agent;
    DemoPool pool;

    explicit SyntheticBench(const SuiteOptions& options = {},
                            std::vector<ScriptedRule> rules = synthetic_retriever_rules())
        : suite(make_synthetic_suite(options)),
          retriever_gen(std::move(rules), "scripted-synthetic"),
          retriever(retriever_gen, embedder),
          pool(build_pool_cache(suite.pool, retriever, 4)) {}

    EvalResources resources() { return EvalResources{&pool, &retriever, &embedder, &agent}; }
    const std::vector<Task>& tasks() const { return suite.tasks(); }
    const Environment& env() const { return *suite.world; }
};

}  // namespace demosel::testing
