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

#include "demosel/runtime/episode.hpp"

#include <spdlog/spdlog.h>

#include "demosel/core/persistence.hpp"
#include "demosel/errors.hpp"

namespace demosel {

std::string_view to_string(Termination t) noexcept {
    switch (t) {
    case Termination::finished:
        return "finished";
    case Termination::step_limit:
        return "step_limit";
    case Termination::parse_failures:
        return "parse_failures";
    case Termination::backend_error:
        return "backend_error";
    }
    return "unknown";
}

std::size_t EpisodeResult::selection_events() const {
    std::size_t n = 0;
    for (const auto& e : trace) {
        n += e.selection.has_value() ? 1 : 0;
    }
    return n;
}

std::optional<double> EpisodeResult::mean_relevance() const {
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& e : trace) {
        if (!e.selection) {
            continue;
        }
        if (auto r = e.selection->mean_selected_relevance()) {
            total += *r;
            ++n;
        }
    }
    if (n == 0) {
        return std::nullopt;
    }
    return total / static_cast<double>(n);
}

namespace {

// First non-blank line of a bad completion, made safe for Action's grammar.
std::string sanitize_for_argument(std::string_view completion) {
    std::string line;
    for (char c : completion) {
        if (c == '\n') {
            if (line.find_first_not_of(" \t\r") != std::string::npos) {
                break;
            }
            line.clear();
            continue;
        }
        if (c != '[' && c != ']' && c != '\r') {
            line.push_back(c);
        }
    }
    if (line.size() > 200) {
        line.resize(200);
    }
    return line;
}

}  // namespace

EpisodeResult run_episode(const Task& task, EnvSession& env, GenerationBackend& agent,
                          EpisodeSelector& selector, const RuntimeConfig& cfg) {
    EpisodeResult result;
    result.task_id = task.id;
    CountingGenerator agent_calls(agent);
    AgentContext ctx(task.question, cfg.max_demos);
    std::size_t consecutive_failures = 0;
    bool terminated = false;

    auto abort_with = [&](const Error& e) {
        result.termination = Termination::backend_error;
        result.error = e.what();
        terminated = true;
    };

    for (std::size_t t = 0; t < cfg.max_steps && !terminated; ++t) {
        std::optional<SelectionResult> selection;
        try {
            selection = selector.on_step(ctx);
        } catch (const BackendUnreachable& e) {
            abort_with(e);
            break;
        } catch (const BackendRefusal& e) {
            abort_with(e);
            break;
        } catch (const TkExtractionFailed& e) {
            spdlog::warn("task {} step {}: {}; keeping the previous demos", task.id, t, e.what());
        }
        if (selection) {
            std::vector<Trajectory> demos;
            demos.reserve(selection->indices.size());
            for (std::size_t i : selection->indices) {
                demos.push_back(selector.pool()[i]);
            }
            ctx = context_replace_demos(ctx, std::move(demos));
        }

        const std::string prompt =
            assemble_prompt(cfg.layout, ctx.demos(), ctx.task(), ctx.history());
        std::string completion;
        bool empty_completion = false;
        try {
            completion = agent_calls.generate(
                GenRequest{prompt, cfg.max_tokens, cfg.temperature, cfg.stop});
        } catch (const BackendUnreachable& e) {
            abort_with(e);
            break;
        } catch (const BackendRefusal& e) {
            abort_with(e);
            break;
        } catch (const EmptyCompletion&) {
            empty_completion = true;
        }

        std::optional<ParsedAction> parsed;
        if (!empty_completion) {
            try {
                parsed = parse_action(completion);
            } catch (const MalformedAction&) {
            }
        }
        if (!parsed) {
            Step step{std::nullopt, Action("Invalid", sanitize_for_argument(completion)),
                      std::string(kInvalidActionObservation)};
            ctx = context_append(ctx, step);
            result.trace.push_back(TraceEntry{std::move(selection), std::move(step)});
            if (++consecutive_failures >= cfg.max_parse_failures) {
                result.termination = Termination::parse_failures;
                terminated = true;
            }
            continue;
        }
        consecutive_failures = 0;

        const EnvObservation obs = env.step(parsed->action);
        Step step{std::move(parsed->thought), parsed->action, obs.text};
        ctx = context_append(ctx, step);
        result.trace.push_back(TraceEntry{std::move(selection), std::move(step)});
        if (obs.done) {
            result.termination = Termination::finished;
            result.outcome.answer = parsed->action.argument();
            result.outcome.score = obs.reward;
            result.outcome.success = obs.reward >= 1.0;
            terminated = true;
        }
    }
    if (!terminated) {
        result.termination = Termination::step_limit;
    }
    result.telemetry.agent = agent_calls.telemetry();
    result.telemetry.selection = selector.telemetry();
    return result;
}

namespace {

Json telemetry_json(const CallTelemetry& t) {
    return {{"gen_calls", t.gen_calls},
            {"embed_calls", t.embed_calls},
            {"tokens_in", t.tokens_in},
            {"tokens_out", t.tokens_out}};
}

}  // namespace

std::string episode_trace_jsonl(const EpisodeResult& result) {
    std::string out;
    for (std::size_t i = 0; i < result.trace.size(); ++i) {
        const auto& e = result.trace[i];
        Json rec;
        rec["task_id"] = result.task_id;
        rec["step"] = i;
        if (e.selection) {
            std::vector<double> relevance;
            if (!e.selection->relevance.empty()) {
                for (std::size_t idx : e.selection->indices) {
                    relevance.push_back(e.selection->relevance.at(idx));
                }
            }
            rec["selection"] = {{"indices", e.selection->indices}, {"relevance", relevance}};
        } else {
            rec["selection"] = nullptr;
        }
        rec["thought"] = e.step.thought ? Json(*e.step.thought) : Json(nullptr);
        rec["action"] = to_json(e.step.action);
        rec["observation"] = e.step.observation;
        out += rec.dump() + "\n";
    }
    Json footer;
    footer["task_id"] = result.task_id;
    footer["outcome"] = {{"answer", result.outcome.answer ? Json(*result.outcome.answer) : Json()},
                         {"success", result.outcome.success},
                         {"score", result.outcome.score}};
    footer["termination"] = to_string(result.termination);
    footer["telemetry"] = {{"agent", telemetry_json(result.telemetry.agent)},
                           {"selection", telemetry_json(result.telemetry.selection)}};
    if (!result.error.empty()) {
        footer["error"] = result.error;
    }
    out += footer.dump() + "\n";
    return out;
}

}  // namespace demosel
