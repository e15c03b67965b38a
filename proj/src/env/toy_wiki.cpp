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

#include "demosel/env/toy_wiki.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <set>

#include "demosel/backends/hashing.hpp"
#include "demosel/core/persistence.hpp"
#include "demosel/errors.hpp"

namespace demosel {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

std::string trim_copy(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string format_reward(double r) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", r);
    return buf;
}

}  // namespace

const Task* Environment::find_task(std::string_view id) const {
    for (const auto& t : tasks()) {
        if (t.id == id) {
            return &t;
        }
    }
    return nullptr;
}

std::string normalize_answer(std::string_view text) {
    std::string cleaned;
    for (unsigned char c : text) {
        if (std::ispunct(c)) {
            continue;
        }
        cleaned.push_back(std::isspace(c) ? ' ' : static_cast<char>(std::tolower(c)));
    }
    std::string collapsed;
    for (char c : cleaned) {
        if (c == ' ' && (collapsed.empty() || collapsed.back() == ' ')) {
            continue;
        }
        collapsed.push_back(c);
    }
    if (!collapsed.empty() && collapsed.back() == ' ') {
        collapsed.pop_back();
    }
    for (std::string_view article : {"a ", "an ", "the "}) {
        if (collapsed.starts_with(article)) {
            collapsed.erase(0, article.size());
            break;
        }
    }
    return collapsed;
}

int exact_match(std::string_view pred, std::string_view gold) {
    return normalize_answer(pred) == normalize_answer(gold) ? 1 : 0;
}

ToyWikiWorld::ToyWikiWorld(Articles articles, Aliases aliases, std::vector<Task> tasks)
    : articles_(std::move(articles)), aliases_(std::move(aliases)), tasks_(std::move(tasks)) {
    for (const auto& [entity, sentences] : articles_) {
        if (sentences.empty()) {
            throw FormatError(0, "article '" + entity + "' has no sentences");
        }
        alias_index_.emplace(lower(entity), entity);
    }
    for (const auto& [alias, entity] : aliases_) {
        if (!articles_.contains(entity)) {
            throw FormatError(0, "alias '" + alias + "' points to missing entity '" + entity + "'");
        }
        alias_index_.emplace(lower(alias), entity);
    }
    std::set<std::string_view> ids;
    for (const auto& task : tasks_) {
        if (!ids.insert(task.id).second) {
            throw FormatError(0, "duplicate task id '" + task.id + "'");
        }
        for (const auto& hop : task.hops) {
            if (!articles_.contains(hop)) {
                throw FormatError(0, "task '" + task.id + "' hop '" + hop + "' has no article");
            }
        }
        const bool gold_present = std::any_of(articles_.begin(), articles_.end(), [&](const auto& a) {
            return std::any_of(a.second.begin(), a.second.end(), [&](const std::string& s) {
                return s.find(task.gold) != std::string::npos;
            });
        });
        if (task.gold.empty() || !gold_present) {
            throw FormatError(0, "gold answer of task '" + task.id + "' appears in no article");
        }
    }
}

std::optional<std::string> ToyWikiWorld::resolve(std::string_view name) const {
    auto it = alias_index_.find(lower(trim_copy(name)));
    if (it == alias_index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::vector<std::string> ToyWikiWorld::similar(std::string_view query) const {
    const auto q = word_tokens(query);
    const std::set<std::string> query_words(q.begin(), q.end());
    std::vector<std::pair<std::size_t, std::string>> scored;
    for (const auto& [entity, sentences] : articles_) {
        const auto words = word_tokens(entity);
        const std::set<std::string> entity_words(words.begin(), words.end());
        std::size_t shared = 0;
        for (const auto& w : entity_words) {
            shared += query_words.count(w);
        }
        if (shared > 0) {
            scored.emplace_back(shared, entity);
        }
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < scored.size() && i < kMaxSimilar; ++i) {
        out.push_back(scored[i].second);
    }
    return out;
}

double finish_reward(const ToyWikiWorld& world, const Task& task, std::string_view answer) {
    if (task.attributes.empty()) {
        return exact_match(answer, task.gold);
    }
    const auto entity = world.resolve(answer);
    if (!entity) {
        return 0.0;
    }
    std::set<std::string> words;
    for (const auto& s : world.articles().at(*entity)) {
        for (auto& w : word_tokens(s)) {
            words.insert(std::move(w));
        }
    }
    std::size_t matched = 0;
    for (const auto& attr : task.attributes) {
        const auto needed = word_tokens(attr);
        const bool found = !needed.empty() && std::all_of(needed.begin(), needed.end(), [&](const std::string& w) {
            return words.contains(w);
        });
        matched += found ? 1 : 0;
    }
    return static_cast<double>(matched) / static_cast<double>(task.attributes.size());
}

WikiStepResult env_step(const ToyWikiWorld& world, const Task& task, const WikiState& state,
                        const Action& action) {
    WikiStepResult out{{}, state};
    if (state.done) {
        out.observation = {"Episode already finished.", true, 0.0};
        return out;
    }
    const auto& name = action.name();
    const auto& arg = action.argument();
    if (name == kSearch) {
        if (auto entity = world.resolve(arg)) {
            const auto& sentences = world.articles().at(*entity);
            std::string paragraph;
            for (std::size_t i = 0; i < sentences.size() && i < kParagraphSentences; ++i) {
                paragraph += (i > 0 ? " " : "") + sentences[i];
            }
            out.state.article = *entity;
            out.state.lookup_keyword.clear();
            out.state.lookup_hits.clear();
            out.state.lookup_cursor = 0;
            out.observation.text = std::move(paragraph);
        } else {
            std::string list;
            for (const auto& s : world.similar(arg)) {
                list += (list.empty() ? "" : ", ") + s;
            }
            out.observation.text = "Could not find [" + arg + "]. Similar: [" + list + "].";
        }
        return out;
    }
    if (name == kLookup) {
        if (!state.article) {
            out.observation.text = "No article has been searched yet. Use Search[entity] first.";
            return out;
        }
        const auto& sentences = world.articles().at(*state.article);
        const std::string keyword = lower(trim_copy(arg));
        if (keyword != state.lookup_keyword) {
            out.state.lookup_keyword = keyword;
            out.state.lookup_hits.clear();
            out.state.lookup_cursor = 0;
            for (std::size_t i = 0; i < sentences.size(); ++i) {
                if (!keyword.empty() && lower(sentences[i]).find(keyword) != std::string::npos) {
                    out.state.lookup_hits.push_back(i);
                }
            }
        }
        auto& st = out.state;
        if (st.lookup_cursor >= st.lookup_hits.size()) {
            out.observation.text = "No more results.";
        } else {
            out.observation.text = "(Result " + std::to_string(st.lookup_cursor + 1) + " / " +
                                   std::to_string(st.lookup_hits.size()) + ") " +
                                   sentences[st.lookup_hits[st.lookup_cursor]];
            ++st.lookup_cursor;
        }
        return out;
    }
    if (name == kFinish) {
        const double reward = finish_reward(world, task, arg);
        out.state.done = true;
        out.observation = {"Episode finished, reward = " + format_reward(reward), true, reward};
        return out;
    }
    out.observation.text = "Invalid action.";
    return out;
}

namespace {

class WikiSession final : public EnvSession {
public:
    WikiSession(const ToyWikiWorld& world, const Task& task) : world_(world), task_(task) {}

    EnvObservation step(const Action& action) override {
        auto res = env_step(world_, task_, state_, action);
        state_ = std::move(res.state);
        return res.observation;
    }

private:
    const ToyWikiWorld& world_;
    Task task_;
    WikiState state_;
};

}  // namespace

std::unique_ptr<EnvSession> ToyWikiWorld::start(const Task& task) const {
    return std::make_unique<WikiSession>(*this, task);
}

nlohmann::json ToyWikiWorld::to_json() const {
    Json tasks = Json::array();
    for (const auto& t : tasks_) {
        Json j = {{"id", t.id}, {"question", t.question}, {"gold", t.gold}, {"hops", t.hops}};
        if (!t.attributes.empty()) {
            j["attributes"] = t.attributes;
        }
        if (!t.pattern.empty()) {
            j["pattern"] = t.pattern;
        }
        if (!t.witness.empty()) {
            std::vector<std::string> witness;
            for (const auto& a : t.witness) {
                witness.push_back(a.render());
            }
            j["witness"] = witness;
        }
        tasks.push_back(std::move(j));
    }
    return {{"articles", articles_}, {"aliases", aliases_}, {"tasks", std::move(tasks)}};
}

ToyWikiWorld ToyWikiWorld::from_json(const nlohmann::json& doc) {
    try {
        Articles articles = doc.at("articles").get<Articles>();
        Aliases aliases = doc.value("aliases", Aliases{});
        std::vector<Task> tasks;
        for (const auto& j : doc.at("tasks")) {
            Task t;
            t.id = j.at("id").get<std::string>();
            t.question = j.at("question").get<std::string>();
            t.gold = j.at("gold").get<std::string>();
            t.hops = j.value("hops", std::vector<std::string>{});
            t.attributes = j.value("attributes", std::vector<std::string>{});
            t.pattern = j.value("pattern", std::string());
            for (const auto& a : j.value("witness", std::vector<std::string>{})) {
                t.witness.push_back(Action::parse(a));
            }
            tasks.push_back(std::move(t));
        }
        return ToyWikiWorld(std::move(articles), std::move(aliases), std::move(tasks));
    } catch (const Json::exception& e) {
        throw FormatError(0, std::string("world document: ") + e.what());
    } catch (const InvalidAction& e) {
        throw FormatError(0, std::string("world document witness: ") + e.what());
    }
}

void ToyWikiWorld::save(const std::filesystem::path& path) const {
    write_file_atomic(path, to_json().dump(1) + "\n");
}

ToyWikiWorld ToyWikiWorld::load(const std::filesystem::path& path) {
    Json doc;
    try {
        doc = Json::parse(read_file(path));
    } catch (const Json::parse_error& e) {
        throw FormatError(0, path.string() + ": invalid JSON: " + e.what());
    }
    return from_json(doc);
}

}  // namespace demosel
