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

#include "demosel/env/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <regex>
#include <set>
#include <sstream>

#include "demosel/backends/hashing.hpp"
#include "demosel/errors.hpp"

namespace demosel {

std::string_view to_string(Pattern p) noexcept {
    switch (p) {
    case Pattern::direct:
        return "direct";
    case Pattern::search_recovery:
        return "search_recovery";
    case Pattern::two_hop:
        return "two_hop";
    }
    return "unknown";
}

Pattern pattern_from_string(std::string_view name) {
    for (auto p : {Pattern::direct, Pattern::search_recovery, Pattern::two_hop}) {
        if (to_string(p) == name) {
            return p;
        }
    }
    throw ConfigError("unknown pattern '" + std::string(name) +
                      "' (expected direct, search_recovery or two_hop)");
}

std::string_view to_string(SuiteVariant v) noexcept {
    return v == SuiteVariant::qa ? "qa" : "shop";
}

SuiteVariant variant_from_string(std::string_view name) {
    if (name == "qa") {
        return SuiteVariant::qa;
    }
    if (name == "shop") {
        return SuiteVariant::shop;
    }
    throw ConfigError("unknown suite variant '" + std::string(name) + "' (expected qa or shop)");
}

PatternMix default_pattern_mix() {
    return {{Pattern::search_recovery, 0.5}, {Pattern::two_hop, 0.5}};
}

PatternMix parse_pattern_mix(std::string_view text) {
    PatternMix mix;
    std::stringstream ss{std::string(text)};
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) {
            throw ConfigError("pattern mix entry '" + item + "' is not pattern:weight");
        }
        const auto strip = [](const std::string& s) {
            const auto b = s.find_first_not_of(" \t");
            return b == std::string::npos ? std::string() : s.substr(b, s.find_last_not_of(" \t") - b + 1);
        };
        const auto name = strip(item.substr(0, colon));
        const auto weight_text = strip(item.substr(colon + 1));
        double weight = 0.0;
        try {
            std::size_t used = 0;
            weight = std::stod(weight_text, &used);
            if (used != weight_text.size()) {
                throw std::invalid_argument(weight_text);
            }
        } catch (const std::logic_error&) {
            throw ConfigError("pattern mix weight '" + weight_text + "' is not a number");
        }
        mix.push_back({pattern_from_string(name), weight});
    }
    validate_pattern_mix(mix);
    return mix;
}

std::string format_pattern_mix(const PatternMix& mix) {
    std::string out;
    for (const auto& w : mix) {
        std::ostringstream v;
        v << w.weight;
        out += (out.empty() ? "" : ",") + std::string(to_string(w.pattern)) + ":" + v.str();
    }
    return out;
}

void validate_pattern_mix(const PatternMix& mix) {
    if (mix.empty()) {
        throw ConfigError("pattern mix is empty");
    }
    std::set<Pattern> seen;
    double total = 0.0;
    for (const auto& w : mix) {
        if (!seen.insert(w.pattern).second) {
            throw ConfigError("pattern '" + std::string(to_string(w.pattern)) +
                              "' listed twice in the mix");
        }
        if (!(w.weight >= 0.0) || !std::isfinite(w.weight)) {
            throw ConfigError("pattern mix weights must be non-negative");
        }
        total += w.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw ConfigError("pattern mix weights sum to " + std::to_string(total) + ", not 1");
    }
}

namespace {

// ---------------------------------------------------------------- vocabulary

constexpr std::string_view kOnsets[] = {"B",  "C",  "D",  "F",  "G",  "H",  "K",  "L",
                                        "M",  "N",  "P",  "R",  "S",  "T",  "V",  "W",
                                        "Br", "Cl", "Dr", "Gr", "Kr", "St", "Tr", "Th"};
constexpr std::string_view kVowels[] = {"a", "e", "i", "o", "u", "ai", "ea", "io"};
constexpr std::string_view kSurnameEnds[] = {"ton",  "ley",   "wick", "more", "dale",
                                             "ford", "stead", "holm", "worth", "by"};
constexpr std::string_view kGivenEnds[] = {"na", "ra", "lo", "n", "ric", "sa", "vin", "dor"};
constexpr std::string_view kTownEnds[] = {"ville", "burg", "port", "field", "mouth", "ham"};

constexpr std::string_view kOrgTypes[] = {"Institute", "Observatory", "Foundation", "Academy",
                                          "Museum",    "Society",     "Conservatory", "Library"};
constexpr std::string_view kPlaceTypes[] = {"Bridge", "Lighthouse", "Reservoir",
                                            "Canal",  "Tower",      "Station"};
constexpr std::string_view kProductTypes[] = {"Kettle", "Backpack", "Lamp",
                                              "Blender", "Jacket",  "Chair"};
constexpr std::string_view kAdjectives[] = {"Silent", "Crimson", "Hollow", "Distant", "Broken",
                                            "Golden", "Quiet",   "Northern", "Velvet", "Winter",
                                            "Amber",  "Paper",   "Iron",   "Glass",   "Hidden",
                                            "Burning", "Pale",   "Restless", "Lunar", "Salt"};
constexpr std::string_view kNouns[] = {"Harbor",  "Garden", "River",   "Mirror", "Orchard",
                                       "Lantern", "Voyage", "Meadow",  "Signal", "Archive",
                                       "Compass", "Tide",   "Horizon", "Letter", "Engine",
                                       "Season"};
constexpr std::string_view kRegions[] = {"northern", "southern", "eastern", "western", "central",
                                         "coastal"};
constexpr std::string_view kMascots[] = {"heron", "badger", "otter", "lynx",  "falcon",
                                         "stag",  "beaver", "crane", "marten", "wolf"};
constexpr std::string_view kColors[] = {"red", "blue", "green", "black", "white", "grey"};
constexpr std::string_view kMaterials[] = {"steel", "cotton", "bamboo", "leather", "ceramic",
                                           "wool"};
constexpr std::string_view kSizes[] = {"compact", "large", "portable", "foldable"};

struct WorkKind {
    std::string_view kind;
    std::string_view relation;
    std::string_view profession;
};
constexpr WorkKind kWorkKinds[] = {{"film", "director", "film director"},
                                   {"novel", "author", "novelist"},
                                   {"album", "producer", "record producer"},
                                   {"opera", "composer", "composer"}};

constexpr std::string_view kOneHopAttributes[] = {"founding year", "mascot", "home city"};
constexpr std::string_view kPersonAttributes[] = {"birthplace", "birth year"};

constexpr std::string_view kFiller[] = {
    "It is often cited in regional histories.",
    "Its records are kept in a municipal archive.",
    "Several guidebooks include a short entry about it.",
    "Public interest in it grew during the last decade.",
    "Local newspapers have covered it on many occasions.",
    "A small exhibition was once dedicated to it.",
};

constexpr std::string_view kPersonFiller[] = {
    "{} worked for many years before gaining recognition.",
    "Critics have praised {} for a distinctive style.",
    "{} rarely gives interviews.",
    "Early work by {} drew little attention at first.",
    "{} has collaborated with many younger artists.",
};

class Generator {
public:
    explicit Generator(std::uint64_t seed) : rng_(seed) {}

    std::size_t pick(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }

    template <typename T, std::size_t N>
    std::string choose(const T (&items)[N]) {
        return std::string(items[pick(N)]);
    }

    int year(int lo, int hi) { return lo + static_cast<int>(pick(static_cast<std::size_t>(hi - lo + 1))); }

    // Every generated word is unique across the world.
    std::string surname() { return fresh([&] { return choose(kOnsets) + choose(kVowels) + choose(kSurnameEnds); }); }
    std::string given() { return fresh([&] { return choose(kOnsets) + choose(kVowels) + choose(kGivenEnds); }); }
    std::string town() { return fresh([&] { return choose(kOnsets) + choose(kVowels) + choose(kTownEnds); }); }

    std::string work_title() {
        return fresh([&] { return choose(kAdjectives) + " " + choose(kNouns); });
    }

private:
    template <typename F>
    std::string fresh(F make) {
        for (int attempt = 0; attempt < 10000; ++attempt) {
            std::string w = make();
            if (used_.insert(w).second) {
                return w;
            }
        }
        throw ConfigError("synthetic vocabulary exhausted; reduce n_tasks or n_pool");
    }

    std::mt19937_64 rng_;
    std::set<std::string> used_;
};

std::string fill(std::string_view tmpl, const std::string& name) {
    std::string out(tmpl);
    const auto pos = out.find("{}");
    if (pos != std::string::npos) {
        out.replace(pos, 2, name);
    }
    return out;
}

struct Blueprint {
    Task task;
    std::vector<std::string> thoughts;  // one per witness action
};

struct WorldBuilder {
    ToyWikiWorld::Articles articles;

    void add(const std::string& entity, std::vector<std::string> sentences) {
        if (!articles.emplace(entity, std::move(sentences)).second) {
            throw std::logic_error("duplicate synthetic entity " + entity);
        }
    }
};

std::vector<std::string> filler(Generator& g, std::size_t n) {
    std::vector<std::string> out;
    std::vector<std::size_t> idx(std::size(kFiller));
    for (std::size_t i = 0; i < idx.size(); ++i) {
        idx[i] = i;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + g.pick(idx.size() - i);
        std::swap(idx[i], idx[j]);
        out.emplace_back(kFiller[idx[i]]);
    }
    return out;
}

std::string attribute_value(Generator& g, std::string_view attr) {
    if (attr == "founding year") {
        return std::to_string(g.year(1801, 1990));
    }
    if (attr == "mascot") {
        return g.choose(kMascots);
    }
    if (attr == "birth year") {
        return std::to_string(g.year(1920, 1995));
    }
    return g.town();  // home city, birthplace
}

Blueprint make_one_hop(Generator& g, WorldBuilder& w, Pattern pattern, const std::string& id) {
    const std::string surname = g.surname();
    std::string entity;
    std::string mention;
    if (pattern == Pattern::search_recovery) {
        const std::string type = g.choose(kOrgTypes);
        entity = g.given() + " " + surname + " " + type;
        mention = surname + " " + type;
    } else {
        entity = surname + " " + g.choose(kPlaceTypes);
        mention = entity;
    }
    const std::string attr = g.choose(kOneHopAttributes);
    const std::string value = attribute_value(g, attr);
    std::vector<std::string> sentences = {
        entity + " is a landmark in the " + g.choose(kRegions) + " region.",
        entity + "'s " + attr + " is " + value + ".",
    };
    for (auto& s : filler(g, 3)) {
        sentences.push_back(std::move(s));
    }
    w.add(entity, std::move(sentences));

    Blueprint bp;
    bp.task.id = id;
    bp.task.question = "What is the " + attr + " of " + mention + "?";
    bp.task.gold = value;
    bp.task.hops = {entity};
    bp.task.pattern = std::string(to_string(pattern));
    if (pattern == Pattern::search_recovery) {
        bp.task.witness = {Action(std::string(kSearch), mention), Action(std::string(kSearch), entity),
                             Action(std::string(kFinish), value)};
        bp.thoughts = {
            "I need to search " + mention + " and find its " + attr + ".",
            "I could not find " + mention + ". The most similar entity is " + entity +
                ", so I will search it instead.",
            entity + "'s " + attr + " is " + value + ". So the answer is " + value + ".",
        };
    } else {
        bp.task.witness = {Action(std::string(kSearch), entity), Action(std::string(kFinish), value)};
        bp.thoughts = {
            "I need to search " + entity + " and find its " + attr + ".",
            "The paragraph says " + entity + "'s " + attr + " is " + value + ". So the answer is " +
                value + ".",
        };
    }
    return bp;
}

Blueprint make_two_hop(Generator& g, WorldBuilder& w, const std::string& id) {
    const WorkKind& kind = kWorkKinds[g.pick(std::size(kWorkKinds))];
    const std::string work = g.work_title();
    const std::string person = g.given() + " " + g.surname();
    const std::string attr = g.choose(kPersonAttributes);
    const std::string value = attribute_value(g, attr);
    const std::string relation(kind.relation);

    std::vector<std::string> work_sentences = {
        work + " is a " + std::string(kind.kind) + " released in " +
            std::to_string(g.year(1950, 2020)) + ".",
        work + "'s " + relation + " is " + person + ".",
    };
    for (auto& s : filler(g, 2)) {
        work_sentences.push_back(std::move(s));
    }
    w.add(work, std::move(work_sentences));

    std::vector<std::string> person_sentences = {person + " is a " + std::string(kind.profession) + "."};
    std::vector<std::size_t> order(std::size(kPersonFiller));
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    for (std::size_t i = 0; i < 4; ++i) {
        const std::size_t j = i + g.pick(order.size() - i);
        std::swap(order[i], order[j]);
    }
    for (std::size_t i = 0; i < 3; ++i) {
        person_sentences.push_back(fill(kPersonFiller[order[i]], person));
    }
    person_sentences.push_back(person + "'s " + attr + " is " + value + ".");
    person_sentences.push_back(fill(kPersonFiller[order[3]], person));
    w.add(person, std::move(person_sentences));

    Blueprint bp;
    bp.task.id = id;
    bp.task.question = "What is the " + attr + " of the " + relation + " of " + work + "?";
    bp.task.gold = value;
    bp.task.hops = {work, person};
    bp.task.pattern = std::string(to_string(Pattern::two_hop));
    bp.task.witness = {Action(std::string(kSearch), work), Action(std::string(kSearch), person),
                         Action(std::string(kLookup), attr), Action(std::string(kFinish), value)};
    bp.thoughts = {
        "I need to find the " + relation + " of " + work + " first, then the " + attr +
            " of that person.",
        "The " + relation + " of " + work + " is " + person + ". Now I need to search " + person +
            " to find the " + attr + ".",
        "The paragraph does not mention the " + attr + " of " + person + ". I will look up " +
            attr + ".",
        person + "'s " + attr + " is " + value + ". So the answer is " + value + ".",
    };
    return bp;
}

Blueprint make_shop(Generator& g, WorldBuilder& w, Pattern pattern, const std::string& id) {
    if (pattern == Pattern::two_hop) {
        throw ConfigError("two_hop is not available in the shop variant");
    }
    const std::string type = g.choose(kProductTypes);
    const std::string surname = g.surname();
    std::string product;
    std::string mention;
    if (pattern == Pattern::search_recovery) {
        product = g.given() + " " + surname + " " + type;
        mention = surname + " " + type;
    } else {
        product = surname + " " + type;
        mention = product;
    }
    const std::string color = g.choose(kColors);
    const std::string material = g.choose(kMaterials);
    const std::string size = g.choose(kSizes);
    auto product_article = [&](const std::string& name, const std::string& c, const std::string& m,
                               const std::string& s) {
        std::vector<std::string> sentences = {
            name + " is a product sold in the " + g.choose(kRegions) + " catalog.",
            name + " is " + c + ", made of " + m + " and " + s + ".",
        };
        for (auto& f : filler(g, 2)) {
            sentences.push_back(std::move(f));
        }
        return sentences;
    };
    w.add(product, product_article(product, color, material, size));

    // A near miss sharing two of the three attributes earns partial reward.
    std::string other_color = g.choose(kColors);
    while (other_color == color) {
        other_color = g.choose(kColors);
    }
    const std::string decoy = g.surname() + " " + type;
    w.add(decoy, product_article(decoy, other_color, material, size));

    Blueprint bp;
    bp.task.id = id;
    bp.task.question =
        "Find the " + mention + " that is " + color + ", made of " + material + " and " + size + ".";
    bp.task.gold = product;
    bp.task.hops = {product};
    bp.task.attributes = {color, material, size};
    bp.task.pattern = std::string(to_string(pattern));
    if (pattern == Pattern::search_recovery) {
        bp.task.witness = {Action(std::string(kSearch), mention), Action(std::string(kSearch), product),
                             Action(std::string(kFinish), product)};
        bp.thoughts = {
            "I need to search " + mention + " and check its attributes.",
            "I could not find " + mention + ". The most similar entity is " + product +
                ", so I will search it instead.",
            product + " matches the requested attributes, so I will buy it.",
        };
    } else {
        bp.task.witness = {Action(std::string(kSearch), product), Action(std::string(kFinish), product)};
        bp.thoughts = {
            "I need to search " + product + " and check its attributes.",
            product + " matches the requested attributes, so I will buy it.",
        };
    }
    return bp;
}

// Largest-remainder apportionment of `total` across `weights`, each entry
// receiving at least `floor_each`.
std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& weights,
                                   std::size_t floor_each) {
    std::vector<std::size_t> counts(weights.size(), floor_each);
    const std::size_t rest = total - floor_each * weights.size();
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double exact = weights[i] * static_cast<double>(rest);
        const auto whole = static_cast<std::size_t>(std::floor(exact + 1e-9));
        counts[i] += whole;
        assigned += whole;
        remainders.emplace_back(exact - static_cast<double>(whole), i);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < rest; ++k, ++assigned) {
        ++counts[remainders[k % remainders.size()].second];
    }
    return counts;
}

// Interleaves per-pattern counts so neighbouring tasks differ in pattern.
std::vector<Pattern> interleave(const std::vector<Pattern>& patterns,
                                std::vector<std::size_t> counts) {
    std::vector<Pattern> out;
    bool any = true;
    while (any) {
        any = false;
        for (std::size_t i = 0; i < patterns.size(); ++i) {
            if (counts[i] > 0) {
                out.push_back(patterns[i]);
                --counts[i];
                any = true;
            }
        }
    }
    return out;
}

Trajectory replay(const ToyWikiWorld& world, const Blueprint& bp) {
    auto session = world.start(bp.task);
    std::vector<Step> steps;
    EnvObservation obs;
    for (std::size_t i = 0; i < bp.task.witness.size(); ++i) {
        obs = session->step(bp.task.witness[i]);
        steps.push_back(Step{bp.thoughts.at(i), bp.task.witness[i], obs.text});
    }
    if (!obs.done || obs.reward < 1.0) {
        throw std::logic_error("synthetic witness failed for task " + bp.task.id);
    }
    return make_trajectory(bp.task.question, std::move(steps), true, obs.reward);
}

}  // namespace

SyntheticSuite make_synthetic_suite(const SuiteOptions& options) {
    validate_pattern_mix(options.mix);
    std::vector<Pattern> patterns;
    std::vector<double> weights;
    for (const auto& w : options.mix) {
        if (w.weight > 0.0) {
            patterns.push_back(w.pattern);
            weights.push_back(w.weight);
        }
    }
    if (options.n_pool < patterns.size()) {
        throw ConfigError("n_pool must be at least the number of patterns in the mix (" +
                          std::to_string(patterns.size()) + ")");
    }
    const bool has_direct =
        std::find(patterns.begin(), patterns.end(), Pattern::direct) != patterns.end();
    std::size_t n_distractors = 0;
    if (!has_direct) {
        n_distractors = std::min(options.n_pool * 3 / 5, options.n_pool - patterns.size());
    }

    Generator g(options.seed);
    WorldBuilder builder;
    auto make = [&](Pattern p, const std::string& id) {
        if (options.variant == SuiteVariant::shop) {
            return make_shop(g, builder, p, id);
        }
        return p == Pattern::two_hop ? make_two_hop(g, builder, id) : make_one_hop(g, builder, p, id);
    };
    auto task_id = [](char prefix, std::size_t i) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%c%03zu", prefix, i);
        return std::string(buf);
    };

    std::vector<Blueprint> eval_plans;
    const auto eval_patterns = interleave(patterns, apportion(options.n_tasks, weights, 0));
    for (std::size_t i = 0; i < eval_patterns.size(); ++i) {
        eval_plans.push_back(make(eval_patterns[i], task_id('t', i)));
    }

    std::vector<Pattern> pool_patterns(n_distractors, Pattern::direct);
    for (Pattern p : interleave(patterns, apportion(options.n_pool - n_distractors, weights, 1))) {
        pool_patterns.push_back(p);
    }
    // Distractors are spread through the pool rather than grouped at the front.
    for (std::size_t i = pool_patterns.size(); i > 1; --i) {
        std::swap(pool_patterns[i - 1], pool_patterns[g.pick(i)]);
    }
    std::vector<Blueprint> pool_plans;
    for (std::size_t i = 0; i < pool_patterns.size(); ++i) {
        pool_plans.push_back(make(pool_patterns[i], task_id('p', i)));
    }

    std::vector<Task> pool_tasks;
    for (const auto& s : pool_plans) {
        pool_tasks.push_back(s.task);
    }
    const ToyWikiWorld pool_world(builder.articles, {}, pool_tasks);
    std::vector<Trajectory> demos;
    std::map<std::string, std::vector<std::string>> by_pattern;
    for (const auto& s : pool_plans) {
        demos.push_back(replay(pool_world, s));
        by_pattern[s.task.pattern].push_back(demos.back().id);
    }

    std::vector<Task> eval_tasks;
    SyntheticSuite suite;
    for (const auto& s : eval_plans) {
        eval_tasks.push_back(s.task);
        suite.labels[s.task.id] = by_pattern[s.task.pattern];
    }
    suite.world = std::make_shared<const ToyWikiWorld>(std::move(builder.articles),
                                                       ToyWikiWorld::Aliases{}, std::move(eval_tasks));
    suite.pool = DemoPool(std::move(demos));
    suite.pool_tasks = std::move(pool_tasks);
    return suite;
}

SyntheticSuite make_synthetic_suite(std::size_t n_tasks, std::size_t n_pool, const PatternMix& mix,
                                    std::uint64_t seed) {
    return make_synthetic_suite(SuiteOptions{n_tasks, n_pool, mix, seed, SuiteVariant::qa});
}

// ------------------------------------------------------------ retriever rules

namespace {

constexpr std::string_view kDirectDemoTk =
    "Search the exact entity named in the question. Read the first paragraph and find the "
    "requested attribute. Finish with that value.";
constexpr std::string_view kRecoveryDemoTk =
    "When a search returns could not find, pick the closest name from the similar list. Search "
    "that suggested entity instead of repeating the failed query. Then finish with the "
    "attribute value.";
constexpr std::string_view kChainingDemoTk =
    "For a nested question, first identify the linked person from the work article. Search that "
    "bridge entity next. Use lookup on the attribute keyword because it sits outside the opening "
    "paragraph.";

constexpr std::string_view kDirectContextTk =
    "Search the exact entity named in the question and read the first paragraph to find the "
    "requested attribute, then finish with that value.";
constexpr std::string_view kRecoveryContextTk =
    "The search returned could not find, so pick the closest name from the similar list and "
    "search that suggested entity instead of repeating the failed query.";
constexpr std::string_view kChainingContextTk =
    "A nested question: identify the linked person from the work article first, search that "
    "bridge entity next, and use lookup on the attribute keyword outside the opening paragraph.";

constexpr std::string_view kContextMarker = "Omit task-specific entities.";

std::vector<ScriptedRule> demo_rules() {
    return {
        {"Observation: Could not find", std::string(kRecoveryDemoTk), ScriptedRule::Kind::substring},
        {"Action: Lookup[", std::string(kChainingDemoTk), ScriptedRule::Kind::substring},
        {"", std::string(kDirectDemoTk), ScriptedRule::Kind::substring},
    };
}

}  // namespace

std::vector<ScriptedRule> synthetic_retriever_rules() {
    std::vector<ScriptedRule> rules = {
        {R"(Observation: Could not find \[[^\n]*\n$)", std::string(kRecoveryContextTk),
         ScriptedRule::Kind::regex},
        {std::string(kContextMarker) + R"(\n\nQuestion: What is the [^\n]+ of the [^\n]+ of )",
         std::string(kChainingContextTk), ScriptedRule::Kind::regex},
        {std::string(kContextMarker), std::string(kDirectContextTk), ScriptedRule::Kind::substring},
    };
    for (auto& r : demo_rules()) {
        rules.push_back(std::move(r));
    }
    return rules;
}

std::vector<ScriptedRule> constant_context_rules(std::string context_tk) {
    std::vector<ScriptedRule> rules = {
        {std::string(kContextMarker), std::move(context_tk), ScriptedRule::Kind::substring}};
    for (auto& r : demo_rules()) {
        rules.push_back(std::move(r));
    }
    return rules;
}

// ------------------------------------------------------------------- solver

namespace {

struct SeenStep {
    std::string name;
    std::string argument;
    std::string observation;
};

struct Question {
    enum class Kind { one_hop, two_hop, shop, unknown } kind = Kind::unknown;
    std::string attribute;
    std::string relation;
    std::string mention;
};

Question parse_question(const std::string& q) {
    static const std::regex two_hop(R"(^What is the (.+?) of the (.+?) of (.+)\?$)");
    static const std::regex one_hop(R"(^What is the (.+?) of (.+)\?$)");
    static const std::regex shop(R"(^Find the (.+?) that is .+\.$)");
    std::smatch m;
    Question out;
    if (std::regex_match(q, m, two_hop)) {
        out = {Question::Kind::two_hop, m[1], m[2], m[3]};
    } else if (std::regex_match(q, m, one_hop)) {
        out = {Question::Kind::one_hop, m[1], "", m[2]};
    } else if (std::regex_match(q, m, shop)) {
        out = {Question::Kind::shop, "", "", m[1]};
    }
    return out;
}

// "<X>'s <key> is <value>." anywhere in `text`.
std::optional<std::string> extract_fact(const std::string& text, const std::string& key) {
    if (key.empty()) {
        return std::nullopt;
    }
    const std::string needle = "'s " + key + " is ";
    const auto at = text.find(needle);
    if (at == std::string::npos) {
        return std::nullopt;
    }
    const auto start = at + needle.size();
    const auto end = text.find('.', start);
    if (end == std::string::npos || end == start) {
        return std::nullopt;
    }
    return text.substr(start, end - start);
}

std::vector<std::string> similar_list(const std::string& observation) {
    const std::string marker = "Similar: [";
    const auto at = observation.find(marker);
    if (at == std::string::npos) {
        return {};
    }
    const auto close = observation.find(']', at + marker.size());
    std::string inner = observation.substr(at + marker.size(), close - at - marker.size());
    std::vector<std::string> out;
    std::stringstream ss(inner);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(' ');
        if (b != std::string::npos) {
            out.push_back(item.substr(b));
        }
    }
    return out;
}

std::string reply(const std::string& thought, std::string_view name, const std::string& arg) {
    return "Thought: " + thought + "\nAction: " + std::string(name) + "[" + arg + "]";
}

}  // namespace

std::string SyntheticSolver::respond(std::string_view prompt_view) {
    const std::string prompt(prompt_view);
    const auto q_at = prompt.rfind("Question: ");
    if (q_at == std::string::npos) {
        return reply("There is no question to answer.", kFinish, "unknown");
    }
    const std::string demos = prompt.substr(0, q_at);
    const bool knows_recovery = demos.find("Observation: Could not find") != std::string::npos;
    const bool knows_chaining = demos.find("Action: Lookup[") != std::string::npos;

    std::stringstream live(prompt.substr(q_at + 10));
    std::string question;
    std::getline(live, question);
    std::vector<SeenStep> seen;
    std::string line;
    while (std::getline(live, line)) {
        if (line.starts_with("Action: ")) {
            SeenStep s;
            const std::string body = line.substr(8);
            const auto open = body.find('[');
            const auto close = body.rfind(']');
            if (open != std::string::npos && close != std::string::npos && close > open) {
                s.name = body.substr(0, open);
                s.argument = body.substr(open + 1, close - open - 1);
            } else {
                s.name = body;
            }
            seen.push_back(std::move(s));
        } else if (line.starts_with("Observation: ") && !seen.empty()) {
            seen.back().observation = line.substr(13);
        }
    }

    const Question q = parse_question(question);
    if (q.kind == Question::Kind::unknown) {
        return reply("I do not recognise this kind of question.", kFinish, "unknown");
    }
    if (seen.empty()) {
        return reply("I need to search " + q.mention + ".", kSearch, q.mention);
    }
    const SeenStep& last = seen.back();
    if (last.name == kSearch && last.observation.starts_with("Could not find [")) {
        if (!knows_recovery) {
            return reply("I will search " + last.argument + " again.", kSearch, last.argument);
        }
        for (const auto& candidate : similar_list(last.observation)) {
            const bool tried = std::any_of(seen.begin(), seen.end(), [&](const SeenStep& s) {
                return s.name == kSearch && s.argument == candidate;
            });
            if (!tried) {
                return reply("I could not find " + last.argument + ". The most similar entity is " +
                                 candidate + ", so I will search it instead.",
                             kSearch, candidate);
            }
        }
        return reply("None of the suggestions helped.", kFinish, "unknown");
    }
    if (last.name == kSearch) {
        if (q.kind == Question::Kind::shop) {
            const auto is_a = last.observation.find(" is a ");
            const std::string product =
                is_a == std::string::npos ? last.argument : last.observation.substr(0, is_a);
            return reply(product + " looks right, so I will buy it.", kFinish, product);
        }
        if (auto value = extract_fact(last.observation, q.attribute)) {
            return reply("The " + q.attribute + " is " + *value + ".", kFinish, *value);
        }
        if (q.kind == Question::Kind::two_hop) {
            if (auto bridge = extract_fact(last.observation, q.relation)) {
                if (knows_chaining) {
                    return reply("The " + q.relation + " is " + *bridge + ". I need to search " +
                                     *bridge + " next.",
                                 kSearch, *bridge);
                }
                return reply("The " + q.relation + " is " + *bridge + ". So the answer is " +
                                 *bridge + ".",
                             kFinish, *bridge);
            }
        }
        return reply("The paragraph does not mention the " + q.attribute + ". I will look it up.",
                     kLookup, q.attribute);
    }
    if (last.name == kLookup) {
        if (auto value = extract_fact(last.observation, q.attribute)) {
            return reply("The " + q.attribute + " is " + *value + ".", kFinish, *value);
        }
        if (last.observation.starts_with("(Result ")) {
            return reply("That sentence does not help. I will look again.", kLookup, q.attribute);
        }
    }
    return reply("I cannot make further progress.", kFinish, "unknown");
}

std::string SyntheticSolver::do_generate(const GenRequest& request) {
    return respond(request.prompt);
}

}  // namespace demosel
