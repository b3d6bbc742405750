#include "gcrl/abstraction.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "gcrl/jsonio.hpp"

namespace gcrl::abstraction {

using gridworld::Cell;
using gridworld::CellKind;
using gridworld::Color;
using gridworld::GridPos;
using nlohmann::json;

const char* to_string(FeatureClass f) {
    switch (f) {
        case FeatureClass::walls: return "walls";
        case FeatureClass::agent_pos: return "agent_pos";
        case FeatureClass::agent_dir: return "agent_dir";
        case FeatureClass::doors: return "doors";
        case FeatureClass::carried_item: return "carried_item";
        case FeatureClass::objects_matching_goal: return "objects_matching_goal";
        case FeatureClass::all_objects: return "all_objects";
    }
    return "walls";
}

FeatureClass feature_class_from_string(const std::string& s) {
    for (auto f : {FeatureClass::walls, FeatureClass::agent_pos, FeatureClass::agent_dir,
                   FeatureClass::doors, FeatureClass::carried_item,
                   FeatureClass::objects_matching_goal, FeatureClass::all_objects}) {
        if (s == to_string(f)) return f;
    }
    throw ParseError("unknown feature class: '" + s + "'");
}

std::vector<FeatureClass> FeatureSet::classes() const {
    std::vector<FeatureClass> out;
    for (auto f : {FeatureClass::walls, FeatureClass::agent_pos, FeatureClass::agent_dir,
                   FeatureClass::doors, FeatureClass::carried_item,
                   FeatureClass::objects_matching_goal, FeatureClass::all_objects}) {
        if (has(f)) out.push_back(f);
    }
    return out;
}

AbstractionConfig AbstractionConfig::defaults() {
    AbstractionConfig cfg;
    cfg.go_to_tile = {FeatureClass::walls, FeatureClass::doors, FeatureClass::agent_pos,
                      FeatureClass::agent_dir, FeatureClass::carried_item};
    cfg.go_to_object = cfg.go_to_tile;
    cfg.go_to_object.add(FeatureClass::objects_matching_goal);
    cfg.pick_up = cfg.go_to_object;
    return cfg;
}

FeatureSet AbstractionConfig::for_kind(GoalKind kind) const {
    switch (kind) {
        case GoalKind::go_to_tile: return go_to_tile;
        case GoalKind::go_to_object: return go_to_object;
        case GoalKind::pick_up: return pick_up;
    }
    return go_to_tile;
}

void AbstractionConfig::set_for_kind(GoalKind kind, FeatureSet fs) {
    switch (kind) {
        case GoalKind::go_to_tile: go_to_tile = fs; break;
        case GoalKind::go_to_object: go_to_object = fs; break;
        case GoalKind::pick_up: pick_up = fs; break;
    }
}

json abstraction_config_json(const AbstractionConfig& cfg) {
    json j = json::object();
    for (auto kind : {GoalKind::go_to_tile, GoalKind::go_to_object, GoalKind::pick_up}) {
        json names = json::array();
        for (FeatureClass f : cfg.for_kind(kind).classes()) names.push_back(to_string(f));
        j[goals::to_string(kind)] = std::move(names);
    }
    return j;
}

AbstractionConfig abstraction_config_from_json(const json& j) {
    AbstractionConfig cfg = AbstractionConfig::defaults();
    for (auto kind : {GoalKind::go_to_tile, GoalKind::go_to_object, GoalKind::pick_up}) {
        const char* key = goals::to_string(kind);
        if (!j.contains(key)) continue;
        FeatureSet fs;
        for (const json& name : j.at(key))
            fs.add(feature_class_from_string(name.get<std::string>()));
        cfg.set_for_kind(kind, fs);
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// Serialization of kept features
// ---------------------------------------------------------------------------

namespace {

bool is_object_cell(const Cell& c) {
    return c.kind == CellKind::key || c.kind == CellKind::ball || c.kind == CellKind::box ||
           c.kind == CellKind::goal_tile;
}

bool matches_goal_object(const Cell& c, const Goal& g) {
    if (g.kind == GoalKind::go_to_tile) return false;
    return c.kind == g.object && c.color == g.color;
}

void append_wall_bitmap(const LowLevelState& x, std::string& out) {
    static const char* hex = "0123456789abcdef";
    out += "walls=";
    unsigned nibble = 0;
    int bits = 0;
    for (const Cell& c : x.grid) {
        nibble = (nibble << 1) | (c.kind == CellKind::wall ? 1u : 0u);
        if (++bits == 4) {
            out.push_back(hex[nibble]);
            nibble = 0;
            bits = 0;
        }
    }
    if (bits > 0) out.push_back(hex[nibble << (4 - bits)]);
}

} // namespace

std::string serialize_features(const LowLevelState& x, const Goal& g, FeatureSet kept) {
    std::string out;
    out.reserve(64 + x.grid.size() / 4);
    out += "grid=" + std::to_string(x.width) + "x" + std::to_string(x.height);

    if (kept.has(FeatureClass::walls)) {
        out.push_back(';');
        append_wall_bitmap(x, out);
    }
    if (kept.has(FeatureClass::agent_pos)) {
        out += ";agent=" + std::to_string(x.agent_pos.col) + "," + std::to_string(x.agent_pos.row);
    }
    if (kept.has(FeatureClass::agent_dir)) {
        out += std::string(";dir=") + gridworld::to_string(x.agent_dir);
    }
    if (kept.has(FeatureClass::doors)) {
        // Items sorted by (col, row) within the class.
        for (int c = 0; c < x.width; ++c)
            for (int r = 0; r < x.height; ++r) {
                const Cell& cell = x.at({c, r});
                if (cell.kind != CellKind::door) continue;
                out += ";door:" + std::to_string(c) + "," + std::to_string(r) + "=" +
                       gridworld::to_string(cell.color) + "," + gridworld::to_string(cell.door);
            }
    }
    if (kept.has(FeatureClass::carried_item)) {
        if (x.carrying) {
            out += std::string(";carry=") + gridworld::to_string(x.carrying->color) + " " +
                   gridworld::to_string(x.carrying->kind);
        } else {
            out += ";carry=none";
        }
    }
    const bool all = kept.has(FeatureClass::all_objects);
    if (all || kept.has(FeatureClass::objects_matching_goal)) {
        for (int c = 0; c < x.width; ++c)
            for (int r = 0; r < x.height; ++r) {
                const Cell& cell = x.at({c, r});
                if (!is_object_cell(cell)) continue;
                if (!all && !matches_goal_object(cell, g)) continue;
                out += ";obj:" + std::to_string(c) + "," + std::to_string(r) + "=" +
                       gridworld::to_string(cell.color) + " " + gridworld::to_string(cell.kind);
            }
    }
    return out;
}

AbstractState abstract_state(const LowLevelState& x, const Goal& g,
                             const AbstractionConfig& cfg) {
    if (goals::psi(x, g)) return {kGoalToken};
    return {serialize_features(x, g, cfg.for_kind(g.kind))};
}

std::vector<std::string> token_items(const std::string& token) {
    std::vector<std::string> items;
    std::size_t start = 0;
    while (start <= token.size()) {
        const std::size_t end = token.find(';', start);
        if (end == std::string::npos) {
            items.push_back(token.substr(start));
            break;
        }
        items.push_back(token.substr(start, end - start));
        start = end + 1;
    }
    return items;
}

// ---------------------------------------------------------------------------
// Dataset mapping
// ---------------------------------------------------------------------------

AbstractDataset abstract_dataset(const Dataset& d, const Goal& g, const AbstractionConfig& cfg) {
    AbstractDataset out;
    out.goal = g;
    out.provenance = "collect(seed=" + std::to_string(d.collection_seed) +
                     ", episodes=" + std::to_string(d.n_episodes()) + ")";

    std::unordered_map<std::string, int> intern;
    auto intern_token = [&](std::string token) {
        auto [it, fresh] = intern.try_emplace(std::move(token), static_cast<int>(out.tokens.size()));
        if (fresh) out.tokens.push_back(it->first);
        return it->second;
    };

    std::unordered_map<std::string, int> low_level_seen;
    out.transitions.reserve(d.n_transitions());
    d.for_each_transition([&](const datastore::TransitionView& t) {
        const int s = intern_token(abstract_state(t.x, g, cfg).token);
        const int s2 = intern_token(abstract_state(t.x_next, g, cfg).token);
        out.transitions.push_back({s, t.a, s2, t.episode_id, t.step_index});
        low_level_seen.try_emplace(gridworld::encode_state(t.x), 0);
        low_level_seen.try_emplace(gridworld::encode_state(t.x_next), 0);
    });
    out.distinct_low_level = low_level_seen.size();
    return out;
}

void save_abstract_dataset(const AbstractDataset& ad, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path);
    const json header{{"goal", ad.goal.surface_text.empty() ? goals::render_goal(ad.goal)
                                                            : ad.goal.surface_text},
                      {"provenance", ad.provenance},
                      {"distinct_low_level", ad.distinct_low_level},
                      {"format_version", 1}};
    out << header.dump() << '\n';
    for (const AbstractTransition& t : ad.transitions) {
        const json line{{"s", ad.tokens[static_cast<std::size_t>(t.s)]},
                        {"a", gridworld::to_string(t.a)},
                        {"s_next", ad.tokens[static_cast<std::size_t>(t.s_next)]},
                        {"episode", t.episode},
                        {"step", t.step}};
        out << line.dump() << '\n';
    }
    if (!out) throw Error("write failed: " + path);
}

AbstractDataset load_abstract_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open: " + path);
    std::string line;
    long line_no = 0;
    if (!std::getline(in, line)) throw ParseError("missing abstract dataset header", 1);
    ++line_no;

    AbstractDataset ad;
    try {
        const json header = json::parse(line);
        ad.goal = goals::parse_goal(header.at("goal").get<std::string>());
        ad.provenance = header.at("provenance").get<std::string>();
        ad.distinct_low_level = header.at("distinct_low_level").get<std::size_t>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad abstract dataset header: ") + e.what(), line_no);
    }

    std::unordered_map<std::string, int> intern;
    auto intern_token = [&](std::string token) {
        auto [it, fresh] = intern.try_emplace(std::move(token), static_cast<int>(ad.tokens.size()));
        if (fresh) ad.tokens.push_back(it->first);
        return it->second;
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            const auto action = gridworld::action_from_string(j.at("a").get<std::string>());
            if (!action) throw ParseError("unknown action name", line_no);
            ad.transitions.push_back({intern_token(j.at("s").get<std::string>()), *action,
                                      intern_token(j.at("s_next").get<std::string>()),
                                      j.at("episode").get<int>(), j.at("step").get<int>()});
        } catch (const json::exception& e) {
            throw ParseError(std::string("bad abstract transition: ") + e.what(), line_no);
        }
    }
    return ad;
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

PartitionReport validate_partition(const Environment& env, const Goal& g,
                                   const AbstractionConfig& cfg,
                                   const std::vector<LowLevelState>& sample) {
    if (sample.empty()) throw InputError("validate_partition: empty sample");
    const LowLevelState& base = env.base_state();
    for (const LowLevelState& x : sample) {
        if (x.width != base.width || x.height != base.height)
            throw InputError("validate_partition: sample state from a different grid shape");
    }

    struct ClassInfo {
        std::size_t preimages = 0;
        std::size_t positives = 0;
        const LowLevelState* example_positive = nullptr;
        const LowLevelState* example_negative = nullptr;
    };
    std::map<std::string, ClassInfo> classes;
    std::size_t n_positive = 0;
    for (const LowLevelState& x : sample) {
        ClassInfo& info = classes[abstract_state(x, g, cfg).token];
        info.preimages += 1;
        if (goals::psi(x, g)) {
            info.positives += 1;
            ++n_positive;
            if (!info.example_positive) info.example_positive = &x;
        } else if (!info.example_negative) {
            info.example_negative = &x;
        }
    }

    PartitionReport report;
    report.n_sample = sample.size();
    report.n_abstract = classes.size();
    report.n_positive = n_positive;

    // Exactly one class must hold all positives and nothing else.
    std::size_t pure_positive_classes = 0;
    std::size_t mixed_classes = 0;
    for (const auto& [token, info] : classes) {
        if (info.positives == 0) continue;
        if (info.positives == info.preimages && info.positives == n_positive) {
            ++pure_positive_classes;
            report.goal_token = token;
        } else {
            ++mixed_classes;
            if (report.offending.size() < 4) {
                if (info.example_positive)
                    report.offending.push_back(
                        "positive state in impure class " + token + ": " +
                        gridworld::snapshot_json(*info.example_positive, true).dump());
                if (info.example_negative)
                    report.offending.push_back(
                        "negative state sharing class " + token + ": " +
                        gridworld::snapshot_json(*info.example_negative, true).dump());
            }
        }
    }
    report.unique_goal_class =
        n_positive > 0 && pure_positive_classes == 1 && mixed_classes == 0;
    if (n_positive == 0) report.unique_goal_class = false;

    for (const auto& [token, info] : classes) {
        if (info.preimages >= 2) {
            report.non_injective = true;
            break;
        }
    }
    if (!report.non_injective && report.offending.size() < 8)
        report.offending.push_back("every abstract state has a single preimage in the sample");

    report.valid = report.unique_goal_class && report.non_injective;
    return report;
}

double markov_violation(const AbstractDataset& ad) {
    if (ad.transitions.empty()) throw InputError("markov_violation: empty abstract dataset");
    // The goal state is absorbing in the built model, so its outgoing
    // transitions are not part of the abstract dynamics under test.
    int goal_index = -1;
    for (std::size_t i = 0; i < ad.tokens.size(); ++i)
        if (ad.tokens[i] == kGoalToken) goal_index = static_cast<int>(i);

    std::unordered_map<long long, int> first_successor;
    std::set<long long> violating;
    for (const AbstractTransition& t : ad.transitions) {
        if (t.s == goal_index) continue;
        const long long key =
            static_cast<long long>(t.s) * gridworld::kActionCount + static_cast<int>(t.a);
        auto [it, fresh] = first_successor.try_emplace(key, t.s_next);
        if (!fresh && it->second != t.s_next) violating.insert(key);
    }
    if (first_successor.empty()) return 0.0;
    return static_cast<double>(violating.size()) / static_cast<double>(first_successor.size());
}

FeatureExtractor object_positions_extractor(CellKind kind, Color color) {
    return [kind, color](const LowLevelState& x) {
        std::string out;
        for (int c = 0; c < x.width; ++c)
            for (int r = 0; r < x.height; ++r) {
                const Cell& cell = x.at({c, r});
                if (cell.kind == kind && cell.color == color)
                    out += std::to_string(c) + "," + std::to_string(r) + ";";
            }
        if (x.carrying && x.carrying->kind == kind && x.carrying->color == color)
            out += "carried;";
        if (out.empty()) out = "absent";
        return out;
    };
}

FeatureExtractor agent_pos_extractor() {
    return [](const LowLevelState& x) {
        return std::to_string(x.agent_pos.col) + "," + std::to_string(x.agent_pos.row);
    };
}

namespace {

struct MiResult {
    double mi = 0;
    bool low_power = false;
};

MiResult plug_in_mi(const std::vector<std::pair<std::string, std::string>>& pairs) {
    std::map<std::string, long> margin_a, margin_b;
    std::map<std::pair<std::string, std::string>, long> joint;
    for (const auto& p : pairs) {
        ++margin_a[p.first];
        ++margin_b[p.second];
        ++joint[p];
    }
    const double n = static_cast<double>(pairs.size());
    double mi = 0;
    for (const auto& [key, count] : joint) {
        const double pxy = count / n;
        const double px = margin_a[key.first] / n;
        const double py = margin_b[key.second] / n;
        mi += pxy * std::log(pxy / (px * py));
    }
    MiResult out;
    out.mi = std::max(0.0, mi);
    for (const auto& [va, ca] : margin_a)
        for (const auto& [vb, cb] : margin_b)
            if (static_cast<double>(ca) * cb / n < 5.0) {
                out.low_power = true;
                return out;
            }
    return out;
}

IndependenceReport independence_streaming(
    const std::function<void(const std::function<void(const LowLevelState&)>&)>& for_each_state,
    const Goal& g, const AbstractionConfig& cfg, const FeatureExtractor& discarded,
    double threshold) {
    const FeatureSet kept = cfg.for_kind(g.kind);
    std::vector<std::pair<std::string, std::string>> vs_goal, vs_kept;
    std::size_t n = 0;
    for_each_state([&](const LowLevelState& x) {
        std::string v = discarded(x);
        vs_goal.emplace_back(v, goals::psi(x, g) ? "1" : "0");
        vs_kept.emplace_back(std::move(v), serialize_features(x, g, kept));
        ++n;
    });
    if (n == 0) throw InputError("feature_independence_check: no states");
    const MiResult goal_mi = plug_in_mi(vs_goal);
    const MiResult kept_mi = plug_in_mi(vs_kept);

    IndependenceReport report;
    report.n_states = n;
    report.threshold = threshold;
    report.mi_goal = goal_mi.mi;
    report.mi_kept = kept_mi.mi;
    report.low_power_goal = goal_mi.low_power;
    report.low_power_kept = kept_mi.low_power;
    report.goal_independent = goal_mi.mi < threshold;
    report.kept_independent = kept_mi.mi < threshold;
    return report;
}

} // namespace

IndependenceReport feature_independence_check(const Dataset& d, const Goal& g,
                                              const AbstractionConfig& cfg,
                                              const FeatureExtractor& discarded,
                                              double threshold) {
    if (d.n_transitions() == 0) throw InputError("feature_independence_check: empty dataset");
    return independence_streaming(
        [&](const std::function<void(const LowLevelState&)>& visit) {
            d.for_each_transition([&](const datastore::TransitionView& t) {
                visit(t.x);
                const auto& steps = d.episodes[static_cast<std::size_t>(t.episode_id)].steps;
                if (t.step_index + 1 == static_cast<int>(steps.size())) visit(t.x_next);
            });
        },
        g, cfg, discarded, threshold);
}

IndependenceReport feature_independence_check(const std::vector<LowLevelState>& states,
                                              const Goal& g, const AbstractionConfig& cfg,
                                              const FeatureExtractor& discarded,
                                              double threshold) {
    if (states.empty()) throw InputError("feature_independence_check: empty state sample");
    return independence_streaming(
        [&](const std::function<void(const LowLevelState&)>& visit) {
            for (const LowLevelState& x : states) visit(x);
        },
        g, cfg, discarded, threshold);
}

} // namespace gcrl::abstraction
