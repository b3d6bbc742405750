#include "gcrl/goals.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "gcrl/rng.hpp"

namespace gcrl::goals {

using gridworld::Cell;
using gridworld::Direction;

const char* to_string(GoalKind k) {
    switch (k) {
        case GoalKind::go_to_tile: return "go_to_tile";
        case GoalKind::go_to_object: return "go_to_object";
        case GoalKind::pick_up: return "pick_up";
    }
    return "go_to_tile";
}

GoalKind goal_kind_from_string(const std::string& s) {
    if (s == "go_to_tile") return GoalKind::go_to_tile;
    if (s == "go_to_object") return GoalKind::go_to_object;
    if (s == "pick_up") return GoalKind::pick_up;
    throw ParseError("unknown goal kind: '" + s + "'");
}

bool Goal::same_target(const Goal& other) const {
    if (kind != other.kind) return false;
    if (kind == GoalKind::go_to_tile) return tile == other.tile;
    return color == other.color && object == other.object;
}

namespace {

const std::regex kTilePattern(
    R"(^\s*go\s+to\s+(?:the\s+)?(?:tile|position)\s*\(\s*(\d+)\s*,\s*(\d+)\s*\)\s*\.?\s*$)",
    std::regex::icase);
const std::regex kGoToObjectPattern(
    R"(^\s*go\s+to\s+(?:a\s+|an\s+|the\s+)?(red|green|blue|purple|yellow|grey|gray)\s+(key|ball|box)\s*\.?\s*$)",
    std::regex::icase);
const std::regex kPickUpPattern(
    R"(^\s*pick\s+up\s+(?:a\s+|an\s+|the\s+)?(red|green|blue|purple|yellow|grey|gray)\s+(key|ball|box)\s*\.?\s*$)",
    std::regex::icase);

} // namespace

Goal parse_goal(const std::string& text) {
    std::smatch m;
    Goal g;
    g.surface_text = text;
    if (std::regex_match(text, m, kTilePattern)) {
        g.kind = GoalKind::go_to_tile;
        g.tile = {std::stoi(m[1].str()), std::stoi(m[2].str())};
        return g;
    }
    if (std::regex_match(text, m, kGoToObjectPattern)) {
        g.kind = GoalKind::go_to_object;
        g.color = gridworld::color_from_string(m[1].str());
        g.object = gridworld::cell_kind_from_string(m[2].str());
        return g;
    }
    if (std::regex_match(text, m, kPickUpPattern)) {
        g.kind = GoalKind::pick_up;
        g.color = gridworld::color_from_string(m[1].str());
        g.object = gridworld::cell_kind_from_string(m[2].str());
        return g;
    }
    throw UnsupportedGoalError("unsupported goal: '" + text + "'");
}

std::string render_goal(const Goal& g) {
    std::ostringstream out;
    switch (g.kind) {
        case GoalKind::go_to_tile:
            out << "go to the tile (" << g.tile.col << ", " << g.tile.row << ")";
            break;
        case GoalKind::go_to_object:
            out << "go to the " << gridworld::to_string(g.color) << " "
                << gridworld::to_string(g.object);
            break;
        case GoalKind::pick_up:
            out << "pick up the " << gridworld::to_string(g.color) << " "
                << gridworld::to_string(g.object);
            break;
    }
    return out.str();
}

bool psi(const LowLevelState& x, const Goal& g) {
    switch (g.kind) {
        case GoalKind::go_to_tile: {
            if (!x.in_bounds(g.tile))
                throw InfeasibleGoalError("goal tile (" + std::to_string(g.tile.col) + ", " +
                                          std::to_string(g.tile.row) + ") is out of bounds");
            if (x.at(g.tile).kind == gridworld::CellKind::wall)
                throw InfeasibleGoalError("goal tile (" + std::to_string(g.tile.col) + ", " +
                                          std::to_string(g.tile.row) + ") is a wall");
            return x.agent_pos == g.tile;
        }
        case GoalKind::go_to_object: {
            const GridPos d = gridworld::dir_delta(x.agent_dir);
            const GridPos facing{x.agent_pos.col + d.col, x.agent_pos.row + d.row};
            if (!x.in_bounds(facing)) return false;
            const Cell& c = x.at(facing);
            return c.kind == g.object && c.color == g.color;
        }
        case GoalKind::pick_up:
            return x.carrying && x.carrying->kind == g.object && x.carrying->color == g.color;
    }
    return false;
}

long goal_set_size(const Environment& env, const Goal& g, std::size_t cap) {
    psi(env.base_state(), g); // surfaces infeasible tile goals up front
    long count = 0;
    for (const LowLevelState& x : gridworld::enumerate_reachable(env, cap)) {
        if (psi(x, g)) ++count;
    }
    return count;
}

std::vector<Goal> load_goal_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open goal file: " + path);
    std::vector<Goal> goals;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        try {
            goals.push_back(parse_goal(line));
        } catch (const UnsupportedGoalError& e) {
            throw ParseError(e.what(), line_no);
        }
    }
    return goals;
}

GoalSplit sample_goal_split(const Environment& env, GoalKind kind, int n_train, int n_test,
                            std::uint64_t seed) {
    if (n_train < 0 || n_test < 0) throw ConfigError("goal split sizes must be non-negative");
    Rng rng(seed);
    std::vector<Goal> pool;

    if (kind == GoalKind::go_to_tile) {
        for (const GridPos& p : env.start_cells()) {
            Goal g;
            g.kind = GoalKind::go_to_tile;
            g.tile = p;
            g.surface_text = render_goal(g);
            pool.push_back(std::move(g));
        }
    } else {
        std::set<std::pair<Color, CellKind>> targets;
        const LowLevelState& base = env.base_state();
        for (const Cell& c : base.grid) {
            if (c.kind == CellKind::key || c.kind == CellKind::ball || c.kind == CellKind::box)
                targets.insert({c.color, c.kind});
        }
        for (const auto& [color, object] : targets) {
            Goal g;
            g.kind = kind;
            g.color = color;
            g.object = object;
            g.surface_text = render_goal(g);
            pool.push_back(std::move(g));
        }
    }

    const std::size_t need = static_cast<std::size_t>(n_train) + static_cast<std::size_t>(n_test);
    if (pool.size() < need)
        throw ConfigError("environment offers " + std::to_string(pool.size()) +
                          " distinct goal targets, requested " + std::to_string(need));
    // Seeded partial Fisher-Yates; first n_train go to train, next n_test to test.
    for (std::size_t i = 0; i < need; ++i) {
        const std::size_t j =
            i + rng.below(static_cast<std::uint32_t>(pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    GoalSplit split;
    split.train.assign(pool.begin(), pool.begin() + n_train);
    split.test.assign(pool.begin() + n_train, pool.begin() + static_cast<long>(need));
    return split;
}

} // namespace gcrl::goals
