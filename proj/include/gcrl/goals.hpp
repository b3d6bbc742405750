#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gcrl/gridworld.hpp"

namespace gcrl::goals {

using gridworld::CellKind;
using gridworld::Color;
using gridworld::Environment;
using gridworld::GridPos;
using gridworld::LowLevelState;

enum class GoalKind : std::uint8_t { go_to_tile, go_to_object, pick_up };

const char* to_string(GoalKind k);
GoalKind goal_kind_from_string(const std::string& s);

// A parsed natural-language instruction. The surface text is preserved;
// the structured fields drive evaluation and abstraction.
struct Goal {
    std::string surface_text;
    GoalKind kind = GoalKind::go_to_tile;
    GridPos tile;                       // go_to_tile
    Color color = Color::none;          // object goals
    CellKind object = CellKind::key;    // object goals

    // Same structured target, surface text ignored.
    bool same_target(const Goal& other) const;
};

// Accepted instruction shapes (case-insensitive, whitespace-tolerant):
//   "go to the tile (4, 7)"     (also "position" instead of "tile")
//   "go to a blue key"
//   "pick up the blue key"
// Throws UnsupportedGoalError for anything else.
Goal parse_goal(const std::string& text);

// Canonical surface text for a goal's structured fields.
std::string render_goal(const Goal& g);

// The goal-satisfaction predicate. Pure in (x, g).
//   go_to_tile:   agent stands on the tile
//   go_to_object: agent faces an adjacent cell holding the object
//   pick_up:      agent carries the object
// Throws InfeasibleGoalError when a tile goal targets a wall or lies
// outside the grid.
bool psi(const LowLevelState& x, const Goal& g);

// |{x : psi(x, g)}| over the reachable state space, by exhaustive
// enumeration. Throws ResourceError past the cap.
long goal_set_size(const Environment& env, const Goal& g, std::size_t cap = 2'000'000);

// One instruction per line; '#' starts a comment line; blank lines skipped.
std::vector<Goal> load_goal_file(const std::string& path);

struct GoalSplit {
    std::vector<Goal> train;
    std::vector<Goal> test;
};

// Seeded split with disjoint targets. Tile goals draw distinct empty
// cells; object goals draw distinct (color, kind) pairs present in the
// environment. Throws ConfigError when the environment cannot supply
// enough distinct targets.
GoalSplit sample_goal_split(const Environment& env, GoalKind kind, int n_train, int n_test,
                            std::uint64_t seed);

} // namespace gcrl::goals
