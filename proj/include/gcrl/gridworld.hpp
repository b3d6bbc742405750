#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gcrl/errors.hpp"

namespace gcrl::gridworld {

// ---------------------------------------------------------------------------
// Core enums
// ---------------------------------------------------------------------------

enum class CellKind : std::uint8_t { empty, wall, door, key, ball, box, goal_tile };
enum class Color : std::uint8_t { red, green, blue, purple, yellow, grey, none };
enum class DoorState : std::uint8_t { open, closed, locked, not_applicable };

// east=0, south=1, west=2, north=3; fixed for serialization.
enum class Direction : std::uint8_t { east = 0, south = 1, west = 2, north = 3 };

// Canonical order; doubles as the argmax tie-break order everywhere.
enum class Action : std::uint8_t { turn_left, turn_right, forward, pickup, drop, toggle };

inline constexpr int kActionCount = 6;
inline constexpr std::array<Action, 6> kAllActions = {
    Action::turn_left, Action::turn_right, Action::forward,
    Action::pickup,    Action::drop,       Action::toggle};

const char* to_string(CellKind k);
const char* to_string(Color c);
const char* to_string(DoorState d);
const char* to_string(Direction d);
const char* to_string(Action a);

CellKind cell_kind_from_string(const std::string& s);
Color color_from_string(const std::string& s);
DoorState door_state_from_string(const std::string& s);
// Case-insensitive, whitespace-trimmed; returns nullopt for unknown names.
std::optional<Action> action_from_string(const std::string& s);

// ---------------------------------------------------------------------------
// Grid contents
// ---------------------------------------------------------------------------

struct Cell {
    CellKind kind = CellKind::empty;
    Color color = Color::none;
    DoorState door = DoorState::not_applicable;

    bool operator==(const Cell&) const = default;
};

inline Cell make_empty() { return {}; }
inline Cell make_wall() { return {CellKind::wall, Color::none, DoorState::not_applicable}; }
inline Cell make_door(Color c, DoorState s) { return {CellKind::door, c, s}; }
inline Cell make_object(CellKind k, Color c) { return {k, c, DoorState::not_applicable}; }

struct GridPos {
    int col = 0;
    int row = 0;
    auto operator<=>(const GridPos&) const = default;
};

// Full low-level observation: grid contents, agent pose, carried item.
struct LowLevelState {
    int width = 0;
    int height = 0;
    std::vector<Cell> grid; // row-major, size width*height
    GridPos agent_pos;
    Direction agent_dir = Direction::east;
    std::optional<Cell> carrying;

    bool in_bounds(GridPos p) const {
        return p.col >= 0 && p.col < width && p.row >= 0 && p.row < height;
    }
    Cell& at(GridPos p) { return grid[static_cast<std::size_t>(p.row) * width + p.col]; }
    const Cell& at(GridPos p) const {
        return grid[static_cast<std::size_t>(p.row) * width + p.col];
    }

    bool operator==(const LowLevelState&) const = default;
};

GridPos dir_delta(Direction d);
Direction rotate_left(Direction d);
Direction rotate_right(Direction d);

// Throws IntegrityError on any violated state invariant.
void check_invariants(const LowLevelState& s);

// Compact canonical byte encoding; equal strings iff equal states.
std::string encode_state(const LowLevelState& s);

// ---------------------------------------------------------------------------
// Dynamics
// ---------------------------------------------------------------------------

struct StepResult {
    LowLevelState state;
    bool valid = true;
};

// Deterministic transition. Invalid actions leave the state unchanged
// and are flagged valid=false; turns are always valid.
StepResult step(const LowLevelState& s, Action a);

// ---------------------------------------------------------------------------
// Environment generation
// ---------------------------------------------------------------------------

enum class Layout : std::uint8_t { A, B, C, custom };
enum class DoorPolicy : std::uint8_t { open, locked };

const char* to_string(Layout l);
const char* to_string(DoorPolicy p);
Layout layout_from_string(const std::string& s);
DoorPolicy door_policy_from_string(const std::string& s);

struct Distractor {
    CellKind kind = CellKind::ball;
    Color color = Color::grey;
    GridPos pos;
    bool operator==(const Distractor&) const = default;
};

struct EnvSpec {
    Layout layout = Layout::custom;
    int width = 0;
    int height = 0;
    int rooms = 1;
    DoorPolicy door_policy = DoorPolicy::open;
    std::vector<Distractor> distractors;
    std::uint64_t seed = 0;

    static EnvSpec layout_a(std::uint64_t seed);
    static EnvSpec layout_b(std::uint64_t seed);
    static EnvSpec layout_c(std::uint64_t seed);
    static EnvSpec custom(int width, int height, int rooms, DoorPolicy policy,
                          std::uint64_t seed);

    bool operator==(const EnvSpec&) const = default;
};

// A generated environment: the populated grid template plus the initial
// state sampler. Instances are immutable values.
class Environment {
public:
    Environment(EnvSpec spec, LowLevelState base, std::vector<GridPos> start_cells);

    const EnvSpec& spec() const { return spec_; }
    const LowLevelState& base_state() const { return base_; }
    const std::vector<GridPos>& start_cells() const { return start_cells_; }

    // Draws from p0: agent placed uniformly on the start cells with a
    // uniform facing direction.
    LowLevelState sample_initial(std::uint64_t sub_seed) const;

    // Every (start cell, direction) pair; used by exhaustive oracles.
    std::vector<LowLevelState> all_initial_states() const;

private:
    EnvSpec spec_;
    LowLevelState base_;
    std::vector<GridPos> start_cells_;
};

// Builds the environment for a spec. Throws ConstructionError naming the
// offending field when the spec is infeasible.
Environment generate_env(const EnvSpec& spec);

// ---------------------------------------------------------------------------
// Search oracle
// ---------------------------------------------------------------------------

struct BfsLimits {
    std::size_t max_states = 2'000'000;
};

struct BfsResult {
    bool reachable = false;
    std::vector<Action> plan; // empty when start already satisfies
};

// Breadth-first search over the exact deterministic state graph.
// Throws ResourceError when the explored set exceeds the cap.
BfsResult bfs_plan(const LowLevelState& start,
                   const std::function<bool(const LowLevelState&)>& satisfied,
                   std::span<const Action> actions = kAllActions,
                   const BfsLimits& limits = {});

// Minimum action count to reach a satisfying state; nullopt if unreachable.
std::optional<int> bfs_optimal_steps(const LowLevelState& start,
                                     const std::function<bool(const LowLevelState&)>& satisfied,
                                     std::span<const Action> actions = kAllActions,
                                     const BfsLimits& limits = {});

// All states reachable from the environment's initial states under the
// given action set. Throws ResourceError past the cap.
std::vector<LowLevelState> enumerate_reachable(const Environment& env,
                                               std::size_t cap = 2'000'000,
                                               std::span<const Action> actions = kAllActions);

} // namespace gcrl::gridworld
