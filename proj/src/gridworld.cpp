#include "gcrl/gridworld.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <map>
#include <unordered_set>

#include "gcrl/rng.hpp"

namespace gcrl::gridworld {

// ---------------------------------------------------------------------------
// Enum names
// ---------------------------------------------------------------------------

const char* to_string(CellKind k) {
    switch (k) {
        case CellKind::empty: return "empty";
        case CellKind::wall: return "wall";
        case CellKind::door: return "door";
        case CellKind::key: return "key";
        case CellKind::ball: return "ball";
        case CellKind::box: return "box";
        case CellKind::goal_tile: return "goal-tile";
    }
    return "empty";
}

const char* to_string(Color c) {
    switch (c) {
        case Color::red: return "red";
        case Color::green: return "green";
        case Color::blue: return "blue";
        case Color::purple: return "purple";
        case Color::yellow: return "yellow";
        case Color::grey: return "grey";
        case Color::none: return "none";
    }
    return "none";
}

const char* to_string(DoorState d) {
    switch (d) {
        case DoorState::open: return "open";
        case DoorState::closed: return "closed";
        case DoorState::locked: return "locked";
        case DoorState::not_applicable: return "n/a";
    }
    return "n/a";
}

const char* to_string(Direction d) {
    switch (d) {
        case Direction::east: return "east";
        case Direction::south: return "south";
        case Direction::west: return "west";
        case Direction::north: return "north";
    }
    return "east";
}

const char* to_string(Action a) {
    switch (a) {
        case Action::turn_left: return "turn_left";
        case Action::turn_right: return "turn_right";
        case Action::forward: return "forward";
        case Action::pickup: return "pickup";
        case Action::drop: return "drop";
        case Action::toggle: return "toggle";
    }
    return "turn_left";
}

namespace {

std::string lower_trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    std::string out = s.substr(b, e - b);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

} // namespace

CellKind cell_kind_from_string(const std::string& s) {
    const std::string v = lower_trim(s);
    for (auto k : {CellKind::empty, CellKind::wall, CellKind::door, CellKind::key,
                   CellKind::ball, CellKind::box, CellKind::goal_tile}) {
        if (v == to_string(k)) return k;
    }
    throw ParseError("unknown cell kind: '" + s + "'");
}

Color color_from_string(const std::string& s) {
    std::string v = lower_trim(s);
    if (v == "gray") v = "grey";
    for (auto c : {Color::red, Color::green, Color::blue, Color::purple, Color::yellow,
                   Color::grey, Color::none}) {
        if (v == to_string(c)) return c;
    }
    throw ParseError("unknown color: '" + s + "'");
}

DoorState door_state_from_string(const std::string& s) {
    const std::string v = lower_trim(s);
    for (auto d : {DoorState::open, DoorState::closed, DoorState::locked,
                   DoorState::not_applicable}) {
        if (v == to_string(d)) return d;
    }
    throw ParseError("unknown door state: '" + s + "'");
}

std::optional<Action> action_from_string(const std::string& s) {
    const std::string v = lower_trim(s);
    for (auto a : kAllActions) {
        if (v == to_string(a)) return a;
    }
    return std::nullopt;
}

const char* to_string(Layout l) {
    switch (l) {
        case Layout::A: return "A";
        case Layout::B: return "B";
        case Layout::C: return "C";
        case Layout::custom: return "custom";
    }
    return "custom";
}

const char* to_string(DoorPolicy p) {
    return p == DoorPolicy::open ? "open" : "locked";
}

Layout layout_from_string(const std::string& s) {
    const std::string v = lower_trim(s);
    if (v == "a") return Layout::A;
    if (v == "b") return Layout::B;
    if (v == "c") return Layout::C;
    if (v == "custom") return Layout::custom;
    throw ParseError("unknown layout: '" + s + "'");
}

DoorPolicy door_policy_from_string(const std::string& s) {
    const std::string v = lower_trim(s);
    if (v == "open") return DoorPolicy::open;
    if (v == "locked") return DoorPolicy::locked;
    throw ParseError("unknown door policy: '" + s + "'");
}

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

GridPos dir_delta(Direction d) {
    switch (d) {
        case Direction::east: return {1, 0};
        case Direction::south: return {0, 1};
        case Direction::west: return {-1, 0};
        case Direction::north: return {0, -1};
    }
    return {1, 0};
}

Direction rotate_left(Direction d) {
    return static_cast<Direction>((static_cast<int>(d) + 3) % 4);
}

Direction rotate_right(Direction d) {
    return static_cast<Direction>((static_cast<int>(d) + 1) % 4);
}

void check_invariants(const LowLevelState& s) {
    if (s.width < 3 || s.height < 3 ||
        s.grid.size() != static_cast<std::size_t>(s.width) * s.height) {
        throw IntegrityError("state grid dimensions inconsistent");
    }
    for (int c = 0; c < s.width; ++c) {
        if (s.at({c, 0}).kind != CellKind::wall || s.at({c, s.height - 1}).kind != CellKind::wall)
            throw IntegrityError("state border is not walled");
    }
    for (int r = 0; r < s.height; ++r) {
        if (s.at({0, r}).kind != CellKind::wall || s.at({s.width - 1, r}).kind != CellKind::wall)
            throw IntegrityError("state border is not walled");
    }
    for (const Cell& cell : s.grid) {
        const bool colorless = cell.kind == CellKind::empty || cell.kind == CellKind::wall;
        if (colorless != (cell.color == Color::none))
            throw IntegrityError("cell color/kind mismatch");
        if ((cell.kind == CellKind::door) != (cell.door != DoorState::not_applicable))
            throw IntegrityError("cell door_state/kind mismatch");
    }
    if (!s.in_bounds(s.agent_pos)) throw IntegrityError("agent out of bounds");
    const Cell& under = s.at(s.agent_pos);
    const bool standable = under.kind == CellKind::empty || under.kind == CellKind::goal_tile ||
                           (under.kind == CellKind::door && under.door == DoorState::open);
    if (!standable) throw IntegrityError("agent standing on a blocked cell");
    if (s.carrying) {
        const CellKind k = s.carrying->kind;
        if (k != CellKind::key && k != CellKind::ball && k != CellKind::box)
            throw IntegrityError("carried item is not a portable object");
    }
}

std::string encode_state(const LowLevelState& s) {
    std::string out;
    out.reserve(s.grid.size() + 8);
    out.push_back(static_cast<char>(s.width));
    out.push_back(static_cast<char>(s.height));
    for (const Cell& c : s.grid) {
        // kind(3 bits) | color(3 bits) | door(2 bits) packs into one byte
        out.push_back(static_cast<char>(static_cast<unsigned>(c.kind) |
                                        (static_cast<unsigned>(c.color) << 3) |
                                        (static_cast<unsigned>(c.door) << 6)));
    }
    out.push_back(static_cast<char>(s.agent_pos.col));
    out.push_back(static_cast<char>(s.agent_pos.row));
    out.push_back(static_cast<char>(s.agent_dir));
    if (s.carrying) {
        out.push_back(static_cast<char>(static_cast<unsigned>(s.carrying->kind) |
                                        (static_cast<unsigned>(s.carrying->color) << 3)));
    } else {
        out.push_back(static_cast<char>(0xFF));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dynamics
// ---------------------------------------------------------------------------

namespace {

bool walkable(const Cell& c) {
    return c.kind == CellKind::empty || c.kind == CellKind::goal_tile ||
           (c.kind == CellKind::door && c.door == DoorState::open);
}

bool portable(const Cell& c) {
    return c.kind == CellKind::key || c.kind == CellKind::ball || c.kind == CellKind::box;
}

} // namespace

StepResult step(const LowLevelState& s, Action a) {
    StepResult out{s, true};
    LowLevelState& n = out.state;
    const GridPos d = dir_delta(s.agent_dir);
    const GridPos facing{s.agent_pos.col + d.col, s.agent_pos.row + d.row};

    switch (a) {
        case Action::turn_left:
            n.agent_dir = rotate_left(s.agent_dir);
            return out;
        case Action::turn_right:
            n.agent_dir = rotate_right(s.agent_dir);
            return out;
        case Action::forward:
            if (s.in_bounds(facing) && walkable(s.at(facing))) {
                n.agent_pos = facing;
                return out;
            }
            break;
        case Action::pickup:
            if (!s.carrying && s.in_bounds(facing) && portable(s.at(facing))) {
                n.carrying = s.at(facing);
                n.at(facing) = make_empty();
                return out;
            }
            break;
        case Action::drop:
            if (s.carrying && s.in_bounds(facing) && s.at(facing).kind == CellKind::empty) {
                n.at(facing) = *s.carrying;
                n.carrying.reset();
                return out;
            }
            break;
        case Action::toggle:
            if (s.in_bounds(facing) && s.at(facing).kind == CellKind::door) {
                const Cell& door = s.at(facing);
                if (door.door == DoorState::closed) {
                    n.at(facing).door = DoorState::open;
                    return out;
                }
                if (door.door == DoorState::open) {
                    n.at(facing).door = DoorState::closed;
                    return out;
                }
                // Locked: opens only with a matching-color key in hand.
                if (door.door == DoorState::locked && s.carrying &&
                    s.carrying->kind == CellKind::key && s.carrying->color == door.color) {
                    n.at(facing).door = DoorState::open;
                    return out;
                }
            }
            break;
    }
    out.valid = false;
    out.state = s;
    return out;
}

// ---------------------------------------------------------------------------
// Environment generation
// ---------------------------------------------------------------------------

EnvSpec EnvSpec::layout_a(std::uint64_t seed) {
    return {Layout::A, 22, 22, 9, DoorPolicy::open, {}, seed};
}

EnvSpec EnvSpec::layout_b(std::uint64_t seed) {
    return {Layout::B, 8, 8, 2, DoorPolicy::locked, {}, seed};
}

EnvSpec EnvSpec::layout_c(std::uint64_t seed) {
    return {Layout::C, 22, 22, 9, DoorPolicy::locked, {}, seed};
}

EnvSpec EnvSpec::custom(int width, int height, int rooms, DoorPolicy policy,
                        std::uint64_t seed) {
    return {Layout::custom, width, height, rooms, policy, {}, seed};
}

namespace {

constexpr std::array<Color, 6> kPalette = {Color::red,    Color::green, Color::blue,
                                           Color::purple, Color::yellow, Color::grey};

struct RoomGrid {
    int nx = 1, ny = 1;                  // rooms along each axis
    std::vector<int> wall_cols;          // interior wall columns
    std::vector<int> wall_rows;          // interior wall rows
    // Column/row spans per room index along each axis: [first, last]
    std::vector<std::pair<int, int>> col_span;
    std::vector<std::pair<int, int>> row_span;

    int room_index(int rx, int ry) const { return ry * nx + rx; }
    int room_of(GridPos p) const {
        int rx = 0, ry = 0;
        for (std::size_t i = 0; i < col_span.size(); ++i)
            if (p.col >= col_span[i].first && p.col <= col_span[i].second) rx = static_cast<int>(i);
        for (std::size_t i = 0; i < row_span.size(); ++i)
            if (p.row >= row_span[i].first && p.row <= row_span[i].second) ry = static_cast<int>(i);
        return room_index(rx, ry);
    }
};

// Splits `rooms` as nx*ny with the most-square factorization, wider axis
// taking the larger factor.
RoomGrid plan_rooms(int width, int height, int rooms) {
    if (rooms < 1) throw ConstructionError("rooms: must be at least 1");
    int p = 1;
    for (int f = 1; f * f <= rooms; ++f)
        if (rooms % f == 0) p = f;
    int q = rooms / p;
    RoomGrid rg;
    rg.nx = width >= height ? q : p;
    rg.ny = width >= height ? p : q;

    auto cut = [](int extent, int k) {
        std::vector<int> walls;
        for (int i = 1; i < k; ++i) walls.push_back(i * (extent - 1) / k);
        return walls;
    };
    rg.wall_cols = cut(width, rg.nx);
    rg.wall_rows = cut(height, rg.ny);

    auto spans = [](int extent, const std::vector<int>& walls) {
        std::vector<std::pair<int, int>> out;
        int first = 1;
        for (int w : walls) {
            out.emplace_back(first, w - 1);
            first = w + 1;
        }
        out.emplace_back(first, extent - 2);
        return out;
    };
    rg.col_span = spans(width, rg.wall_cols);
    rg.row_span = spans(height, rg.wall_rows);

    for (const auto& [a, b] : rg.col_span)
        if (b - a + 1 < 2) throw ConstructionError("rooms: room width below 2 cells");
    for (const auto& [a, b] : rg.row_span)
        if (b - a + 1 < 2) throw ConstructionError("rooms: room height below 2 cells");
    return rg;
}

struct DoorSite {
    GridPos pos;
    int room_a = 0; // room on the near side (left/top)
    int room_b = 0; // room on the far side
};

std::vector<GridPos> empty_cells_in_room(const LowLevelState& s, const RoomGrid& rg, int room) {
    std::vector<GridPos> out;
    for (int r = 1; r < s.height - 1; ++r)
        for (int c = 1; c < s.width - 1; ++c) {
            GridPos p{c, r};
            if (s.at(p).kind == CellKind::empty && rg.room_of(p) == room) out.push_back(p);
        }
    return out;
}

} // namespace

Environment generate_env(const EnvSpec& spec_in) {
    EnvSpec spec = spec_in;
    // Built-in layouts pin their geometry.
    if (spec.layout == Layout::A || spec.layout == Layout::C) {
        if (spec.width == 0) spec.width = 22;
        if (spec.height == 0) spec.height = 22;
        if (spec.rooms == 0) spec.rooms = 9;
        if (spec.width != 22 || spec.height != 22)
            throw ConstructionError(std::string("width/height: layout ") + to_string(spec.layout) +
                                    " requires 22x22");
        if (spec.rooms != 9)
            throw ConstructionError(std::string("rooms: layout ") + to_string(spec.layout) +
                                    " requires 9 rooms");
        spec.door_policy = spec.layout == Layout::A ? DoorPolicy::open : DoorPolicy::locked;
    } else if (spec.layout == Layout::B) {
        if (spec.width == 0) spec.width = 8;
        if (spec.height == 0) spec.height = 8;
        if (spec.rooms == 0) spec.rooms = 2;
        if (spec.rooms != 2) throw ConstructionError("rooms: layout B requires 2 rooms");
        spec.door_policy = DoorPolicy::locked;
    }
    if (spec.width < 5 || spec.height < 5)
        throw ConstructionError("width/height: minimum grid is 5x5");

    const RoomGrid rg = plan_rooms(spec.width, spec.height, spec.rooms);
    Rng rng(spec.seed);

    LowLevelState base;
    base.width = spec.width;
    base.height = spec.height;
    base.grid.assign(static_cast<std::size_t>(spec.width) * spec.height, make_empty());
    for (int c = 0; c < spec.width; ++c) {
        base.at({c, 0}) = make_wall();
        base.at({c, spec.height - 1}) = make_wall();
    }
    for (int r = 0; r < spec.height; ++r) {
        base.at({0, r}) = make_wall();
        base.at({spec.width - 1, r}) = make_wall();
    }
    for (int wc : rg.wall_cols)
        for (int r = 1; r < spec.height - 1; ++r) base.at({wc, r}) = make_wall();
    for (int wr : rg.wall_rows)
        for (int c = 1; c < spec.width - 1; ++c) base.at({c, wr}) = make_wall();

    // One door per shared wall; positions and colors are seeded draws in a
    // fixed order (vertical walls first, row-major) so environments are
    // bit-identical for equal specs.
    std::vector<DoorSite> doors;
    for (int ry = 0; ry < rg.ny; ++ry)
        for (std::size_t wi = 0; wi < rg.wall_cols.size(); ++wi) {
            const auto [top, bot] = rg.row_span[ry];
            const int row = top + static_cast<int>(rng.below(static_cast<std::uint32_t>(bot - top + 1)));
            doors.push_back({{rg.wall_cols[wi], row}, rg.room_index(static_cast<int>(wi), ry),
                             rg.room_index(static_cast<int>(wi) + 1, ry)});
        }
    for (std::size_t wi = 0; wi < rg.wall_rows.size(); ++wi)
        for (int rx = 0; rx < rg.nx; ++rx) {
            const auto [left, right] = rg.col_span[rx];
            const int col = left + static_cast<int>(rng.below(static_cast<std::uint32_t>(right - left + 1)));
            doors.push_back({{col, rg.wall_rows[wi]}, rg.room_index(rx, static_cast<int>(wi)),
                             rg.room_index(rx, static_cast<int>(wi) + 1)});
        }

    const DoorState initial_door =
        spec.door_policy == DoorPolicy::open ? DoorState::open : DoorState::locked;
    std::vector<Color> door_colors;
    for (const DoorSite& site : doors) {
        const Color color = kPalette[rng.below(static_cast<std::uint32_t>(kPalette.size()))];
        door_colors.push_back(color);
        base.at(site.pos) = make_door(color, initial_door);
    }

    // Locked multi-room layouts distribute matching keys along a seeded
    // spanning tree of the room graph: the key for each tree door lands in
    // the room nearer the root, so unlocking can proceed outward.
    if (spec.door_policy == DoorPolicy::locked && spec.layout != Layout::B && spec.rooms > 1) {
        std::vector<int> order(doors.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.below(static_cast<std::uint32_t>(i))]);

        std::vector<bool> room_seen(static_cast<std::size_t>(spec.rooms), false);
        room_seen[0] = true;
        bool grew = true;
        while (grew) {
            grew = false;
            for (int di : order) {
                const DoorSite& site = doors[static_cast<std::size_t>(di)];
                int from = -1, to = -1;
                if (room_seen[static_cast<std::size_t>(site.room_a)] &&
                    !room_seen[static_cast<std::size_t>(site.room_b)]) {
                    from = site.room_a;
                    to = site.room_b;
                } else if (room_seen[static_cast<std::size_t>(site.room_b)] &&
                           !room_seen[static_cast<std::size_t>(site.room_a)]) {
                    from = site.room_b;
                    to = site.room_a;
                }
                if (from < 0) continue;
                auto cells = empty_cells_in_room(base, rg, from);
                if (cells.empty()) throw ConstructionError("rooms: no space left for a key");
                const GridPos kp = cells[rng.below(static_cast<std::uint32_t>(cells.size()))];
                base.at(kp) = make_object(CellKind::key, door_colors[static_cast<std::size_t>(di)]);
                room_seen[static_cast<std::size_t>(to)] = true;
                grew = true;
            }
        }
    }

    // Layout B: key in room 1, target object in room 2, locked door between.
    if (spec.layout == Layout::B) {
        const Color door_color = door_colors.at(0);
        auto room1 = empty_cells_in_room(base, rg, 0);
        const GridPos key_pos = room1[rng.below(static_cast<std::uint32_t>(room1.size()))];
        base.at(key_pos) = make_object(CellKind::key, door_color);

        const CellKind target_kind = rng.below(2) == 0 ? CellKind::ball : CellKind::box;
        const Color target_color = kPalette[rng.below(static_cast<std::uint32_t>(kPalette.size()))];
        auto room2 = empty_cells_in_room(base, rg, 1);
        const GridPos obj_pos = room2[rng.below(static_cast<std::uint32_t>(room2.size()))];
        base.at(obj_pos) = make_object(target_kind, target_color);
    }

    for (std::size_t i = 0; i < spec.distractors.size(); ++i) {
        const Distractor& d = spec.distractors[i];
        const std::string field = "distractors[" + std::to_string(i) + "]";
        if (!base.in_bounds(d.pos)) throw ConstructionError(field + ": position out of bounds");
        if (base.at(d.pos).kind != CellKind::empty)
            throw ConstructionError(field + ": cell at (" + std::to_string(d.pos.col) + "," +
                                    std::to_string(d.pos.row) + ") is not empty");
        if (d.kind == CellKind::empty || d.kind == CellKind::wall || d.kind == CellKind::door)
            throw ConstructionError(field + ": kind must be a placeable object");
        if (d.color == Color::none)
            throw ConstructionError(field + ": placed objects need a color");
        base.at(d.pos) = d.kind == CellKind::goal_tile ? Cell{CellKind::goal_tile, d.color, DoorState::not_applicable}
                                                       : make_object(d.kind, d.color);
    }

    // Start cells: empty cells, confined to the key room for layout B.
    std::vector<GridPos> starts;
    for (int r = 1; r < spec.height - 1; ++r)
        for (int c = 1; c < spec.width - 1; ++c) {
            GridPos p{c, r};
            if (base.at(p).kind != CellKind::empty) continue;
            if (spec.layout == Layout::B && rg.room_of(p) != 0) continue;
            starts.push_back(p);
        }
    if (starts.empty()) throw ConstructionError("width/height: no empty start cell available");

    // The template places the agent on the first start cell.
    base.agent_pos = starts.front();
    base.agent_dir = Direction::east;
    check_invariants(base);
    return Environment(spec, std::move(base), std::move(starts));
}

Environment::Environment(EnvSpec spec, LowLevelState base, std::vector<GridPos> start_cells)
    : spec_(std::move(spec)), base_(std::move(base)), start_cells_(std::move(start_cells)) {}

LowLevelState Environment::sample_initial(std::uint64_t sub) const {
    Rng rng(sub);
    LowLevelState s = base_;
    s.agent_pos = start_cells_[rng.below(static_cast<std::uint32_t>(start_cells_.size()))];
    s.agent_dir = static_cast<Direction>(rng.below(4));
    s.carrying.reset();
    return s;
}

std::vector<LowLevelState> Environment::all_initial_states() const {
    std::vector<LowLevelState> out;
    out.reserve(start_cells_.size() * 4);
    for (const GridPos& p : start_cells_)
        for (int d = 0; d < 4; ++d) {
            LowLevelState s = base_;
            s.agent_pos = p;
            s.agent_dir = static_cast<Direction>(d);
            out.push_back(std::move(s));
        }
    return out;
}

// ---------------------------------------------------------------------------
// Search
// ---------------------------------------------------------------------------

BfsResult bfs_plan(const LowLevelState& start,
                   const std::function<bool(const LowLevelState&)>& satisfied,
                   std::span<const Action> actions, const BfsLimits& limits) {
    if (satisfied(start)) return {true, {}};

    struct Node {
        LowLevelState state;
        int parent;
        Action via;
    };
    std::vector<Node> nodes;
    std::unordered_set<std::string> seen;
    nodes.push_back({start, -1, Action::turn_left});
    seen.insert(encode_state(start));

    for (std::size_t head = 0; head < nodes.size(); ++head) {
        for (Action a : actions) {
            StepResult r = step(nodes[head].state, a);
            if (!r.valid) continue;
            std::string key = encode_state(r.state);
            if (!seen.insert(std::move(key)).second) continue;
            if (seen.size() > limits.max_states)
                throw ResourceError("bfs: state cap of " + std::to_string(limits.max_states) +
                                    " exceeded");
            const bool done = satisfied(r.state);
            nodes.push_back({std::move(r.state), static_cast<int>(head), a});
            if (done) {
                std::vector<Action> plan;
                for (int i = static_cast<int>(nodes.size()) - 1; i > 0; i = nodes[static_cast<std::size_t>(i)].parent)
                    plan.push_back(nodes[static_cast<std::size_t>(i)].via);
                std::reverse(plan.begin(), plan.end());
                return {true, std::move(plan)};
            }
        }
    }
    return {false, {}};
}

std::optional<int> bfs_optimal_steps(const LowLevelState& start,
                                     const std::function<bool(const LowLevelState&)>& satisfied,
                                     std::span<const Action> actions, const BfsLimits& limits) {
    BfsResult r = bfs_plan(start, satisfied, actions, limits);
    if (!r.reachable) return std::nullopt;
    return static_cast<int>(r.plan.size());
}

std::vector<LowLevelState> enumerate_reachable(const Environment& env, std::size_t cap,
                                               std::span<const Action> actions) {
    std::vector<LowLevelState> out;
    std::unordered_set<std::string> seen;
    for (LowLevelState& s : env.all_initial_states()) {
        if (!seen.insert(encode_state(s)).second) continue;
        if (seen.size() > cap)
            throw ResourceError("enumerate_reachable: state cap of " + std::to_string(cap) +
                                " exceeded");
        out.push_back(std::move(s));
    }
    for (std::size_t head = 0; head < out.size(); ++head) {
        for (Action a : actions) {
            StepResult r = step(out[head], a);
            if (!r.valid) continue;
            std::string key = encode_state(r.state);
            if (!seen.insert(std::move(key)).second) continue;
            if (seen.size() > cap)
                throw ResourceError("enumerate_reachable: state cap of " + std::to_string(cap) +
                                    " exceeded");
            out.push_back(std::move(r.state));
        }
    }
    return out;
}

} // namespace gcrl::gridworld
