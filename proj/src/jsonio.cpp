#include "gcrl/jsonio.hpp"

namespace gcrl::gridworld {

using nlohmann::json;

json snapshot_json(const LowLevelState& s, bool omit_walls) {
    json cells = json::array();
    for (int r = 0; r < s.height; ++r)
        for (int c = 0; c < s.width; ++c) {
            const Cell& cell = s.at({c, r});
            if (cell.kind == CellKind::empty) continue;
            if (omit_walls && cell.kind == CellKind::wall) continue;
            cells.push_back({{"kind", to_string(cell.kind)},
                             {"color", to_string(cell.color)},
                             {"door_state", to_string(cell.door)},
                             {"col", c},
                             {"row", r}});
        }
    json j{{"width", s.width},
           {"height", s.height},
           {"cells", std::move(cells)},
           {"agent",
            {{"col", s.agent_pos.col},
             {"row", s.agent_pos.row},
             {"dir", static_cast<int>(s.agent_dir)}}}};
    if (s.carrying) {
        j["carrying"] = {{"kind", to_string(s.carrying->kind)},
                         {"color", to_string(s.carrying->color)}};
    } else {
        j["carrying"] = nullptr;
    }
    return j;
}

LowLevelState state_from_snapshot(const json& j, const LowLevelState* wall_source) {
    LowLevelState s;
    s.width = j.at("width").get<int>();
    s.height = j.at("height").get<int>();
    s.grid.assign(static_cast<std::size_t>(s.width) * s.height, make_empty());
    if (wall_source) {
        if (wall_source->width != s.width || wall_source->height != s.height)
            throw IntegrityError("snapshot dimensions do not match the wall source");
        for (std::size_t i = 0; i < s.grid.size(); ++i)
            if (wall_source->grid[i].kind == CellKind::wall) s.grid[i] = make_wall();
    }
    for (const json& cj : j.at("cells")) {
        const GridPos p{cj.at("col").get<int>(), cj.at("row").get<int>()};
        if (!s.in_bounds(p)) throw ParseError("snapshot cell out of bounds");
        Cell cell;
        cell.kind = cell_kind_from_string(cj.at("kind").get<std::string>());
        cell.color = color_from_string(cj.at("color").get<std::string>());
        cell.door = door_state_from_string(cj.at("door_state").get<std::string>());
        s.at(p) = cell;
    }
    const json& aj = j.at("agent");
    s.agent_pos = {aj.at("col").get<int>(), aj.at("row").get<int>()};
    const int dir = aj.at("dir").get<int>();
    if (dir < 0 || dir > 3) throw ParseError("snapshot agent dir out of range");
    s.agent_dir = static_cast<Direction>(dir);
    if (!j.at("carrying").is_null()) {
        const json& cj = j.at("carrying");
        s.carrying = make_object(cell_kind_from_string(cj.at("kind").get<std::string>()),
                                 color_from_string(cj.at("color").get<std::string>()));
    }
    return s;
}

json env_spec_json(const EnvSpec& spec) {
    json distractors = json::array();
    for (const Distractor& d : spec.distractors)
        distractors.push_back({{"kind", to_string(d.kind)},
                               {"color", to_string(d.color)},
                               {"col", d.pos.col},
                               {"row", d.pos.row}});
    return {{"layout", to_string(spec.layout)},
            {"width", spec.width},
            {"height", spec.height},
            {"rooms", spec.rooms},
            {"door_policy", to_string(spec.door_policy)},
            {"distractors", std::move(distractors)},
            {"seed", spec.seed}};
}

EnvSpec env_spec_from_json(const json& j) {
    EnvSpec spec;
    spec.layout = layout_from_string(j.at("layout").get<std::string>());
    spec.width = j.at("width").get<int>();
    spec.height = j.at("height").get<int>();
    spec.rooms = j.at("rooms").get<int>();
    spec.door_policy = door_policy_from_string(j.at("door_policy").get<std::string>());
    spec.seed = j.at("seed").get<std::uint64_t>();
    for (const json& dj : j.at("distractors")) {
        Distractor d;
        d.kind = cell_kind_from_string(dj.at("kind").get<std::string>());
        d.color = color_from_string(dj.at("color").get<std::string>());
        d.pos = {dj.at("col").get<int>(), dj.at("row").get<int>()};
        spec.distractors.push_back(d);
    }
    return spec;
}

} // namespace gcrl::gridworld
