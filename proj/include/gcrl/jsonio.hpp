#pragma once

#include <json.hpp>

#include "gcrl/abstraction.hpp"
#include "gcrl/gridworld.hpp"

// DOM converters for the on-disk and on-wire formats. Field names here are
// part of the external contract and must not drift.

namespace gcrl::gridworld {

// Snapshot format: {width, height, cells, agent: {col, row, dir}, carrying}.
// cells lists non-empty cells as {kind, color, door_state, col, row} in
// row-major order; omit_walls drops wall cells for bulk storage.
nlohmann::json snapshot_json(const LowLevelState& s, bool omit_walls = false);

// Rebuilds a state from a snapshot. When walls were omitted at write time,
// wall_source supplies the static wall layout.
LowLevelState state_from_snapshot(const nlohmann::json& j,
                                  const LowLevelState* wall_source = nullptr);

nlohmann::json env_spec_json(const EnvSpec& spec);
EnvSpec env_spec_from_json(const nlohmann::json& j);

} // namespace gcrl::gridworld

namespace gcrl::abstraction {

// {"go_to_tile": ["walls", ...], "go_to_object": [...], "pick_up": [...]}
nlohmann::json abstraction_config_json(const AbstractionConfig& cfg);
AbstractionConfig abstraction_config_from_json(const nlohmann::json& j);

} // namespace gcrl::abstraction
