#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gcrl/gridworld.hpp"

namespace gcrl::datastore {

using gridworld::Action;
using gridworld::EnvSpec;
using gridworld::LowLevelState;

// Behavior policy for unlabeled collection.
//   uniform_random — uniform over the six actions
//   nav_toggle     — uniform over {turn_left, turn_right, forward, toggle};
//                    never relocates objects
//   landmark       — coverage booster: with probability epsilon a uniform
//                    action, otherwise a shortest-path step toward a
//                    periodically resampled random landmark cell
struct PolicySpec {
    std::string name = "uniform_random";
    double epsilon = 0.3;
    int resample_every = 50;

    static PolicySpec parse(const std::string& name); // ConfigError on unknown names
};

struct StepRecord {
    Action action;
    bool valid;
    bool operator==(const StepRecord&) const = default;
};

struct Episode {
    LowLevelState initial;
    std::vector<StepRecord> steps;
    bool operator==(const Episode&) const = default;
};

// One replayed (x, a, x') tuple. States are views into replay buffers and
// only valid during the visit.
struct TransitionView {
    const LowLevelState& x;
    Action a;
    const LowLevelState& x_next;
    bool valid;
    int episode_id;
    int step_index;
};

// The offline dataset D. Episodes store the initial state plus the action
// tape; intermediate states are reconstructed by replaying the
// deterministic dynamics, which makes replay consistency structural.
struct Dataset {
    EnvSpec env_spec;
    std::uint64_t collection_seed = 0;
    std::vector<Episode> episodes;

    std::size_t n_episodes() const { return episodes.size(); }
    std::size_t n_transitions() const;
    void for_each_transition(const std::function<void(const TransitionView&)>& fn) const;

    bool operator==(const Dataset&) const = default;
};

// Rolls the behavior policy for exactly max_len steps per episode, fully
// seeded: episode k draws everything from sub_seed(seed, k), so parallel
// and serial collection agree.
Dataset collect(const EnvSpec& env_spec, const PolicySpec& policy, int n_episodes, int max_len,
                std::uint64_t seed);

// JSONL: header {env_spec, n_episodes, collection_seed, format_version},
// then one line per transition {episode, step, x, a, x_next, valid} in the
// snapshot format (walls omitted; the header's env_spec restores them).
void save(const Dataset& d, const std::string& path);

// verify additionally replays every transition and fails with an
// IntegrityError naming episode and step on any mismatch.
Dataset load(const std::string& path, bool verify = false);

} // namespace gcrl::datastore
