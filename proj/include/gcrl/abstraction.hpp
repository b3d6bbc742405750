#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gcrl/datastore.hpp"
#include "gcrl/goals.hpp"
#include "gcrl/gridworld.hpp"

namespace gcrl::abstraction {

using datastore::Dataset;
using goals::Goal;
using goals::GoalKind;
using gridworld::Action;
using gridworld::Environment;
using gridworld::LowLevelState;

// Feature classes a goal-conditioned abstraction may keep.
enum class FeatureClass : std::uint8_t {
    walls = 0,
    agent_pos,
    agent_dir,
    doors,
    carried_item,
    objects_matching_goal,
    all_objects,
};

const char* to_string(FeatureClass f);
FeatureClass feature_class_from_string(const std::string& s);

class FeatureSet {
public:
    FeatureSet() = default;
    FeatureSet(std::initializer_list<FeatureClass> fs) {
        for (FeatureClass f : fs) add(f);
    }
    void add(FeatureClass f) { bits_ |= mask(f); }
    void remove(FeatureClass f) { bits_ &= static_cast<std::uint8_t>(~mask(f)); }
    bool has(FeatureClass f) const { return bits_ & mask(f); }
    bool contains(FeatureSet other) const { return (bits_ & other.bits_) == other.bits_; }
    bool operator==(const FeatureSet&) const = default;

    std::vector<FeatureClass> classes() const;

private:
    static std::uint8_t mask(FeatureClass f) {
        return static_cast<std::uint8_t>(1u << static_cast<unsigned>(f));
    }
    std::uint8_t bits_ = 0;
};

// Kept feature set per goal kind. Defaults follow the feature-selection
// rule: tile goals keep layout and pose, object goals additionally keep
// the matching objects; distractors are always dropped.
struct AbstractionConfig {
    FeatureSet go_to_tile;
    FeatureSet go_to_object;
    FeatureSet pick_up;

    static AbstractionConfig defaults();
    FeatureSet for_kind(GoalKind kind) const;
    void set_for_kind(GoalKind kind, FeatureSet fs);
};

// Canonical serialization of the kept feature subset. Token equality is
// feature-subset equality.
struct AbstractState {
    std::string token;
    auto operator<=>(const AbstractState&) const = default;
};

// Every goal-satisfying observation collapses to this token, so the goal
// set is exactly one abstract state.
inline const std::string kGoalToken = "GOAL";

// The abstraction operator F(x; g). Pure.
AbstractState abstract_state(const LowLevelState& x, const Goal& g,
                             const AbstractionConfig& cfg);

// Kept-feature serialization without the goal collapse; used by the
// independence diagnostic and by tests.
std::string serialize_features(const LowLevelState& x, const Goal& g, FeatureSet kept);

// Splits a token into its feature items (the multiset used by the
// language-space distance metrics).
std::vector<std::string> token_items(const std::string& token);

struct AbstractTransition {
    int s;
    Action a;
    int s_next;
    int episode;
    int step;
    bool operator==(const AbstractTransition&) const = default;
};

// Element-wise image of a Dataset under F(.; g); episode order preserved.
// States are interned: `tokens[t.s]` is the serialized abstract state.
struct AbstractDataset {
    Goal goal;
    std::vector<std::string> tokens;
    std::vector<AbstractTransition> transitions;
    std::string provenance;
    std::size_t distinct_low_level = 0;

    bool operator==(const AbstractDataset&) const = default;
};

AbstractDataset abstract_dataset(const Dataset& d, const Goal& g, const AbstractionConfig& cfg);

// JSONL: header {goal, provenance, distinct_low_level, format_version},
// then lines {s, a, s_next, episode, step} with s as tokens.
void save_abstract_dataset(const AbstractDataset& ad, const std::string& path);
AbstractDataset load_abstract_dataset(const std::string& path);

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

struct PartitionReport {
    bool valid = false;
    bool unique_goal_class = false; // exactly one abstract state equals the positive set
    bool non_injective = false;     // some abstract state has >= 2 preimages
    std::string goal_token;
    std::size_t n_sample = 0;
    std::size_t n_abstract = 0;
    std::size_t n_positive = 0;
    std::vector<std::string> offending; // example serialized states on failure
};

// Checks the partition contract on a sample: the psi-positive states form
// the preimage of exactly one abstract state, and F is strictly
// non-injective on the sample. Throws InputError when the sample mixes
// grid shapes different from the environment's.
PartitionReport validate_partition(const Environment& env, const Goal& g,
                                   const AbstractionConfig& cfg,
                                   const std::vector<LowLevelState>& sample);

// Deterministic-dynamics Markov diagnostic: the fraction of observed
// (s, a) pairs with two or more distinct observed successors. Zero
// certifies the abstract dynamics are consistent with a deterministic
// Markov model. Throws InputError on an empty dataset.
double markov_violation(const AbstractDataset& ad);

// Maps a state to the value of a discarded feature block.
using FeatureExtractor = std::function<std::string(const LowLevelState&)>;

// Built-in extractors.
FeatureExtractor object_positions_extractor(gridworld::CellKind kind, gridworld::Color color);
FeatureExtractor agent_pos_extractor();

struct IndependenceReport {
    double mi_goal = 0;  // nats, discarded block vs psi indicator
    double mi_kept = 0;  // nats, discarded block vs kept feature block
    double threshold = 0.01;
    bool goal_independent = false;
    bool kept_independent = false;
    bool low_power_goal = false; // some contingency cell expects < 5
    bool low_power_kept = false;
    std::size_t n_states = 0;
};

// Plug-in mutual information between a discarded feature block and (a) the
// goal indicator, (b) the kept feature block, over the dataset's visited
// states. Throws InputError on an empty dataset.
IndependenceReport feature_independence_check(const Dataset& d, const Goal& g,
                                              const AbstractionConfig& cfg,
                                              const FeatureExtractor& discarded,
                                              double threshold = 0.01);

// Same check over an explicit state sample (e.g. an exhaustive enumeration).
IndependenceReport feature_independence_check(const std::vector<LowLevelState>& states,
                                              const Goal& g, const AbstractionConfig& cfg,
                                              const FeatureExtractor& discarded,
                                              double threshold = 0.01);

} // namespace gcrl::abstraction
