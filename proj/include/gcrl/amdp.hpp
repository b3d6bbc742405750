#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gcrl/abstraction.hpp"

namespace gcrl::amdp {

using abstraction::AbstractDataset;
using gridworld::Action;

enum class RewardKind : std::uint8_t { reach_prob, neg_distance };
enum class DistanceMetric : std::uint8_t { token_jaccard, token_cosine };

const char* to_string(RewardKind k);
RewardKind reward_kind_from_string(const std::string& s);
const char* to_string(DistanceMetric m);
DistanceMetric distance_metric_from_string(const std::string& s); // ConfigError on unknown

// Observed successor counts for one (state, action) pair.
struct SuccessorRow {
    int s = 0;
    int a = 0;
    long total = 0;
    std::vector<std::pair<int, long>> successors; // sorted by state index
};

// The empirical abstract MDP M^g. Immutable after build; the goal state is
// absorbing (its outgoing transitions are dropped during the fold).
struct AMDP {
    std::vector<std::string> states; // index -> token, insertion order
    std::vector<SuccessorRow> rows;  // sorted by (s, a)
    std::vector<long> p0_counts;     // episode starts per state
    long episodes = 0;
    int goal_state = -1; // index of the GOAL token, -1 when unobserved
    RewardKind reward_kind = RewardKind::reach_prob;
    double gamma = 0.95;
    std::size_t distinct_low_level = 0; // provenance, 0 = unknown

    std::size_t n_states() const { return states.size(); }
    int state_index(const std::string& token) const;
    const SuccessorRow* row(int s, Action a) const;
    double p_hat(int s, Action a, int s_next) const;
    double p0_hat(int s) const;
};

// Count-based estimation: p_hat(s'|s,a) = count(s,a,s')/count(s,a) and
// p0_hat(s) = starts(s)/episodes. Throws InputError on an empty dataset
// and ConfigError for gamma outside [0, 1).
AMDP build_amdp(const AbstractDataset& ad, RewardKind reward_kind, double gamma);

// p_hat(goal | s, a); nullopt signals an unobserved pair (missing data,
// deliberately distinct from reward 0).
std::optional<double> reward_reach(const AMDP& m, int s, Action a);

// -E_{p_hat}[d(s', goal)] with d a [0,1] distance on token multisets.
// Throws InputError for unobserved pairs or a missing goal state.
double reward_neg_distance(const AMDP& m, int s, Action a, DistanceMetric metric);

// Distance between two abstract-state serializations; symmetric, in [0,1],
// zero iff equal token multisets.
double token_distance(const std::string& token_a, const std::string& token_b,
                      DistanceMetric metric);

struct CoverageStats {
    std::size_t n_states = 0;
    std::size_t observed_pairs = 0;
    long min_count = 0;
    double median_count = 0;
    // distinct low-level states per abstract state; 0 when provenance is
    // unavailable
    double low_level_ratio = 0;
};

CoverageStats coverage_stats(const AMDP& m);

void save_amdp(const AMDP& m, const std::string& path);
AMDP load_amdp(const std::string& path);

} // namespace gcrl::amdp
