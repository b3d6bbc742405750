#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gcrl/amdp.hpp"

namespace gcrl::solver {

using amdp::AMDP;
using gridworld::Action;

struct QTable {
    std::vector<std::array<double, gridworld::kActionCount>> values;
    std::vector<std::array<bool, gridworld::kActionCount>> observed;
    double gamma = 0.95;
    double pessimistic_init = 0;
    int iterations_run = 0;
    double max_residual = 0;
    bool converged = false;

    double max_value(int s) const;
    bool operator==(const QTable&) const = default;
};

struct QLearningParams {
    double alpha = 1.0; // step size in (0, 1]; 1.0 is exact for deterministic data
    int max_sweeps = 500;
    double tol = 1e-9;
    std::uint64_t shuffle_seed = 0;
    double reward_scale = 1.0;
    amdp::DistanceMetric distance_metric = amdp::DistanceMetric::token_jaccard;
    // default: -10 * reward_scale / (1 - gamma)
    std::optional<double> pessimistic_init;
};

// Sweeps the replayed abstract transitions (seeded shuffle per sweep) with
// the standard update Q(s,a) <- (1-a)Q(s,a) + a(r + g max Q(s',.)).
// Unobserved pairs keep the pessimistic init; the goal row is pinned at 0.
// Never silent about non-convergence: check the converged flag.
QTable q_learning(const AMDP& m, const QLearningParams& params = {});

struct ValueIterationParams {
    double tol = 1e-9;
    int max_iters = 100000;
    double reward_scale = 1.0;
    amdp::DistanceMetric distance_metric = amdp::DistanceMetric::token_jaccard;
    std::optional<double> pessimistic_init;
};

// Synchronous Bellman backups on the fitted model; the exact fixed-point
// oracle for the same pessimistic treatment of unobserved pairs.
QTable value_iteration(const AMDP& m, const ValueIterationParams& params = {});

// Deterministic greedy policy. Defined exactly on states with at least one
// observed action; exact ties break in canonical action order.
struct Policy {
    std::vector<std::optional<Action>> action_by_state;

    bool defined(int s) const {
        return s >= 0 && s < static_cast<int>(action_by_state.size()) &&
               action_by_state[static_cast<std::size_t>(s)].has_value();
    }
    std::size_t n_defined() const;
    bool operator==(const Policy&) const = default;
};

Policy extract_policy(const QTable& q);

void save_qtable(const QTable& q, const AMDP& m, const std::string& path);
QTable load_qtable(const AMDP& m, const std::string& path);
void save_policy(const Policy& p, const AMDP& m, const std::string& path);
Policy load_policy(const AMDP& m, const std::string& path);

} // namespace gcrl::solver
