#include "gcrl/solver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "gcrl/jsonio.hpp"
#include "gcrl/rng.hpp"

namespace gcrl::solver {

using amdp::RewardKind;
using amdp::SuccessorRow;
using nlohmann::json;

double QTable::max_value(int s) const {
    const auto& row = values[static_cast<std::size_t>(s)];
    return *std::max_element(row.begin(), row.end());
}

std::size_t Policy::n_defined() const {
    std::size_t n = 0;
    for (const auto& a : action_by_state)
        if (a) ++n;
    return n;
}

namespace {

// Per-row immediate rewards under the model's reward kind.
std::vector<double> row_rewards(const AMDP& m, double scale, amdp::DistanceMetric metric) {
    std::vector<double> out(m.rows.size(), 0);
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
        const SuccessorRow& r = m.rows[i];
        if (m.reward_kind == RewardKind::reach_prob) {
            out[i] = m.goal_state < 0
                         ? 0.0
                         : m.p_hat(r.s, static_cast<gridworld::Action>(r.a), m.goal_state);
        } else {
            out[i] = amdp::reward_neg_distance(m, r.s, static_cast<gridworld::Action>(r.a), metric);
        }
        out[i] *= scale;
    }
    return out;
}

QTable init_table(const AMDP& m, double pessimistic) {
    QTable q;
    q.gamma = m.gamma;
    q.pessimistic_init = pessimistic;
    q.values.assign(m.n_states(), {});
    q.observed.assign(m.n_states(), {});
    for (auto& row : q.values) row.fill(pessimistic);
    for (const SuccessorRow& r : m.rows) {
        q.values[static_cast<std::size_t>(r.s)][static_cast<std::size_t>(r.a)] = 0;
        q.observed[static_cast<std::size_t>(r.s)][static_cast<std::size_t>(r.a)] = true;
    }
    if (m.goal_state >= 0) {
        q.values[static_cast<std::size_t>(m.goal_state)].fill(0);
        q.observed[static_cast<std::size_t>(m.goal_state)].fill(false);
    }
    return q;
}

double default_pessimism(const AMDP& m, double scale) {
    return -10.0 * scale / (1.0 - m.gamma);
}

} // namespace

QTable q_learning(const AMDP& m, const QLearningParams& params) {
    if (m.n_states() == 0 || m.rows.empty()) throw InputError("q_learning: empty model");
    if (params.alpha <= 0 || params.alpha > 1)
        throw ConfigError("alpha must lie in (0, 1], got " + std::to_string(params.alpha));
    if (params.tol <= 0) throw ConfigError("tol must be positive");

    const double pessimistic =
        params.pessimistic_init.value_or(default_pessimism(m, params.reward_scale));
    QTable q = init_table(m, pessimistic);
    const std::vector<double> rewards =
        row_rewards(m, params.reward_scale, params.distance_metric);

    // Expand the count multiset back into individual replayed transitions.
    struct Sample {
        int s;
        int a;
        int s_next;
        int row;
    };
    std::vector<Sample> samples;
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
        const SuccessorRow& r = m.rows[i];
        for (const auto& [s2, count] : r.successors)
            for (long k = 0; k < count; ++k)
                samples.push_back({r.s, r.a, s2, static_cast<int>(i)});
    }

    std::vector<std::uint32_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::uint32_t>(i);

    for (int sweep = 0; sweep < params.max_sweeps; ++sweep) {
        Rng rng(sub_seed(params.shuffle_seed, static_cast<std::uint64_t>(sweep)));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.below(static_cast<std::uint32_t>(i))]);

        double max_update = 0;
        for (std::uint32_t idx : order) {
            const Sample& t = samples[idx];
            double& cell = q.values[static_cast<std::size_t>(t.s)][static_cast<std::size_t>(t.a)];
            const double target =
                rewards[static_cast<std::size_t>(t.row)] + m.gamma * q.max_value(t.s_next);
            const double delta = params.alpha * (target - cell);
            cell += delta;
            max_update = std::max(max_update, std::abs(delta));
        }
        q.iterations_run = sweep + 1;
        q.max_residual = max_update;
        if (max_update < params.tol) {
            q.converged = true;
            break;
        }
    }
    return q;
}

QTable value_iteration(const AMDP& m, const ValueIterationParams& params) {
    if (m.n_states() == 0 || m.rows.empty()) throw InputError("value_iteration: empty model");
    if (params.tol <= 0) throw ConfigError("tol must be positive");

    const double pessimistic =
        params.pessimistic_init.value_or(default_pessimism(m, params.reward_scale));
    QTable q = init_table(m, pessimistic);
    const std::vector<double> rewards =
        row_rewards(m, params.reward_scale, params.distance_metric);

    std::vector<double> state_max(m.n_states());
    for (int iter = 0; iter < params.max_iters; ++iter) {
        for (std::size_t s = 0; s < m.n_states(); ++s)
            state_max[s] = q.max_value(static_cast<int>(s));

        double residual = 0;
        for (std::size_t i = 0; i < m.rows.size(); ++i) {
            const SuccessorRow& r = m.rows[i];
            double backup = rewards[i];
            for (const auto& [s2, count] : r.successors) {
                const double p = static_cast<double>(count) / static_cast<double>(r.total);
                backup += m.gamma * p * state_max[static_cast<std::size_t>(s2)];
            }
            double& cell = q.values[static_cast<std::size_t>(r.s)][static_cast<std::size_t>(r.a)];
            residual = std::max(residual, std::abs(backup - cell));
            cell = backup;
        }
        q.iterations_run = iter + 1;
        q.max_residual = residual;
        if (residual < params.tol) {
            q.converged = true;
            break;
        }
    }
    return q;
}

Policy extract_policy(const QTable& q) {
    Policy p;
    p.action_by_state.assign(q.values.size(), std::nullopt);
    for (std::size_t s = 0; s < q.values.size(); ++s) {
        int best = -1;
        double best_value = 0;
        for (int a = 0; a < gridworld::kActionCount; ++a) {
            if (!q.observed[s][static_cast<std::size_t>(a)]) continue;
            const double v = q.values[s][static_cast<std::size_t>(a)];
            if (best < 0 || v > best_value) {
                best = a;
                best_value = v;
            }
        }
        if (best >= 0) p.action_by_state[s] = static_cast<Action>(best);
    }
    return p;
}

// ---------------------------------------------------------------------------
// Serialization (sparse maps keyed by state token and action name)
// ---------------------------------------------------------------------------

void save_qtable(const QTable& q, const AMDP& m, const std::string& path) {
    if (q.values.size() != m.n_states())
        throw IntegrityError("qtable/amdp state count mismatch");
    json values = json::object();
    for (std::size_t s = 0; s < q.values.size(); ++s) {
        json row = json::object();
        for (int a = 0; a < gridworld::kActionCount; ++a)
            if (q.observed[s][static_cast<std::size_t>(a)])
                row[gridworld::to_string(static_cast<Action>(a))] =
                    q.values[s][static_cast<std::size_t>(a)];
        if (!row.empty()) values[m.states[s]] = std::move(row);
    }
    const json j{{"gamma", q.gamma},
                 {"pessimistic_init", q.pessimistic_init},
                 {"iterations_run", q.iterations_run},
                 {"max_residual", q.max_residual},
                 {"converged", q.converged},
                 {"values", std::move(values)}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path);
    out << j.dump(2) << '\n';
    if (!out) throw Error("write failed: " + path);
}

QTable load_qtable(const AMDP& m, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad qtable file: ") + e.what());
    }
    QTable q;
    try {
        q.gamma = j.at("gamma").get<double>();
        q.pessimistic_init = j.at("pessimistic_init").get<double>();
        q.iterations_run = j.at("iterations_run").get<int>();
        q.max_residual = j.at("max_residual").get<double>();
        q.converged = j.at("converged").get<bool>();
        q.values.assign(m.n_states(), {});
        q.observed.assign(m.n_states(), {});
        for (auto& row : q.values) row.fill(q.pessimistic_init);
        if (m.goal_state >= 0) q.values[static_cast<std::size_t>(m.goal_state)].fill(0);
        for (const auto& [token, row] : j.at("values").items()) {
            const int s = m.state_index(token);
            if (s < 0) throw IntegrityError("qtable state not present in amdp: " + token);
            for (const auto& [name, value] : row.items()) {
                const auto a = gridworld::action_from_string(name);
                if (!a) throw ParseError("unknown action name: " + name);
                q.values[static_cast<std::size_t>(s)][static_cast<std::size_t>(*a)] =
                    value.get<double>();
                q.observed[static_cast<std::size_t>(s)][static_cast<std::size_t>(*a)] = true;
            }
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad qtable file: ") + e.what());
    }
    return q;
}

void save_policy(const Policy& p, const AMDP& m, const std::string& path) {
    if (p.action_by_state.size() != m.n_states())
        throw IntegrityError("policy/amdp state count mismatch");
    json actions = json::object();
    for (std::size_t s = 0; s < p.action_by_state.size(); ++s)
        if (p.action_by_state[s]) actions[m.states[s]] = gridworld::to_string(*p.action_by_state[s]);
    const json j{{"tie_break", "canonical"}, {"actions", std::move(actions)}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path);
    out << j.dump(2) << '\n';
    if (!out) throw Error("write failed: " + path);
}

Policy load_policy(const AMDP& m, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad policy file: ") + e.what());
    }
    Policy p;
    p.action_by_state.assign(m.n_states(), std::nullopt);
    try {
        for (const auto& [token, name] : j.at("actions").items()) {
            const int s = m.state_index(token);
            if (s < 0) throw IntegrityError("policy state not present in amdp: " + token);
            const auto a = gridworld::action_from_string(name.get<std::string>());
            if (!a) throw ParseError("unknown action name: " + name.get<std::string>());
            p.action_by_state[static_cast<std::size_t>(s)] = *a;
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad policy file: ") + e.what());
    }
    return p;
}

} // namespace gcrl::solver
