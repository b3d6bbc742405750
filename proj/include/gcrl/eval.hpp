#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gcrl/abstraction.hpp"
#include "gcrl/amdp.hpp"
#include "gcrl/goals.hpp"
#include "gcrl/net.hpp"
#include <json.hpp>
#include "gcrl/solver.hpp"

namespace gcrl::eval {

using abstraction::AbstractionConfig;
using amdp::AMDP;
using goals::Goal;
using gridworld::Action;
using gridworld::Environment;
using gridworld::LowLevelState;
using solver::Policy;

struct EvalParams {
    int episodes_per_goal = 20;
    int max_steps = 500;
    std::uint64_t seed = 0;
    double gamma = 0.95;       // discounted-return estimate
    double length_decay = 0.9; // reward = 1 - decay * steps / max_steps on success
    double external_timeout_s = 10.0;
};

struct SourceContext {
    const Goal& goal;
    const LowLevelState& state;
    int step;
};

struct SourceReply {
    std::optional<Action> action; // nullopt: unparseable reply, counts as OOD
    bool fallback = false;        // policy had no entry for the state
    bool connection_lost = false; // transport died mid-episode
};

// A policy under evaluation. Implementations must be deterministic given
// the per-episode seed passed to begin_episode.
class PolicySource {
public:
    virtual ~PolicySource() = default;
    virtual std::string name() const = 0;
    virtual void begin_episode(const Goal& goal, const LowLevelState& x0, std::uint64_t sub_seed) {
        (void)goal;
        (void)x0;
        (void)sub_seed;
    }
    virtual SourceReply next_action(const SourceContext& ctx) = 0;
};

// Greedy table policy: abstracts each observation with the same F used at
// training and looks the token up in the per-goal policy map. Unknown
// tokens fall back to the canonical first action and flag the episode.
class QPolicySource : public PolicySource {
public:
    explicit QPolicySource(AbstractionConfig cfg, Action fallback = Action::turn_left);

    // Registers the solved policy for one goal. The AMDP and Policy must
    // outlive the source.
    void add_goal(const Goal& goal, const AMDP* m, const Policy* policy);

    std::string name() const override { return "q_policy"; }
    void begin_episode(const Goal& goal, const LowLevelState& x0, std::uint64_t sub) override;
    SourceReply next_action(const SourceContext& ctx) override;

private:
    struct Entry {
        const AMDP* amdp = nullptr;
        const Policy* policy = nullptr;
        std::map<std::string, Action> by_token;
    };
    AbstractionConfig cfg_;
    Action fallback_;
    std::map<std::string, Entry> by_goal_;
    const Entry* current_ = nullptr;
};

std::unique_ptr<PolicySource> random_policy();
std::unique_ptr<PolicySource> scripted_oracle();

// Drives the newline-delimited JSON protocol: one request per step
// {goal, state, abstract_state?, step}, expecting a bare action name back.
// abstract_state is included when an abstraction config is supplied.
std::unique_ptr<PolicySource> external_agent(std::unique_ptr<net::LineChannel> channel,
                                             std::optional<AbstractionConfig> cfg = {},
                                             double timeout_s = 10.0);

struct EpisodeLog {
    int goal_index = 0;
    int episode_index = 0;
    int steps = 0;
    bool success = false;
    int ood_actions = 0;
    bool fallback_used = false;
    bool failed_protocol = false;
    bool operator==(const EpisodeLog&) const = default;
};

struct GoalBreakdown {
    std::string goal_text;
    long episodes = 0;
    double success_rate = 0;
    double mean_length = 0;
    double mean_reward = 0;
    double ood_ratio = 0;
};

struct EvalReport {
    std::string source_name;
    double success_rate = 0;
    double mean_episode_length = 0;
    double mean_cumulative_reward = 0;
    double ood_action_ratio = 0;
    double mean_discounted_return = 0;
    int n_goals = 0;
    int n_episodes_per_goal = 0;
    int max_steps = 0;
    std::uint64_t seed = 0;
    long n_episodes = 0; // episodes counted (failed-protocol excluded)
    long n_failed_protocol = 0;
    long fallback_episodes = 0;
    long total_actions = 0;
    long total_ood_actions = 0;
    std::vector<GoalBreakdown> per_goal;
    std::vector<EpisodeLog> episodes;
};

// Metric aggregation over raw logs; evaluate() routes through this, and
// synthetic logs can be fed directly to check the metric formulas.
EvalReport aggregate_logs(const std::vector<EpisodeLog>& logs, const std::vector<Goal>& goals,
                          const EvalParams& params, const std::string& source_name);

// Online evaluation: per episode, sample x0 from p0, query the source,
// step the environment, stop on psi or at max_steps. Invalid actions and
// unparseable replies count toward the OOD ratio.
EvalReport evaluate(const Environment& env, PolicySource& source, const std::vector<Goal>& goals,
                    const EvalParams& params);

std::string report_markdown(const std::vector<EvalReport>& reports);

nlohmann::json report_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

} // namespace gcrl::eval
