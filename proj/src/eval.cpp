#include "gcrl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gcrl/jsonio.hpp"
#include "gcrl/rng.hpp"

namespace gcrl::eval {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Sources
// ---------------------------------------------------------------------------

QPolicySource::QPolicySource(AbstractionConfig cfg, Action fallback)
    : cfg_(std::move(cfg)), fallback_(fallback) {}

void QPolicySource::add_goal(const Goal& goal, const AMDP* m, const Policy* policy) {
    if (!m || !policy) throw InputError("q_policy: null amdp or policy");
    if (policy->action_by_state.size() != m->n_states())
        throw IntegrityError("q_policy: policy and amdp disagree on state count");
    Entry entry;
    entry.amdp = m;
    entry.policy = policy;
    for (std::size_t s = 0; s < m->n_states(); ++s)
        if (policy->action_by_state[s]) entry.by_token[m->states[s]] = *policy->action_by_state[s];
    by_goal_[goal.surface_text.empty() ? goals::render_goal(goal) : goal.surface_text] =
        std::move(entry);
}

void QPolicySource::begin_episode(const Goal& goal, const LowLevelState&, std::uint64_t) {
    const std::string key =
        goal.surface_text.empty() ? goals::render_goal(goal) : goal.surface_text;
    auto it = by_goal_.find(key);
    if (it == by_goal_.end()) throw ConfigError("q_policy: no solved policy for goal '" + key + "'");
    current_ = &it->second;
}

SourceReply QPolicySource::next_action(const SourceContext& ctx) {
    const std::string token = abstraction::abstract_state(ctx.state, ctx.goal, cfg_).token;
    auto it = current_->by_token.find(token);
    if (it == current_->by_token.end()) return {fallback_, true, false};
    return {it->second, false, false};
}

namespace {

class RandomSource : public PolicySource {
public:
    std::string name() const override { return "random"; }
    void begin_episode(const Goal&, const LowLevelState&, std::uint64_t sub) override {
        rng_ = Rng(sub);
    }
    SourceReply next_action(const SourceContext&) override {
        return {gridworld::kAllActions[rng_.below(gridworld::kActionCount)], false, false};
    }

private:
    Rng rng_{0};
};

class ScriptedOracleSource : public PolicySource {
public:
    std::string name() const override { return "scripted"; }
    void begin_episode(const Goal& goal, const LowLevelState& x0, std::uint64_t) override {
        cursor_ = 0;
        plan_.clear();
        gridworld::BfsResult r =
            gridworld::bfs_plan(x0, [&](const LowLevelState& x) { return goals::psi(x, goal); });
        if (r.reachable) plan_ = std::move(r.plan);
    }
    SourceReply next_action(const SourceContext&) override {
        // An exhausted or absent plan means the goal was unreachable; keep
        // turning so the episode runs out and counts as a failure.
        if (cursor_ >= plan_.size()) return {Action::turn_left, false, false};
        return {plan_[cursor_++], false, false};
    }

private:
    std::vector<Action> plan_;
    std::size_t cursor_ = 0;
};

class ExternalSource : public PolicySource {
public:
    ExternalSource(std::unique_ptr<net::LineChannel> channel, std::optional<AbstractionConfig> cfg,
                   double timeout_s)
        : channel_(std::move(channel)), cfg_(std::move(cfg)), timeout_s_(timeout_s) {}

    std::string name() const override { return "external"; }

    SourceReply next_action(const SourceContext& ctx) override {
        json request{{"goal", ctx.goal.surface_text.empty() ? goals::render_goal(ctx.goal)
                                                            : ctx.goal.surface_text},
                     {"state", gridworld::snapshot_json(ctx.state)},
                     {"step", ctx.step}};
        if (cfg_)
            request["abstract_state"] =
                abstraction::abstract_state(ctx.state, ctx.goal, *cfg_).token;
        if (!channel_->send_line(request.dump())) return {std::nullopt, false, true};
        const auto reply = channel_->recv_line(timeout_s_); // ProtocolError on timeout
        if (!reply) return {std::nullopt, false, true};
        std::string text = *reply;
        // Tolerate a JSON-quoted action name.
        if (text.size() >= 2 && text.front() == '"' && text.back() == '"')
            text = text.substr(1, text.size() - 2);
        return {gridworld::action_from_string(text), false, false};
    }

private:
    std::unique_ptr<net::LineChannel> channel_;
    std::optional<AbstractionConfig> cfg_;
    double timeout_s_;
};

} // namespace

std::unique_ptr<PolicySource> random_policy() { return std::make_unique<RandomSource>(); }

std::unique_ptr<PolicySource> scripted_oracle() { return std::make_unique<ScriptedOracleSource>(); }

std::unique_ptr<PolicySource> external_agent(std::unique_ptr<net::LineChannel> channel,
                                             std::optional<AbstractionConfig> cfg,
                                             double timeout_s) {
    return std::make_unique<ExternalSource>(std::move(channel), std::move(cfg), timeout_s);
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

EvalReport aggregate_logs(const std::vector<EpisodeLog>& logs, const std::vector<Goal>& goals_list,
                          const EvalParams& params, const std::string& source_name) {
    EvalReport report;
    report.source_name = source_name;
    report.n_goals = static_cast<int>(goals_list.size());
    report.n_episodes_per_goal = params.episodes_per_goal;
    report.max_steps = params.max_steps;
    report.seed = params.seed;
    report.episodes = logs;

    struct Acc {
        long episodes = 0;
        long successes = 0;
        long steps = 0;
        long ood = 0;
        double reward = 0;
    };
    Acc total;
    std::vector<Acc> per_goal(goals_list.size());

    double discounted = 0;
    for (const EpisodeLog& log : logs) {
        if (log.failed_protocol) {
            ++report.n_failed_protocol;
            continue;
        }
        const double reward =
            log.success
                ? 1.0 - params.length_decay * static_cast<double>(log.steps) / params.max_steps
                : 0.0;
        discounted += log.success ? std::pow(params.gamma, log.steps) : 0.0;
        if (log.fallback_used) ++report.fallback_episodes;

        auto bump = [&](Acc& acc) {
            ++acc.episodes;
            if (log.success) ++acc.successes;
            acc.steps += log.steps;
            acc.ood += log.ood_actions;
            acc.reward += reward;
        };
        bump(total);
        if (log.goal_index >= 0 && log.goal_index < static_cast<int>(per_goal.size()))
            bump(per_goal[static_cast<std::size_t>(log.goal_index)]);
    }

    report.n_episodes = total.episodes;
    report.total_actions = total.steps;
    report.total_ood_actions = total.ood;
    if (total.episodes > 0) {
        report.success_rate = static_cast<double>(total.successes) / total.episodes;
        report.mean_episode_length = static_cast<double>(total.steps) / total.episodes;
        report.mean_cumulative_reward = total.reward / total.episodes;
        report.mean_discounted_return = discounted / total.episodes;
    }
    if (total.steps > 0)
        report.ood_action_ratio = static_cast<double>(total.ood) / total.steps;

    for (std::size_t gi = 0; gi < goals_list.size(); ++gi) {
        const Acc& acc = per_goal[gi];
        GoalBreakdown b;
        b.goal_text = goals_list[gi].surface_text.empty() ? goals::render_goal(goals_list[gi])
                                                          : goals_list[gi].surface_text;
        b.episodes = acc.episodes;
        if (acc.episodes > 0) {
            b.success_rate = static_cast<double>(acc.successes) / acc.episodes;
            b.mean_length = static_cast<double>(acc.steps) / acc.episodes;
            b.mean_reward = acc.reward / acc.episodes;
        }
        if (acc.steps > 0) b.ood_ratio = static_cast<double>(acc.ood) / acc.steps;
        report.per_goal.push_back(std::move(b));
    }
    return report;
}

EvalReport evaluate(const Environment& env, PolicySource& source, const std::vector<Goal>& goals_list,
                    const EvalParams& params) {
    if (params.episodes_per_goal < 1) throw ConfigError("episodes_per_goal must be at least 1");
    if (params.max_steps < 1) throw ConfigError("max_steps must be at least 1");
    for (const Goal& g : goals_list) goals::psi(env.base_state(), g); // feasibility up front

    std::vector<EpisodeLog> logs;
    logs.reserve(goals_list.size() * static_cast<std::size_t>(params.episodes_per_goal));

    for (std::size_t gi = 0; gi < goals_list.size(); ++gi) {
        const Goal& goal = goals_list[gi];
        for (int ei = 0; ei < params.episodes_per_goal; ++ei) {
            const std::uint64_t sub = sub_seed(params.seed, gi, static_cast<std::uint64_t>(ei));
            LowLevelState x = env.sample_initial(sub);
            source.begin_episode(goal, x, sub);

            EpisodeLog log;
            log.goal_index = static_cast<int>(gi);
            log.episode_index = ei;
            for (;;) {
                if (goals::psi(x, goal)) {
                    log.success = true;
                    break;
                }
                if (log.steps >= params.max_steps) break;
                const SourceReply reply = source.next_action({goal, x, log.steps});
                if (reply.connection_lost) {
                    log.failed_protocol = true;
                    break;
                }
                if (reply.fallback) log.fallback_used = true;
                ++log.steps;
                if (!reply.action) {
                    ++log.ood_actions; // unparseable reply: state unchanged
                    continue;
                }
                gridworld::StepResult r = gridworld::step(x, *reply.action);
                if (!r.valid) ++log.ood_actions;
                x = std::move(r.state);
            }
            logs.push_back(log);
        }
    }
    return aggregate_logs(logs, goals_list, params, source.name());
}

json report_json(const EvalReport& r) {
    json per_goal = json::array();
    for (const GoalBreakdown& b : r.per_goal)
        per_goal.push_back({{"goal", b.goal_text},
                            {"episodes", b.episodes},
                            {"success_rate", b.success_rate},
                            {"mean_length", b.mean_length},
                            {"mean_reward", b.mean_reward},
                            {"ood_ratio", b.ood_ratio}});
    json episodes = json::array();
    for (const EpisodeLog& e : r.episodes)
        episodes.push_back({{"goal", e.goal_index},
                            {"episode", e.episode_index},
                            {"steps", e.steps},
                            {"success", e.success},
                            {"ood_actions", e.ood_actions},
                            {"fallback_used", e.fallback_used},
                            {"failed_protocol", e.failed_protocol}});
    return {{"source", r.source_name},
            {"success_rate", r.success_rate},
            {"mean_episode_length", r.mean_episode_length},
            {"mean_cumulative_reward", r.mean_cumulative_reward},
            {"ood_action_ratio", r.ood_action_ratio},
            {"mean_discounted_return", r.mean_discounted_return},
            {"n_goals", r.n_goals},
            {"n_episodes_per_goal", r.n_episodes_per_goal},
            {"max_steps", r.max_steps},
            {"seed", r.seed},
            {"n_episodes", r.n_episodes},
            {"n_failed_protocol", r.n_failed_protocol},
            {"fallback_episodes", r.fallback_episodes},
            {"total_actions", r.total_actions},
            {"total_ood_actions", r.total_ood_actions},
            {"per_goal", std::move(per_goal)},
            {"episodes", std::move(episodes)}};
}

EvalReport report_from_json(const json& j) {
    EvalReport r;
    r.source_name = j.at("source").get<std::string>();
    r.success_rate = j.at("success_rate").get<double>();
    r.mean_episode_length = j.at("mean_episode_length").get<double>();
    r.mean_cumulative_reward = j.at("mean_cumulative_reward").get<double>();
    r.ood_action_ratio = j.at("ood_action_ratio").get<double>();
    r.mean_discounted_return = j.at("mean_discounted_return").get<double>();
    r.n_goals = j.at("n_goals").get<int>();
    r.n_episodes_per_goal = j.at("n_episodes_per_goal").get<int>();
    r.max_steps = j.at("max_steps").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.n_episodes = j.at("n_episodes").get<long>();
    r.n_failed_protocol = j.at("n_failed_protocol").get<long>();
    r.fallback_episodes = j.at("fallback_episodes").get<long>();
    r.total_actions = j.at("total_actions").get<long>();
    r.total_ood_actions = j.at("total_ood_actions").get<long>();
    for (const json& bj : j.at("per_goal")) {
        GoalBreakdown b;
        b.goal_text = bj.at("goal").get<std::string>();
        b.episodes = bj.at("episodes").get<long>();
        b.success_rate = bj.at("success_rate").get<double>();
        b.mean_length = bj.at("mean_length").get<double>();
        b.mean_reward = bj.at("mean_reward").get<double>();
        b.ood_ratio = bj.at("ood_ratio").get<double>();
        r.per_goal.push_back(std::move(b));
    }
    for (const json& ej : j.at("episodes")) {
        EpisodeLog e;
        e.goal_index = ej.at("goal").get<int>();
        e.episode_index = ej.at("episode").get<int>();
        e.steps = ej.at("steps").get<int>();
        e.success = ej.at("success").get<bool>();
        e.ood_actions = ej.at("ood_actions").get<int>();
        e.fallback_used = ej.at("fallback_used").get<bool>();
        e.failed_protocol = ej.at("failed_protocol").get<bool>();
        r.episodes.push_back(e);
    }
    return r;
}

std::string report_markdown(const std::vector<EvalReport>& reports) {
    std::ostringstream out;
    out << "| Experiments | Success rate | Cumulative Reward | Length of the episode | Ood action ratio |\n";
    out << "|---|---|---|---|---|\n";
    for (const EvalReport& r : reports) {
        out << "| " << r.source_name << " | " << std::lround(r.success_rate * 100) << "% | ";
        const double reward = std::round(r.mean_cumulative_reward * 100) / 100;
        out << reward << " | " << std::lround(r.mean_episode_length) << " | "
            << std::lround(r.ood_action_ratio * 100) << "% |\n";
    }
    return out.str();
}

} // namespace gcrl::eval
