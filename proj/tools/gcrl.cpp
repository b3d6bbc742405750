// Command-line front end for the goal-conditioned abstraction pipeline.
// Subcommands mirror the pipeline stages; `pipeline` runs them end to end.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "gcrl/jsonio.hpp"
#include "gcrl/pipeline.hpp"
#include "gcrl/sft.hpp"

namespace {

using nlohmann::json;

gcrl::gridworld::EnvSpec load_env_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw gcrl::ConfigError("cannot open env spec: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw gcrl::ConfigError(std::string("bad env spec: ") + e.what());
    }
    // Accept either a bare spec or a gen-env output document.
    if (j.contains("env_spec")) return gcrl::gridworld::env_spec_from_json(j.at("env_spec"));
    return gcrl::gridworld::env_spec_from_json(j);
}

gcrl::gridworld::EnvSpec spec_from_flags(const std::string& layout, int width, int height,
                                         int rooms, const std::string& door_policy,
                                         std::uint64_t seed) {
    gcrl::gridworld::EnvSpec spec;
    spec.layout = gcrl::gridworld::layout_from_string(layout);
    spec.width = width;
    spec.height = height;
    spec.rooms = rooms;
    spec.door_policy = gcrl::gridworld::door_policy_from_string(door_policy);
    spec.seed = seed;
    return spec;
}

gcrl::abstraction::AbstractionConfig load_abstraction_config(const std::string& path) {
    if (path.empty()) return gcrl::abstraction::AbstractionConfig::defaults();
    std::ifstream in(path);
    if (!in) throw gcrl::ConfigError("cannot open abstraction config: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw gcrl::ConfigError(std::string("bad abstraction config: ") + e.what());
    }
    return gcrl::abstraction::abstraction_config_from_json(j);
}

std::vector<gcrl::goals::Goal> goals_from_flags(const std::vector<std::string>& goal_texts,
                                                const std::string& goal_file) {
    std::vector<gcrl::goals::Goal> out;
    if (!goal_file.empty()) out = gcrl::goals::load_goal_file(goal_file);
    for (const std::string& text : goal_texts) out.push_back(gcrl::goals::parse_goal(text));
    if (out.empty()) throw gcrl::ConfigError("no goals given (use --goal or --goals-file)");
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Offline goal-conditioned pipeline for gridworlds"};
    app.require_subcommand(1);

    // --- gen-env ---
    auto* gen = app.add_subcommand("gen-env", "Generate an environment and dump its snapshot");
    std::string gen_layout = "A", gen_door_policy = "open", gen_out;
    int gen_width = 0, gen_height = 0, gen_rooms = 0;
    std::uint64_t gen_seed = 0;
    gen->add_option("--layout", gen_layout, "A | B | C | custom");
    gen->add_option("--width", gen_width);
    gen->add_option("--height", gen_height);
    gen->add_option("--rooms", gen_rooms);
    gen->add_option("--door-policy", gen_door_policy, "open | locked");
    gen->add_option("--seed", gen_seed);
    gen->add_option("--out", gen_out, "Output file (stdout when omitted)");

    // --- collect ---
    auto* collect = app.add_subcommand("collect", "Roll the behavior policy and store the dataset");
    std::string col_env, col_policy = "uniform_random", col_out = "dataset.jsonl";
    int col_episodes = 100, col_max_len = 100, col_resample = 50;
    double col_epsilon = 0.3;
    std::uint64_t col_seed = 1;
    collect->add_option("--env-spec", col_env, "Environment spec JSON file")->required();
    collect->add_option("--policy", col_policy, "uniform_random | nav_toggle | landmark");
    collect->add_option("--epsilon", col_epsilon, "landmark: uniform-action probability");
    collect->add_option("--resample-every", col_resample, "landmark: steps between landmarks");
    collect->add_option("--episodes", col_episodes);
    collect->add_option("--max-len", col_max_len);
    collect->add_option("--seed", col_seed);
    collect->add_option("--out", col_out);

    // --- abstract ---
    auto* abs_cmd = app.add_subcommand("abstract", "Map a dataset through F(.; g)");
    std::string abs_data, abs_goal, abs_cfg, abs_out = "abstract.jsonl";
    bool abs_verify = false;
    abs_cmd->add_option("--data", abs_data, "Dataset JSONL")->required();
    abs_cmd->add_option("--goal", abs_goal, "Goal instruction text")->required();
    abs_cmd->add_option("--abs-config", abs_cfg, "Abstraction config JSON");
    abs_cmd->add_flag("--verify", abs_verify, "Replay-verify the dataset while loading");
    abs_cmd->add_option("--out", abs_out);

    // --- build-amdp ---
    auto* build = app.add_subcommand("build-amdp", "Estimate the abstract MDP from counts");
    std::string bld_abstract, bld_reward = "reach_prob", bld_out = "amdp.json";
    double bld_gamma = 0.95;
    build->add_option("--abstract", bld_abstract, "Abstract dataset JSONL")->required();
    build->add_option("--reward", bld_reward, "reach_prob | neg_distance");
    build->add_option("--gamma", bld_gamma);
    build->add_option("--out", bld_out);

    // --- solve ---
    auto* solve = app.add_subcommand("solve", "Q-learning plus greedy policy extraction");
    std::string sol_amdp, sol_out = "qtable.json", sol_policy_out = "policy.json";
    std::string sol_method = "q_learning";
    double sol_alpha = 1.0, sol_tol = 1e-9;
    int sol_sweeps = 500;
    std::uint64_t sol_seed = 0;
    solve->add_option("--amdp", sol_amdp, "AMDP JSON")->required();
    solve->add_option("--method", sol_method, "q_learning | value_iteration");
    solve->add_option("--alpha", sol_alpha);
    solve->add_option("--sweeps", sol_sweeps);
    solve->add_option("--tol", sol_tol);
    solve->add_option("--seed", sol_seed);
    solve->add_option("--out", sol_out);
    solve->add_option("--policy-out", sol_policy_out);

    // --- export-sft ---
    auto* exp = app.add_subcommand("export-sft", "Render solved policies as an SFT dataset");
    std::string exp_amdp, exp_policy, exp_goal, exp_dir, exp_out = "sft.jsonl";
    bool exp_prompt = false;
    exp->add_option("--amdp", exp_amdp, "AMDP JSON (single-goal mode)");
    exp->add_option("--policy", exp_policy, "Policy JSON (single-goal mode)");
    exp->add_option("--goal", exp_goal, "Goal text (single-goal mode)");
    exp->add_option("--from-dir", exp_dir, "Pipeline output directory (multi-goal mode)");
    exp->add_flag("--prompt-completion", exp_prompt, "Emit prompt/completion records");
    exp->add_option("--out", exp_out);

    // --- eval ---
    auto* ev = app.add_subcommand("eval", "Online evaluation against ground-truth rewards");
    std::string ev_env, ev_source = "random", ev_goal_file, ev_endpoint, ev_abs_cfg;
    std::string ev_amdp, ev_policy, ev_out, ev_md;
    std::vector<std::string> ev_goals;
    int ev_episodes = 20, ev_max_steps = 500;
    std::uint64_t ev_seed = 0;
    double ev_gamma = 0.95, ev_timeout = 10.0;
    ev->add_option("--env-spec", ev_env, "Environment spec JSON file")->required();
    ev->add_option("--source", ev_source, "q | random | scripted | external");
    ev->add_option("--goal", ev_goals, "Goal instruction (repeatable)");
    ev->add_option("--goals-file", ev_goal_file, "Goal list file, one per line");
    ev->add_option("--amdp", ev_amdp, "AMDP JSON (source=q, single goal)");
    ev->add_option("--policy", ev_policy, "Policy JSON (source=q, single goal)");
    ev->add_option("--abs-config", ev_abs_cfg, "Abstraction config JSON");
    ev->add_option("--endpoint", ev_endpoint, "tcp:HOST:PORT | cmd:SHELL | stdio (source=external)");
    std::string ev_external;
    ev->add_option("--external", ev_external, "Shorthand for --source external --endpoint ARG");
    ev->add_option("--episodes-per-goal", ev_episodes);
    ev->add_option("--max-steps", ev_max_steps);
    ev->add_option("--seed", ev_seed);
    ev->add_option("--gamma", ev_gamma);
    ev->add_option("--timeout", ev_timeout, "External reply timeout in seconds");
    ev->add_option("--out", ev_out, "Report JSON path");
    ev->add_option("--report-md", ev_md, "Report Markdown path");

    // --- report ---
    auto* rep = app.add_subcommand("report", "Regenerate report.md/report.json from artifacts");
    std::string rep_dir;
    rep->add_option("--dir", rep_dir, "Pipeline output directory")->required();

    // --- pipeline ---
    auto* pipe = app.add_subcommand("pipeline", "Run every stage from one config");
    std::string pipe_config, pipe_out_override;
    long long pipe_collect_seed = -1, pipe_eval_seed = -1;
    int pipe_episodes = -1;
    pipe->add_option("--config", pipe_config, "Pipeline config JSON")->required();
    pipe->add_option("--out-dir", pipe_out_override, "Override the config's out_dir");
    pipe->add_option("--collect-seed", pipe_collect_seed, "Override the collection seed");
    pipe->add_option("--episodes", pipe_episodes, "Override the collection episode count");
    pipe->add_option("--eval-seed", pipe_eval_seed, "Override the evaluation seed");

    try {
        app.parse(argc, argv);

        if (*gen) {
            const auto spec =
                spec_from_flags(gen_layout, gen_width, gen_height, gen_rooms, gen_door_policy,
                                gen_seed);
            const auto env = gcrl::gridworld::generate_env(spec);
            const json doc{{"env_spec", gcrl::gridworld::env_spec_json(env.spec())},
                           {"snapshot", gcrl::gridworld::snapshot_json(env.base_state())},
                           {"start_cells", env.start_cells().size()}};
            if (gen_out.empty()) {
                std::cout << doc.dump(2) << "\n";
            } else {
                std::ofstream out(gen_out);
                out << doc.dump(2) << "\n";
                if (!out) throw gcrl::Error("write failed: " + gen_out);
            }
        } else if (*collect) {
            auto policy = gcrl::datastore::PolicySpec::parse(col_policy);
            policy.epsilon = col_epsilon;
            policy.resample_every = col_resample;
            const auto dataset = gcrl::datastore::collect(load_env_spec(col_env), policy,
                                                          col_episodes, col_max_len, col_seed);
            gcrl::datastore::save(dataset, col_out);
            std::cout << "wrote " << dataset.n_transitions() << " transitions to " << col_out
                      << "\n";
        } else if (*abs_cmd) {
            const auto dataset = gcrl::datastore::load(abs_data, abs_verify);
            const auto goal = gcrl::goals::parse_goal(abs_goal);
            const auto cfg = load_abstraction_config(abs_cfg);
            const auto ad = gcrl::abstraction::abstract_dataset(dataset, goal, cfg);
            gcrl::abstraction::save_abstract_dataset(ad, abs_out);
            std::cout << "wrote " << ad.transitions.size() << " abstract transitions ("
                      << ad.tokens.size() << " states) to " << abs_out << "\n";
        } else if (*build) {
            const auto ad = gcrl::abstraction::load_abstract_dataset(bld_abstract);
            const auto m = gcrl::amdp::build_amdp(
                ad, gcrl::amdp::reward_kind_from_string(bld_reward), bld_gamma);
            gcrl::amdp::save_amdp(m, bld_out);
            const auto stats = gcrl::amdp::coverage_stats(m);
            std::cout << "amdp: " << stats.n_states << " states, " << stats.observed_pairs
                      << " observed pairs -> " << bld_out << "\n";
        } else if (*solve) {
            const auto m = gcrl::amdp::load_amdp(sol_amdp);
            gcrl::solver::QTable q;
            if (sol_method == "q_learning") {
                gcrl::solver::QLearningParams params;
                params.alpha = sol_alpha;
                params.max_sweeps = sol_sweeps;
                params.tol = sol_tol;
                params.shuffle_seed = sol_seed;
                q = gcrl::solver::q_learning(m, params);
            } else if (sol_method == "value_iteration") {
                gcrl::solver::ValueIterationParams params;
                params.tol = sol_tol;
                q = gcrl::solver::value_iteration(m, params);
            } else {
                throw gcrl::ConfigError("unknown method: '" + sol_method + "'");
            }
            gcrl::solver::save_qtable(q, m, sol_out);
            gcrl::solver::save_policy(gcrl::solver::extract_policy(q), m, sol_policy_out);
            std::cout << (q.converged ? "converged" : "NOT converged") << " after "
                      << q.iterations_run << " sweeps (residual " << q.max_residual << ")\n";
        } else if (*exp) {
            std::vector<gcrl::sft::SFTRecord> records;
            if (!exp_dir.empty()) {
                namespace fs = std::filesystem;
                std::ifstream gin(fs::path(exp_dir) / "goals.json");
                if (!gin) throw gcrl::ConfigError("no goals.json under " + exp_dir);
                json gj;
                gin >> gj;
                std::vector<gcrl::goals::Goal> train_goals;
                for (const json& t : gj.at("train"))
                    train_goals.push_back(gcrl::goals::parse_goal(t.get<std::string>()));
                std::vector<gcrl::amdp::AMDP> models(train_goals.size());
                std::vector<gcrl::solver::Policy> policies(train_goals.size());
                std::vector<gcrl::sft::PolicyBundle> bundles;
                for (std::size_t i = 0; i < train_goals.size(); ++i) {
                    char stem[32];
                    std::snprintf(stem, sizeof stem, "train_%03zu", i);
                    models[i] = gcrl::amdp::load_amdp(
                        (fs::path(exp_dir) / "amdp" / (std::string(stem) + ".json")).string());
                    policies[i] = gcrl::solver::load_policy(
                        models[i],
                        (fs::path(exp_dir) / "policy" / (std::string(stem) + ".json")).string());
                    bundles.push_back({train_goals[i], &models[i], &policies[i]});
                }
                records = gcrl::sft::export_sft(bundles);
            } else {
                if (exp_amdp.empty() || exp_policy.empty() || exp_goal.empty())
                    throw gcrl::ConfigError(
                        "export-sft needs --from-dir or all of --amdp/--policy/--goal");
                const auto m = gcrl::amdp::load_amdp(exp_amdp);
                const auto p = gcrl::solver::load_policy(m, exp_policy);
                records = gcrl::sft::export_sft({{gcrl::goals::parse_goal(exp_goal), &m, &p}});
            }
            gcrl::sft::write_sft(records, exp_out, exp_prompt);
            std::cout << "wrote " << records.size() << " records to " << exp_out << "\n";
        } else if (*ev) {
            if (!ev_external.empty()) {
                ev_source = "external";
                ev_endpoint = ev_external;
            }
            const auto env = gcrl::gridworld::generate_env(load_env_spec(ev_env));
            const auto goal_list = goals_from_flags(ev_goals, ev_goal_file);
            gcrl::eval::EvalParams params;
            params.episodes_per_goal = ev_episodes;
            params.max_steps = ev_max_steps;
            params.seed = ev_seed;
            params.gamma = ev_gamma;
            params.external_timeout_s = ev_timeout;

            std::unique_ptr<gcrl::eval::PolicySource> owned;
            std::optional<gcrl::eval::QPolicySource> q_source;
            gcrl::amdp::AMDP model;
            gcrl::solver::Policy policy;
            gcrl::eval::PolicySource* source = nullptr;
            if (ev_source == "random") {
                owned = gcrl::eval::random_policy();
                source = owned.get();
            } else if (ev_source == "scripted") {
                owned = gcrl::eval::scripted_oracle();
                source = owned.get();
            } else if (ev_source == "q") {
                if (ev_amdp.empty() || ev_policy.empty())
                    throw gcrl::ConfigError("source=q needs --amdp and --policy");
                if (goal_list.size() != 1)
                    throw gcrl::ConfigError("source=q evaluates exactly one goal per policy");
                model = gcrl::amdp::load_amdp(ev_amdp);
                policy = gcrl::solver::load_policy(model, ev_policy);
                q_source.emplace(load_abstraction_config(ev_abs_cfg));
                q_source->add_goal(goal_list[0], &model, &policy);
                source = &*q_source;
            } else if (ev_source == "external") {
                if (ev_endpoint.empty()) throw gcrl::ConfigError("source=external needs --endpoint");
                std::optional<gcrl::abstraction::AbstractionConfig> cfg;
                if (!ev_abs_cfg.empty()) cfg = load_abstraction_config(ev_abs_cfg);
                owned = gcrl::eval::external_agent(
                    gcrl::net::open_endpoint(ev_endpoint, ev_timeout), cfg, ev_timeout);
                source = owned.get();
            } else {
                throw gcrl::ConfigError("unknown source: '" + ev_source + "'");
            }

            const auto report = gcrl::eval::evaluate(env, *source, goal_list, params);
            const std::string md = gcrl::eval::report_markdown({report});
            if (!ev_out.empty()) {
                std::ofstream out(ev_out);
                out << gcrl::eval::report_json(report).dump(2) << "\n";
                if (!out) throw gcrl::Error("write failed: " + ev_out);
            }
            if (!ev_md.empty()) {
                std::ofstream out(ev_md);
                out << md;
                if (!out) throw gcrl::Error("write failed: " + ev_md);
            }
            std::cerr << md;
        } else if (*rep) {
            gcrl::pipeline::regenerate_report(rep_dir);
            std::cout << "report regenerated under " << rep_dir << "\n";
        } else if (*pipe) {
            auto cfg = gcrl::pipeline::load_pipeline_config(pipe_config);
            if (!pipe_out_override.empty()) cfg.out_dir = pipe_out_override;
            if (pipe_collect_seed >= 0)
                cfg.collection.seed = static_cast<std::uint64_t>(pipe_collect_seed);
            if (pipe_episodes >= 0) cfg.collection.episodes = pipe_episodes;
            if (pipe_eval_seed >= 0) cfg.eval_cfg.seed = static_cast<std::uint64_t>(pipe_eval_seed);
            const auto result = gcrl::pipeline::run_pipeline(cfg);
            std::cout << "pipeline complete: " << result.files.size() << " artifacts under "
                      << cfg.out_dir << "\n";
        }
        return 0;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const gcrl::ProtocolError& e) {
        std::cerr << "protocol error: " << e.what() << "\n";
        return 2;
    } catch (const gcrl::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
}
