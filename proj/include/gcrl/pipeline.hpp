#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gcrl/abstraction.hpp"
#include "gcrl/amdp.hpp"
#include "gcrl/datastore.hpp"
#include "gcrl/eval.hpp"
#include "gcrl/goals.hpp"
#include "gcrl/solver.hpp"

namespace gcrl::pipeline {

struct CollectionConfig {
    int episodes = 200;
    int max_len = 100;
    datastore::PolicySpec policy;
    std::uint64_t seed = 1;
};

struct GoalConfig {
    std::vector<std::string> train; // explicit instruction texts
    std::vector<std::string> test;
    bool use_sampler = false;
    goals::GoalKind sampler_kind = goals::GoalKind::go_to_tile;
    int n_train = 0;
    int n_test = 0;
    std::uint64_t sampler_seed = 0;
};

struct SolverConfig {
    double alpha = 1.0;
    int sweeps = 500;
    double tol = 1e-9;
    std::uint64_t seed = 0;
};

struct EvalConfig {
    int episodes_per_goal = 5;
    int max_steps = 100;
    std::uint64_t seed = 0;
};

// One document records every choice a run depends on.
struct PipelineConfig {
    int schema_version = 1;
    gridworld::EnvSpec env;
    CollectionConfig collection;
    GoalConfig goal_cfg;
    abstraction::AbstractionConfig abstraction_cfg = abstraction::AbstractionConfig::defaults();
    amdp::RewardKind reward_kind = amdp::RewardKind::reach_prob;
    double gamma = 0.95;
    SolverConfig solver_cfg;
    EvalConfig eval_cfg;
    std::string out_dir = "out";
    bool sft_prompt_completion = false;
    bool save_dataset = true;
};

nlohmann::json pipeline_config_json(const PipelineConfig& cfg);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
PipelineConfig load_pipeline_config(const std::string& path);

// Resolves goal lists (parses texts or runs the sampler) and enforces the
// train/test disjointness invariant. Throws ConfigError before any stage
// output is produced.
struct ResolvedGoals {
    std::vector<goals::Goal> train;
    std::vector<goals::Goal> test;
};
ResolvedGoals resolve_goals(const gridworld::Environment& env, const GoalConfig& cfg);

struct PipelineResult {
    ResolvedGoals goal_sets;
    eval::EvalReport train_report;
    eval::EvalReport test_report;
    std::vector<std::string> files; // manifest-relative artifact paths
};

// collect -> abstract (per goal) -> build_amdp -> q_learning ->
// extract_policy -> export_sft -> evaluate, writing every artifact under
// cfg.out_dir. On a stage failure the manifest is written with
// complete=false and the error is rethrown.
PipelineResult run_pipeline(const PipelineConfig& cfg);

// Regenerates report.md/report.json from the eval artifacts in out_dir.
void regenerate_report(const std::string& out_dir);

} // namespace gcrl::pipeline
