#include "gcrl/pipeline.hpp"

#include <filesystem>
#include <fstream>

#include "gcrl/jsonio.hpp"
#include "gcrl/sft.hpp"
#include "gcrl/sha256.hpp"

namespace gcrl::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

json pipeline_config_json(const PipelineConfig& cfg) {
    return {{"schema_version", cfg.schema_version},
            {"env", gridworld::env_spec_json(cfg.env)},
            {"collection",
             {{"episodes", cfg.collection.episodes},
              {"max_len", cfg.collection.max_len},
              {"policy",
               {{"name", cfg.collection.policy.name},
                {"epsilon", cfg.collection.policy.epsilon},
                {"resample_every", cfg.collection.policy.resample_every}}},
              {"seed", cfg.collection.seed}}},
            {"goals",
             cfg.goal_cfg.use_sampler
                 ? json{{"sampler",
                         {{"kind", goals::to_string(cfg.goal_cfg.sampler_kind)},
                          {"n_train", cfg.goal_cfg.n_train},
                          {"n_test", cfg.goal_cfg.n_test},
                          {"seed", cfg.goal_cfg.sampler_seed}}}}
                 : json{{"train", cfg.goal_cfg.train}, {"test", cfg.goal_cfg.test}}},
            {"abstraction", abstraction::abstraction_config_json(cfg.abstraction_cfg)},
            {"reward_kind", amdp::to_string(cfg.reward_kind)},
            {"gamma", cfg.gamma},
            {"solver",
             {{"alpha", cfg.solver_cfg.alpha},
              {"sweeps", cfg.solver_cfg.sweeps},
              {"tol", cfg.solver_cfg.tol},
              {"seed", cfg.solver_cfg.seed}}},
            {"eval",
             {{"episodes_per_goal", cfg.eval_cfg.episodes_per_goal},
              {"max_steps", cfg.eval_cfg.max_steps},
              {"seed", cfg.eval_cfg.seed}}},
            {"out_dir", cfg.out_dir},
            {"sft_prompt_completion", cfg.sft_prompt_completion},
            {"save_dataset", cfg.save_dataset}};
}

PipelineConfig pipeline_config_from_json(const json& j) {
    PipelineConfig cfg;
    try {
        cfg.schema_version = j.at("schema_version").get<int>();
        if (cfg.schema_version != 1)
            throw ConfigError("unsupported schema_version " +
                              std::to_string(cfg.schema_version));
        cfg.env = gridworld::env_spec_from_json(j.at("env"));
        if (j.contains("collection")) {
            const json& c = j.at("collection");
            if (c.contains("episodes")) cfg.collection.episodes = c.at("episodes").get<int>();
            if (c.contains("max_len")) cfg.collection.max_len = c.at("max_len").get<int>();
            if (c.contains("seed")) cfg.collection.seed = c.at("seed").get<std::uint64_t>();
            if (c.contains("policy")) {
                const json& p = c.at("policy");
                cfg.collection.policy =
                    datastore::PolicySpec::parse(p.at("name").get<std::string>());
                if (p.contains("epsilon"))
                    cfg.collection.policy.epsilon = p.at("epsilon").get<double>();
                if (p.contains("resample_every"))
                    cfg.collection.policy.resample_every = p.at("resample_every").get<int>();
            }
        }
        const json& g = j.at("goals");
        if (g.contains("sampler")) {
            const json& s = g.at("sampler");
            cfg.goal_cfg.use_sampler = true;
            cfg.goal_cfg.sampler_kind = goals::goal_kind_from_string(s.at("kind").get<std::string>());
            cfg.goal_cfg.n_train = s.at("n_train").get<int>();
            cfg.goal_cfg.n_test = s.at("n_test").get<int>();
            cfg.goal_cfg.sampler_seed = s.at("seed").get<std::uint64_t>();
        } else {
            cfg.goal_cfg.train = g.at("train").get<std::vector<std::string>>();
            if (g.contains("test")) cfg.goal_cfg.test = g.at("test").get<std::vector<std::string>>();
        }
        if (j.contains("abstraction"))
            cfg.abstraction_cfg = abstraction::abstraction_config_from_json(j.at("abstraction"));
        if (j.contains("reward_kind"))
            cfg.reward_kind = amdp::reward_kind_from_string(j.at("reward_kind").get<std::string>());
        if (j.contains("gamma")) cfg.gamma = j.at("gamma").get<double>();
        if (j.contains("solver")) {
            const json& s = j.at("solver");
            if (s.contains("alpha")) cfg.solver_cfg.alpha = s.at("alpha").get<double>();
            if (s.contains("sweeps")) cfg.solver_cfg.sweeps = s.at("sweeps").get<int>();
            if (s.contains("tol")) cfg.solver_cfg.tol = s.at("tol").get<double>();
            if (s.contains("seed")) cfg.solver_cfg.seed = s.at("seed").get<std::uint64_t>();
        }
        if (j.contains("eval")) {
            const json& e = j.at("eval");
            if (e.contains("episodes_per_goal"))
                cfg.eval_cfg.episodes_per_goal = e.at("episodes_per_goal").get<int>();
            if (e.contains("max_steps")) cfg.eval_cfg.max_steps = e.at("max_steps").get<int>();
            if (e.contains("seed")) cfg.eval_cfg.seed = e.at("seed").get<std::uint64_t>();
        }
        if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
        if (j.contains("sft_prompt_completion"))
            cfg.sft_prompt_completion = j.at("sft_prompt_completion").get<bool>();
        if (j.contains("save_dataset")) cfg.save_dataset = j.at("save_dataset").get<bool>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad pipeline config: ") + e.what());
    }
    return cfg;
}

PipelineConfig load_pipeline_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad pipeline config: ") + e.what());
    }
    return pipeline_config_from_json(j);
}

ResolvedGoals resolve_goals(const gridworld::Environment& env, const GoalConfig& cfg) {
    ResolvedGoals out;
    if (cfg.use_sampler) {
        goals::GoalSplit split =
            goals::sample_goal_split(env, cfg.sampler_kind, cfg.n_train, cfg.n_test,
                                     cfg.sampler_seed);
        out.train = std::move(split.train);
        out.test = std::move(split.test);
    } else {
        for (const std::string& text : cfg.train) out.train.push_back(goals::parse_goal(text));
        for (const std::string& text : cfg.test) out.test.push_back(goals::parse_goal(text));
    }
    if (out.train.empty()) throw ConfigError("no training goals configured");
    for (const goals::Goal& a : out.train)
        for (const goals::Goal& b : out.test)
            if (a.same_target(b))
                throw ConfigError("train and test goals overlap on target: '" + b.surface_text +
                                  "'");
    return out;
}

namespace {

struct ArtifactWriter {
    fs::path root;
    std::vector<std::string> files;

    fs::path resolve(const std::string& rel) {
        const fs::path p = root / rel;
        fs::create_directories(p.parent_path());
        return p;
    }
    void record(const std::string& rel) { files.push_back(rel); }

    void write_text(const std::string& rel, const std::string& text) {
        const fs::path p = resolve(rel);
        std::ofstream out(p, std::ios::binary);
        if (!out) throw Error("cannot open for writing: " + p.string());
        out << text;
        if (!out) throw Error("write failed: " + p.string());
        record(rel);
    }
    void write_json(const std::string& rel, const json& j) { write_text(rel, j.dump(2) + "\n"); }
};

void write_manifest(ArtifactWriter& w, bool complete, const std::string& stage_error) {
    json files = json::array();
    std::vector<std::string> sorted = w.files;
    std::sort(sorted.begin(), sorted.end());
    for (const std::string& rel : sorted)
        files.push_back({{"path", rel}, {"sha256", sha256_file_hex((w.root / rel).string())}});
    json j{{"schema_version", 1}, {"complete", complete}, {"files", std::move(files)}};
    if (!stage_error.empty()) j["error"] = stage_error;
    const fs::path p = w.root / "manifest.json";
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + p.string());
    out << j.dump(2) << "\n";
}

std::string goal_file_stem(const std::string& split, std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%s_%03zu", split.c_str(), index);
    return buf;
}

} // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg) {
    if (cfg.out_dir.empty()) throw ConfigError("out_dir must be set");
    const gridworld::Environment env = gridworld::generate_env(cfg.env);
    PipelineResult result;
    result.goal_sets = resolve_goals(env, cfg.goal_cfg); // validates before any output

    ArtifactWriter w{fs::path(cfg.out_dir), {}};
    fs::create_directories(w.root);
    std::string stage = "config";
    try {
        w.write_json("config.json", pipeline_config_json(cfg));
        {
            json goals_doc{{"train", json::array()}, {"test", json::array()}};
            for (const goals::Goal& g : result.goal_sets.train)
                goals_doc["train"].push_back(g.surface_text);
            for (const goals::Goal& g : result.goal_sets.test)
                goals_doc["test"].push_back(g.surface_text);
            w.write_json("goals.json", goals_doc);
        }

        stage = "collect";
        const datastore::Dataset dataset =
            datastore::collect(cfg.env, cfg.collection.policy, cfg.collection.episodes,
                               cfg.collection.max_len, cfg.collection.seed);
        if (cfg.save_dataset) {
            datastore::save(dataset, w.resolve("dataset.jsonl").string());
            w.record("dataset.jsonl");
        }

        struct Solved {
            goals::Goal goal;
            amdp::AMDP model;
            solver::QTable qtable;
            solver::Policy policy;
        };
        auto solve_split = [&](const std::vector<goals::Goal>& split_goals,
                               const std::string& split) {
            std::vector<Solved> out;
            for (std::size_t i = 0; i < split_goals.size(); ++i) {
                const goals::Goal& g = split_goals[i];
                const abstraction::AbstractDataset ad =
                    abstraction::abstract_dataset(dataset, g, cfg.abstraction_cfg);
                Solved s;
                s.goal = g;
                s.model = amdp::build_amdp(ad, cfg.reward_kind, cfg.gamma);
                solver::QLearningParams qp;
                qp.alpha = cfg.solver_cfg.alpha;
                qp.max_sweeps = cfg.solver_cfg.sweeps;
                qp.tol = cfg.solver_cfg.tol;
                qp.shuffle_seed = cfg.solver_cfg.seed;
                s.qtable = solver::q_learning(s.model, qp);
                s.policy = solver::extract_policy(s.qtable);

                const std::string stem = goal_file_stem(split, i);
                amdp::save_amdp(s.model, w.resolve("amdp/" + stem + ".json").string());
                w.record("amdp/" + stem + ".json");
                solver::save_qtable(s.qtable, s.model,
                                    w.resolve("qtable/" + stem + ".json").string());
                w.record("qtable/" + stem + ".json");
                solver::save_policy(s.policy, s.model,
                                    w.resolve("policy/" + stem + ".json").string());
                w.record("policy/" + stem + ".json");
                out.push_back(std::move(s));
            }
            return out;
        };

        stage = "solve";
        std::vector<Solved> train_solved = solve_split(result.goal_sets.train, "train");
        std::vector<Solved> test_solved = solve_split(result.goal_sets.test, "test");

        stage = "export-sft";
        {
            std::vector<sft::PolicyBundle> bundles;
            for (const Solved& s : train_solved)
                bundles.push_back({s.goal, &s.model, &s.policy});
            const std::vector<sft::SFTRecord> records = sft::export_sft(bundles);
            sft::write_sft(records, w.resolve("sft.jsonl").string(), cfg.sft_prompt_completion);
            w.record("sft.jsonl");
        }

        stage = "eval";
        eval::EvalParams ep;
        ep.episodes_per_goal = cfg.eval_cfg.episodes_per_goal;
        ep.max_steps = cfg.eval_cfg.max_steps;
        ep.seed = cfg.eval_cfg.seed;
        ep.gamma = cfg.gamma;
        auto eval_split = [&](const std::vector<Solved>& solved,
                              const std::vector<goals::Goal>& split_goals,
                              const std::string& label) {
            eval::QPolicySource source(cfg.abstraction_cfg);
            for (const Solved& s : solved) source.add_goal(s.goal, &s.model, &s.policy);
            eval::EvalReport report = eval::evaluate(env, source, split_goals, ep);
            report.source_name = "Q-learning (" + label + ")";
            return report;
        };
        result.train_report = eval_split(train_solved, result.goal_sets.train, "training goals");
        w.write_json("eval_train.json", eval::report_json(result.train_report));
        if (!test_solved.empty()) {
            result.test_report =
                eval_split(test_solved, result.goal_sets.test, "testing goals");
            w.write_json("eval_test.json", eval::report_json(result.test_report));
        }

        stage = "report";
        {
            std::vector<eval::EvalReport> reports{result.train_report};
            if (!test_solved.empty()) reports.push_back(result.test_report);
            json rj = json::array();
            for (const eval::EvalReport& r : reports) rj.push_back(eval::report_json(r));
            w.write_json("report.json", rj);
            w.write_text("report.md", eval::report_markdown(reports));
        }

        write_manifest(w, true, "");
    } catch (const std::exception& e) {
        write_manifest(w, false, "stage '" + stage + "': " + e.what());
        throw;
    }
    result.files = w.files;
    return result;
}

void regenerate_report(const std::string& out_dir) {
    ArtifactWriter w{fs::path(out_dir), {}};
    std::vector<eval::EvalReport> reports;
    for (const char* name : {"eval_train.json", "eval_test.json"}) {
        const fs::path p = w.root / name;
        if (!fs::exists(p)) continue;
        std::ifstream in(p);
        json j;
        in >> j;
        reports.push_back(eval::report_from_json(j));
    }
    if (reports.empty()) throw InputError("no eval artifacts found under " + out_dir);
    json rj = json::array();
    for (const eval::EvalReport& r : reports) rj.push_back(eval::report_json(r));
    w.write_json("report.json", rj);
    w.write_text("report.md", eval::report_markdown(reports));
}

} // namespace gcrl::pipeline
