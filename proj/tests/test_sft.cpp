#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "gcrl/jsonio.hpp"
#include "gcrl/sft.hpp"
#include "test_support.hpp"

using namespace gcrl;
using namespace gcrl::sft;
using abstraction::AbstractionConfig;
using amdp::RewardKind;
using goals::Goal;
using goals::GoalKind;
using gridworld::EnvSpec;

namespace {

Goal tile_goal(int col, int row) {
    Goal g;
    g.kind = GoalKind::go_to_tile;
    g.tile = {col, row};
    g.surface_text = goals::render_goal(g);
    return g;
}

struct Solved {
    Goal goal;
    amdp::AMDP model;
    solver::QTable qtable;
    solver::Policy policy;
};

Solved solve_goal(const datastore::Dataset& dataset, const Goal& g) {
    Solved out;
    out.goal = g;
    out.model = amdp::build_amdp(
        abstraction::abstract_dataset(dataset, g, AbstractionConfig::defaults()),
        RewardKind::reach_prob, 0.95);
    out.qtable = solver::q_learning(out.model);
    out.policy = solver::extract_policy(out.qtable);
    return out;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

} // namespace

TEST_CASE("export produces one record per defined non-goal state, in stable order") {
    const auto dataset = datastore::collect(EnvSpec::layout_b(3), {}, 4, 60, 7);
    const Solved a = solve_goal(dataset, tile_goal(1, 2));
    const Solved b = solve_goal(dataset, tile_goal(2, 1));

    const auto records = export_sft({{a.goal, &a.model, &a.policy}, {b.goal, &b.model, &b.policy}});

    // Count formula: sum over goals of |defined policy states \ {goal state}|.
    auto expected = [](const Solved& s) {
        std::size_t n = 0;
        for (std::size_t i = 0; i < s.policy.action_by_state.size(); ++i)
            if (s.policy.action_by_state[i] && static_cast<int>(i) != s.model.goal_state) ++n;
        return n;
    };
    CHECK(records.size() == expected(a) + expected(b));

    // Ordered by goal text, no goal-state records, valid action names.
    for (std::size_t i = 1; i < records.size(); ++i)
        CHECK(records[i - 1].goal_text <= records[i].goal_text);
    for (const SFTRecord& r : records) {
        CHECK(r.state_text != "goal reached");
        CHECK(gridworld::action_from_string(r.action_text).has_value());
    }

    // (goal, state) pairs are unique within one export.
    std::set<std::pair<std::string, std::string>> keys;
    for (const SFTRecord& r : records) CHECK(keys.insert({r.goal_text, r.state_text}).second);
}

TEST_CASE("export rejects a policy/amdp mismatch") {
    const auto dataset = datastore::collect(EnvSpec::layout_b(3), {}, 2, 30, 7);
    const Solved a = solve_goal(dataset, tile_goal(1, 2));
    solver::Policy truncated = a.policy;
    truncated.action_by_state.pop_back();
    CHECK_THROWS_AS(export_sft({{a.goal, &a.model, &truncated}}), IntegrityError);
}

TEST_CASE("sft files: round trip identity, determinism, malformed input errors") {
    const auto dataset = datastore::collect(EnvSpec::layout_b(3), {}, 4, 60, 7);
    const Solved a = solve_goal(dataset, tile_goal(1, 2));
    const auto records = export_sft({{a.goal, &a.model, &a.policy}});
    REQUIRE(!records.empty());

    namespace fs = std::filesystem;
    const std::string p1 = (fs::temp_directory_path() / "gcrl_sft1.jsonl").string();
    const std::string p2 = (fs::temp_directory_path() / "gcrl_sft2.jsonl").string();
    write_sft(records, p1);
    write_sft(records, p2);
    const std::string bytes = slurp(p1);
    CHECK(bytes == slurp(p2));
    CHECK(bytes.back() == '\n');

    CHECK(import_sft(p1) == records);

    // Unknown action name fails with its line number.
    {
        std::ofstream out(p2, std::ios::binary);
        out << R"({"goal":"g","state":"s","action":"forward"})" << "\n";
        out << R"({"goal":"g","state":"s2","action":"jump"})" << "\n";
    }
    try {
        import_sft(p2);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line_number == 2);
    }

    // Empty file: empty sequence.
    {
        std::ofstream out(p2, std::ios::binary);
    }
    CHECK(import_sft(p2).empty());

    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("prompt/completion view carries the same content") {
    const auto dataset = datastore::collect(EnvSpec::layout_b(3), {}, 2, 40, 7);
    const Solved a = solve_goal(dataset, tile_goal(1, 2));
    const auto records = export_sft({{a.goal, &a.model, &a.policy}});
    REQUIRE(!records.empty());

    namespace fs = std::filesystem;
    const std::string path = (fs::temp_directory_path() / "gcrl_sft_pc.jsonl").string();
    write_sft(records, path, /*prompt_completion=*/true);
    std::ifstream in(path);
    std::string line;
    std::size_t i = 0;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        CHECK(j.at("prompt").get<std::string>() ==
              records[i].goal_text + "\n" + records[i].state_text);
        CHECK(j.at("completion").get<std::string>() == records[i].action_text);
        ++i;
    }
    CHECK(i == records.size());
    std::remove(path.c_str());
}

TEST_CASE("policy faithfulness: every exported action re-derives from the stored qtable") {
    const auto dataset = datastore::collect(EnvSpec::layout_b(3), {}, 4, 60, 7);
    const Solved a = solve_goal(dataset, tile_goal(1, 2));
    const Solved b = solve_goal(dataset, tile_goal(2, 1));
    const auto records = export_sft({{a.goal, &a.model, &a.policy}, {b.goal, &b.model, &b.policy}});

    std::map<std::pair<std::string, std::string>, std::string> by_key;
    for (const SFTRecord& r : records) by_key[{r.goal_text, r.state_text}] = r.action_text;

    for (const Solved* s : {&a, &b}) {
        const solver::Policy rederived = solver::extract_policy(s->qtable);
        for (std::size_t i = 0; i < s->model.n_states(); ++i) {
            if (!rederived.action_by_state[i] || static_cast<int>(i) == s->model.goal_state)
                continue;
            const auto it =
                by_key.find({s->goal.surface_text, render_state_text(s->model.states[i])});
            REQUIRE(it != by_key.end());
            CHECK(it->second == gridworld::to_string(*rederived.action_by_state[i]));
        }
    }
}

TEST_CASE("state text renders the pose, hand, doors and objects readably") {
    const std::string token =
        "grid=8x8;walls=ff;agent=4,2;dir=north;door:3,4=yellow,locked;carry=none;"
        "obj:6,5=blue key";
    const std::string text = render_state_text(token);
    CHECK(text.find("agent at (4, 2) facing north") != std::string::npos);
    CHECK(text.find("carrying nothing") != std::string::npos);
    CHECK(text.find("a yellow door at (3, 4) is locked") != std::string::npos);
    CHECK(text.find("a blue key at (6, 5)") != std::string::npos);
    CHECK(text.find("walls=") == std::string::npos); // wall bitmap stays out of the prose

    CHECK(render_state_text("grid=8x8;agent=1,1;dir=east;carry=red key") ==
          "agent at (1, 1) facing east; carrying a red key");
}
