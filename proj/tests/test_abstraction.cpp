#include <doctest.h>

#include <filesystem>
#include <map>
#include <set>

#include "gcrl/abstraction.hpp"
#include "gcrl/jsonio.hpp"
#include "gcrl/rng.hpp"
#include "test_support.hpp"

using namespace gcrl;
using namespace gcrl::abstraction;
using goals::Goal;
using goals::GoalKind;
using gridworld::CellKind;
using gridworld::Color;
using gridworld::Direction;
using gridworld::EnvSpec;
using gridworld::Environment;
using gridworld::GridPos;
using gridworld::LowLevelState;

namespace {

Goal tile_goal(int col, int row) {
    Goal g;
    g.kind = GoalKind::go_to_tile;
    g.tile = {col, row};
    g.surface_text = goals::render_goal(g);
    return g;
}

Goal object_goal(GoalKind kind, Color color, CellKind object) {
    Goal g;
    g.kind = kind;
    g.color = color;
    g.object = object;
    g.surface_text = goals::render_goal(g);
    return g;
}

// 7x7 room with a blue key and two distractors.
Environment figure_env() {
    EnvSpec spec = EnvSpec::custom(7, 7, 1, gridworld::DoorPolicy::open, 0);
    spec.distractors.push_back({CellKind::key, Color::blue, {4, 2}});
    spec.distractors.push_back({CellKind::ball, Color::grey, {2, 4}});
    spec.distractors.push_back({CellKind::box, Color::red, {5, 5}});
    return gridworld::generate_env(spec);
}

} // namespace

TEST_CASE("distractor positions do not affect tile-goal abstraction") {
    const Environment env = figure_env();
    LowLevelState a = env.base_state();
    LowLevelState b = a;
    b.at({2, 4}) = gridworld::make_empty();
    b.at({2, 3}) = gridworld::make_object(CellKind::ball, Color::grey); // ball moved

    const auto cfg = AbstractionConfig::defaults();
    const Goal g = tile_goal(1, 5);
    CHECK(abstract_state(a, g, cfg) == abstract_state(b, g, cfg));
    CHECK(a != b);
}

TEST_CASE("object-goal token keeps walls, matching objects and the pose, drops distractors") {
    const Environment env = figure_env();
    const auto cfg = AbstractionConfig::defaults();
    const Goal g = object_goal(GoalKind::go_to_object, Color::blue, CellKind::key);
    const std::string token = abstract_state(env.base_state(), g, cfg).token;

    CHECK(token.find("walls=") != std::string::npos);
    CHECK(token.find("agent=") != std::string::npos);
    CHECK(token.find("dir=") != std::string::npos);
    CHECK(token.find("obj:4,2=blue key") != std::string::npos);
    CHECK(token.find("ball") == std::string::npos);
    CHECK(token.find("box") == std::string::npos);

    // The distractors still vanish when they move.
    LowLevelState moved = env.base_state();
    moved.at({5, 5}) = gridworld::make_empty();
    moved.at({5, 4}) = gridworld::make_object(CellKind::box, Color::red);
    CHECK(abstract_state(moved, g, cfg).token == token);
}

TEST_CASE("states differing in agent direction stay distinct by default") {
    const Environment env = figure_env();
    LowLevelState a = env.base_state();
    LowLevelState b = a;
    b.agent_dir = gridworld::rotate_right(a.agent_dir);
    const Goal g = tile_goal(1, 5);
    CHECK(abstract_state(a, g, AbstractionConfig::defaults()) !=
          abstract_state(b, g, AbstractionConfig::defaults()));
}

TEST_CASE("goal-satisfying states collapse to the single GOAL token") {
    const Environment env = testing::tiny_room();
    const Goal g = tile_goal(2, 2);
    const auto cfg = AbstractionConfig::defaults();
    for (int dir = 0; dir < 4; ++dir) {
        LowLevelState x = env.base_state();
        x.agent_pos = {2, 2};
        x.agent_dir = static_cast<Direction>(dir);
        CHECK(abstract_state(x, g, cfg).token == kGoalToken);
    }
}

TEST_CASE("abstraction is a pure function of (x, g, cfg)") {
    const Environment env = gridworld::generate_env(EnvSpec::layout_b(5));
    const auto cfg = AbstractionConfig::defaults();
    const Goal g = tile_goal(1, 2);
    Rng rng(17);
    LowLevelState x = env.sample_initial(rng.next_u64());
    for (int i = 0; i < 300; ++i) {
        CHECK(abstract_state(x, g, cfg) == abstract_state(x, g, cfg));
        x = gridworld::step(x, gridworld::kAllActions[rng.below(6)]).state;
    }
}

TEST_CASE("monotone coarsening: adding kept features never merges states") {
    const Environment env = gridworld::generate_env(EnvSpec::layout_b(5));
    AbstractionConfig coarse = AbstractionConfig::defaults();
    FeatureSet fewer = coarse.for_kind(GoalKind::go_to_tile);
    fewer.remove(FeatureClass::agent_dir);
    fewer.remove(FeatureClass::doors);
    coarse.set_for_kind(GoalKind::go_to_tile, fewer);
    const AbstractionConfig fine = AbstractionConfig::defaults();

    const Goal g = tile_goal(1, 2);
    Rng rng(23);
    std::vector<LowLevelState> states;
    LowLevelState x = env.sample_initial(rng.next_u64());
    for (int i = 0; i < 200; ++i) {
        states.push_back(x);
        x = gridworld::step(x, gridworld::kAllActions[rng.below(6)]).state;
    }
    for (std::size_t i = 0; i < states.size(); ++i)
        for (std::size_t j = i + 1; j < states.size(); ++j) {
            const bool distinct_coarse =
                abstract_state(states[i], g, coarse) != abstract_state(states[j], g, coarse);
            const bool distinct_fine =
                abstract_state(states[i], g, fine) != abstract_state(states[j], g, fine);
            if (distinct_coarse) CHECK(distinct_fine);
        }
}

TEST_CASE("abstract_dataset: element-wise image preserving order and count") {
    const auto dataset = datastore::collect(EnvSpec::layout_b(5), {}, 3, 40, 9);
    const Goal g = tile_goal(1, 2);
    const auto cfg = AbstractionConfig::defaults();
    const AbstractDataset ad = abstract_dataset(dataset, g, cfg);

    CHECK(ad.transitions.size() == dataset.n_transitions());
    CHECK(ad.goal.surface_text == g.surface_text);

    // Spot-check the element-wise property against direct application.
    std::size_t i = 0;
    dataset.for_each_transition([&](const datastore::TransitionView& t) {
        const AbstractTransition& at = ad.transitions[i++];
        CHECK(ad.tokens[static_cast<std::size_t>(at.s)] == abstract_state(t.x, g, cfg).token);
        CHECK(ad.tokens[static_cast<std::size_t>(at.s_next)] ==
              abstract_state(t.x_next, g, cfg).token);
        CHECK(at.a == t.a);
        CHECK(at.episode == t.episode_id);
        CHECK(at.step == t.step_index);
    });

    // Empty in, empty out.
    const auto empty = datastore::collect(EnvSpec::layout_b(5), {}, 0, 10, 1);
    CHECK(abstract_dataset(empty, g, cfg).transitions.empty());
}

TEST_CASE("aggregation: distinct abstract states never exceed distinct low-level states") {
    const auto dataset = datastore::collect(EnvSpec::layout_b(5), {}, 5, 200, 13);
    const AbstractDataset ad =
        abstract_dataset(dataset, tile_goal(1, 2), AbstractionConfig::defaults());
    CHECK(ad.distinct_low_level > 0);
    CHECK(ad.tokens.size() < ad.distinct_low_level); // object motion collapses

}

TEST_CASE("abstract dataset file round trip") {
    const auto dataset = datastore::collect(EnvSpec::layout_b(5), {}, 2, 30, 9);
    const AbstractDataset ad =
        abstract_dataset(dataset, tile_goal(1, 2), AbstractionConfig::defaults());
    const std::string path =
        (std::filesystem::temp_directory_path() / "gcrl_abstract.jsonl").string();
    save_abstract_dataset(ad, path);
    const AbstractDataset back = load_abstract_dataset(path);
    CHECK(back.transitions.size() == ad.transitions.size());
    for (std::size_t i = 0; i < ad.transitions.size(); ++i) {
        const auto& a = ad.transitions[i];
        const auto& b = back.transitions[i];
        CHECK(ad.tokens[static_cast<std::size_t>(a.s)] ==
              back.tokens[static_cast<std::size_t>(b.s)]);
        CHECK(ad.tokens[static_cast<std::size_t>(a.s_next)] ==
              back.tokens[static_cast<std::size_t>(b.s_next)]);
        CHECK(a.a == b.a);
    }
    CHECK(back.distinct_low_level == ad.distinct_low_level);
    std::remove(path.c_str());
}

TEST_CASE("validate_partition accepts the default abstraction on layout B") {
    const Environment env = gridworld::generate_env(EnvSpec::layout_b(7));
    const auto sample = gridworld::enumerate_reachable(env, 1'000'000);
    const auto cfg = AbstractionConfig::defaults();

    const PartitionReport r = validate_partition(env, tile_goal(1, 2), cfg, sample);
    CHECK(r.valid);
    CHECK(r.unique_goal_class);
    CHECK(r.non_injective);
    CHECK(r.goal_token == kGoalToken);
    CHECK(r.n_positive > 0);
    CHECK(r.n_abstract < r.n_sample);
}

TEST_CASE("preimage classes partition the sample: disjoint and covering") {
    const Environment env = testing::tiny_room();
    const auto sample = gridworld::enumerate_reachable(env, 100000);
    const Goal g = tile_goal(2, 2);
    const auto cfg = AbstractionConfig::defaults();
    std::map<std::string, std::size_t> class_sizes;
    for (const LowLevelState& x : sample) {
        const std::string token = abstract_state(x, g, cfg).token;
        CHECK(abstract_state(x, g, cfg).token == token); // one class per state
        ++class_sizes[token];
    }
    std::size_t covered = 0;
    for (const auto& [token, n] : class_sizes) covered += n;
    CHECK(covered == sample.size());
    CHECK(class_sizes.size() > 1);
}

TEST_CASE("without the goal collapse, dropping agent_pos scatters the positives") {
    const Environment env = testing::tiny_room();
    AbstractionConfig cfg = AbstractionConfig::defaults();
    FeatureSet fs = cfg.for_kind(GoalKind::go_to_tile);
    fs.remove(FeatureClass::agent_pos);
    cfg.set_for_kind(GoalKind::go_to_tile, fs);

    const auto sample = gridworld::enumerate_reachable(env, 100000);
    const Goal g = tile_goal(2, 2);
    std::map<std::string, std::pair<int, int>> classes; // raw token -> (pos, neg)
    for (const LowLevelState& x : sample) {
        const std::string raw = serialize_features(x, g, fs);
        if (goals::psi(x, g))
            classes[raw].first++;
        else
            classes[raw].second++;
    }
    int mixed = 0;
    for (const auto& [token, counts] : classes)
        if (counts.first > 0 && counts.second > 0) ++mixed;
    CHECK(mixed >= 2);
}

TEST_CASE("validate_partition flags an injective sample") {
    const Environment env = testing::tiny_room(); // featureless besides the pose
    AbstractionConfig cfg = AbstractionConfig::defaults();
    cfg.set_for_kind(GoalKind::go_to_tile,
                     {FeatureClass::walls, FeatureClass::agent_pos, FeatureClass::agent_dir,
                      FeatureClass::doors, FeatureClass::carried_item, FeatureClass::all_objects});

    // Keep one goal-satisfying state only, so the collapse cannot provide
    // the required aggregation: every token then has a single preimage.
    const auto sample = gridworld::enumerate_reachable(env, 100000);
    const Goal g = tile_goal(2, 2);
    std::vector<LowLevelState> trimmed;
    bool kept_positive = false;
    for (const LowLevelState& x : sample) {
        if (goals::psi(x, g)) {
            if (kept_positive) continue;
            kept_positive = true;
        }
        trimmed.push_back(x);
    }
    const PartitionReport r = validate_partition(env, g, cfg, trimmed);
    CHECK(r.unique_goal_class);
    CHECK_FALSE(r.non_injective);
    CHECK_FALSE(r.valid);
    CHECK_FALSE(r.offending.empty());
}

TEST_CASE("validate_partition rejects samples from a different grid shape") {
    const Environment env = testing::tiny_room();
    std::vector<LowLevelState> sample = {
        gridworld::generate_env(EnvSpec::layout_b(1)).base_state()};
    CHECK_THROWS_AS(
        validate_partition(env, tile_goal(2, 2), AbstractionConfig::defaults(), sample),
        InputError);
}

TEST_CASE("markov_violation is zero for the default abstraction, exhaustive 5x5") {
    const Environment env = testing::tiny_room();
    const auto dataset = testing::exhaustive_dataset(env);
    const AbstractDataset ad =
        abstract_dataset(dataset, tile_goal(2, 2), AbstractionConfig::defaults());
    CHECK(markov_violation(ad) == 0.0);
}

TEST_CASE("markov_violation matches an independent successor-set enumeration when dropping dir") {
    const Environment env = testing::tiny_room();
    AbstractionConfig cfg = AbstractionConfig::defaults();
    FeatureSet fs = cfg.for_kind(GoalKind::go_to_tile);
    fs.remove(FeatureClass::agent_dir);
    cfg.set_for_kind(GoalKind::go_to_tile, fs);
    const Goal g = tile_goal(2, 2);

    // Independent oracle: the abstract state reduces to the agent position
    // (GOAL at the tile); group successors per (position, action) by
    // direct simulation.
    const auto states = gridworld::enumerate_reachable(env, 100000);
    std::map<std::pair<std::pair<int, int>, int>, std::set<std::pair<int, int>>> successors;
    for (const LowLevelState& x : states) {
        if (x.agent_pos == g.tile) continue; // absorbing goal class
        for (gridworld::Action a : gridworld::kAllActions) {
            const auto r = gridworld::step(x, a);
            successors[{{x.agent_pos.col, x.agent_pos.row}, static_cast<int>(a)}].insert(
                {r.state.agent_pos.col, r.state.agent_pos.row});
        }
    }
    int violating = 0;
    for (const auto& [key, succ] : successors)
        if (succ.size() >= 2) ++violating;
    const double expected =
        static_cast<double>(violating) / static_cast<double>(successors.size());

    const AbstractDataset ad = abstract_dataset(testing::exhaustive_dataset(env), g, cfg);
    CHECK(markov_violation(ad) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(markov_violation(ad) > 0.1);
}

TEST_CASE("markov_violation: single transition scores zero; empty errors") {
    const auto dataset = datastore::collect(EnvSpec::layout_b(5), {}, 1, 1, 3);
    const AbstractDataset ad =
        abstract_dataset(dataset, tile_goal(1, 2), AbstractionConfig::defaults());
    CHECK(markov_violation(ad) == 0.0);

    AbstractDataset empty;
    CHECK_THROWS_AS(markov_violation(empty), InputError);
}

TEST_CASE("independence check: distractor ball vs goal indicator on the uniform joint") {
    EnvSpec spec = EnvSpec::custom(6, 6, 1, gridworld::DoorPolicy::open, 0);
    spec.distractors.push_back({CellKind::ball, Color::grey, {2, 2}});
    const Environment env = gridworld::generate_env(spec);
    const Goal g = tile_goal(4, 4);
    const auto states = gridworld::enumerate_reachable(env, 1'000'000);

    const auto report = feature_independence_check(
        states, g, AbstractionConfig::defaults(),
        object_positions_extractor(CellKind::ball, Color::grey));
    CHECK(report.mi_goal < 0.01);
    CHECK(report.goal_independent);

    // Discarding the agent position instead: strongly goal-dependent.
    const auto bad = feature_independence_check(states, g, AbstractionConfig::defaults(),
                                                agent_pos_extractor());
    CHECK(bad.mi_goal > 0.1);
    CHECK_FALSE(bad.goal_independent);
}

TEST_CASE("independence check: empty inputs raise, tiny samples are low-power") {
    const auto dataset = datastore::collect(EnvSpec::layout_b(5), {}, 0, 10, 3);
    CHECK_THROWS_AS(feature_independence_check(dataset, tile_goal(1, 2),
                                               AbstractionConfig::defaults(),
                                               agent_pos_extractor()),
                    InputError);

    const auto tiny = datastore::collect(EnvSpec::layout_b(5), {}, 1, 3, 3);
    const auto report = feature_independence_check(
        tiny, tile_goal(1, 2), AbstractionConfig::defaults(), agent_pos_extractor());
    CHECK(report.low_power_goal);
}

TEST_CASE("abstraction config JSON round trip") {
    AbstractionConfig cfg = AbstractionConfig::defaults();
    FeatureSet fs = cfg.for_kind(GoalKind::pick_up);
    fs.remove(FeatureClass::walls);
    cfg.set_for_kind(GoalKind::pick_up, fs);

    const nlohmann::json j = abstraction_config_json(cfg);
    const AbstractionConfig back = abstraction_config_from_json(j);
    for (auto kind : {GoalKind::go_to_tile, GoalKind::go_to_object, GoalKind::pick_up})
        CHECK(back.for_kind(kind) == cfg.for_kind(kind));
    CHECK_FALSE(back.for_kind(GoalKind::pick_up).has(FeatureClass::walls));
}

TEST_CASE("token items split cleanly for the distance metrics") {
    const auto items = token_items("grid=5x5;agent=1,2;dir=east");
    REQUIRE(items.size() == 3);
    CHECK(items[0] == "grid=5x5");
    CHECK(items[2] == "dir=east");
    CHECK(token_items(kGoalToken) == std::vector<std::string>{kGoalToken});
}
