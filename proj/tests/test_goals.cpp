#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "gcrl/goals.hpp"
#include "gcrl/rng.hpp"
#include "test_support.hpp"

using namespace gcrl;
using namespace gcrl::goals;
using gridworld::CellKind;
using gridworld::Color;
using gridworld::Direction;
using gridworld::EnvSpec;
using gridworld::GridPos;

TEST_CASE("parse_goal recognizes the three instruction shapes") {
    const Goal tile = parse_goal("go to the tile (4, 7)");
    CHECK(tile.kind == GoalKind::go_to_tile);
    CHECK(tile.tile == GridPos{4, 7});

    const Goal obj = parse_goal("Go to a blue key");
    CHECK(obj.kind == GoalKind::go_to_object);
    CHECK(obj.color == Color::blue);
    CHECK(obj.object == CellKind::key);

    const Goal pick = parse_goal("pick up the blue key");
    CHECK(pick.kind == GoalKind::pick_up);
    CHECK(pick.color == Color::blue);
    CHECK(pick.object == CellKind::key);
}

TEST_CASE("parse_goal tolerates case, spacing and wording variants") {
    CHECK(parse_goal("GO TO THE TILE (1,2)").tile == GridPos{1, 2});
    CHECK(parse_goal("  go  to   position ( 3 , 4 ) ").tile == GridPos{3, 4});
    CHECK(parse_goal("Go to position (10, 11)").kind == GoalKind::go_to_tile);
    CHECK(parse_goal("pick up a gray ball").color == Color::grey);
    CHECK(parse_goal("Pick up the red box.").object == CellKind::box);
    CHECK_THROWS_AS(parse_goal("fly to the moon"), UnsupportedGoalError);
    CHECK_THROWS_AS(parse_goal("go to the tile (x, y)"), UnsupportedGoalError);
}

TEST_CASE("render/parse is the identity on goal kind and target") {
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        Goal g;
        const int kind = static_cast<int>(rng.below(3));
        if (kind == 0) {
            g.kind = GoalKind::go_to_tile;
            g.tile = {static_cast<int>(rng.below(30)), static_cast<int>(rng.below(30))};
        } else {
            g.kind = kind == 1 ? GoalKind::go_to_object : GoalKind::pick_up;
            g.color = static_cast<Color>(rng.below(6));
            g.object = static_cast<CellKind>(3 + rng.below(3)); // key/ball/box
        }
        const Goal back = parse_goal(render_goal(g));
        CHECK(back.kind == g.kind);
        CHECK(back.same_target(g));
    }
}

TEST_CASE("psi: tile goals test the agent position") {
    const auto env = testing::tiny_room();
    gridworld::LowLevelState x = env.base_state();
    x.agent_pos = {4 % (x.width - 2) + 1, 3}; // somewhere valid
    Goal g;
    g.kind = GoalKind::go_to_tile;
    g.tile = x.agent_pos;
    CHECK(psi(x, g));
    g.tile = {x.agent_pos.col, x.agent_pos.row - 1};
    CHECK_FALSE(psi(x, g));
}

TEST_CASE("psi: infeasible tile goals raise errors") {
    const auto env = testing::tiny_room();
    Goal wall_goal;
    wall_goal.kind = GoalKind::go_to_tile;
    wall_goal.tile = {0, 0};
    CHECK_THROWS_AS(psi(env.base_state(), wall_goal), InfeasibleGoalError);
    wall_goal.tile = {99, 99};
    CHECK_THROWS_AS(psi(env.base_state(), wall_goal), InfeasibleGoalError);
}

TEST_CASE("psi: object goals use facing adjacency, pick-up uses the hand") {
    gridworld::LowLevelState x = testing::tiny_room().base_state();
    x.agent_pos = {1, 1};
    x.agent_dir = Direction::east;
    x.at({2, 1}) = gridworld::make_object(CellKind::ball, Color::grey);

    Goal face;
    face.kind = GoalKind::go_to_object;
    face.color = Color::grey;
    face.object = CellKind::ball;
    CHECK(psi(x, face));
    x.agent_dir = Direction::south;
    CHECK_FALSE(psi(x, face)); // adjacent but not facing

    Goal hold;
    hold.kind = GoalKind::pick_up;
    hold.color = Color::grey;
    hold.object = CellKind::ball;
    CHECK_FALSE(psi(x, hold));
    x.carrying = gridworld::make_object(CellKind::ball, Color::grey);
    CHECK(psi(x, hold));
    x.carrying = gridworld::make_object(CellKind::ball, Color::red);
    CHECK_FALSE(psi(x, hold));
}

TEST_CASE("psi is pure: repeated evaluation is identical") {
    const auto env = gridworld::generate_env(EnvSpec::layout_b(7));
    Rng rng(2);
    Goal g = parse_goal("go to the tile (1, 1)");
    gridworld::LowLevelState x = env.sample_initial(rng.next_u64());
    for (int i = 0; i < 500; ++i) {
        const bool a = psi(x, g);
        CHECK(a == psi(x, g));
        x = gridworld::step(x, gridworld::kAllActions[rng.below(6)]).state;
    }
}

TEST_CASE("goal_set_size: 5x5 single room tile goal has the four facing directions") {
    const auto env = testing::tiny_room();
    Goal g;
    g.kind = GoalKind::go_to_tile;
    g.tile = {2, 2};
    g.surface_text = render_goal(g);
    CHECK(goal_set_size(env, g) == 4);
}

TEST_CASE("goal_set_size: wall target errors, absent object counts zero") {
    const auto env = testing::tiny_room();
    Goal wall_goal;
    wall_goal.kind = GoalKind::go_to_tile;
    wall_goal.tile = {0, 2};
    CHECK_THROWS_AS(goal_set_size(env, wall_goal), InfeasibleGoalError);

    Goal absent;
    absent.kind = GoalKind::pick_up;
    absent.color = Color::red;
    absent.object = CellKind::box;
    CHECK(goal_set_size(env, absent) == 0);

    // Cap enforcement.
    Goal g;
    g.kind = GoalKind::go_to_tile;
    g.tile = {2, 2};
    CHECK_THROWS_AS(goal_set_size(env, g, 3), ResourceError);
}

TEST_CASE("goal files: one instruction per line with comments") {
    const std::string path =
        (std::filesystem::temp_directory_path() / "gcrl_goals.txt").string();
    {
        std::ofstream out(path);
        out << "# training goals\n";
        out << "go to the tile (2, 2)\n";
        out << "\n";
        out << "pick up the blue key\n";
    }
    const auto goals_list = load_goal_file(path);
    REQUIRE(goals_list.size() == 2);
    CHECK(goals_list[0].kind == GoalKind::go_to_tile);
    CHECK(goals_list[1].kind == GoalKind::pick_up);

    {
        std::ofstream out(path, std::ios::app);
        out << "nonsense instruction\n";
    }
    try {
        load_goal_file(path);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line_number == 5);
    }
    std::remove(path.c_str());
}

TEST_CASE("sample_goal_split: seeded, disjoint, reproducible") {
    const auto env = gridworld::generate_env(EnvSpec::layout_a(9));
    const GoalSplit s1 = sample_goal_split(env, GoalKind::go_to_tile, 20, 5, 31);
    const GoalSplit s2 = sample_goal_split(env, GoalKind::go_to_tile, 20, 5, 31);
    CHECK(s1.train.size() == 20);
    CHECK(s1.test.size() == 5);
    for (std::size_t i = 0; i < s1.train.size(); ++i)
        CHECK(s1.train[i].surface_text == s2.train[i].surface_text);
    for (const Goal& a : s1.train)
        for (const Goal& b : s1.test) CHECK_FALSE(a.same_target(b));

    // Not enough distinct targets -> config error.
    CHECK_THROWS_AS(sample_goal_split(testing::tiny_room(), GoalKind::go_to_tile, 8, 5, 1),
                    ConfigError);
}
