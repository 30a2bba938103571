#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "collab/env.hpp"
#include "test_util.hpp"

using namespace collab;

TEST_CASE("load_layout parses a small map") {
    Layout l = load_layout(test::kSmallMap, "small");
    CHECK(l.width == 5);
    CHECK(l.height == 4);
    CHECK(l.start_positions[0] == Cell{1, 1});
    CHECK(l.start_positions[1] == Cell{1, 3});
    CHECK(l.at({0, 2}) == Tile::Pot);
    CHECK(l.at({1, 0}) == Tile::OnionPile);
    CHECK(l.at({3, 1}) == Tile::PlatePile);
    CHECK(l.at({3, 3}) == Tile::ServeWindow);
    CHECK(l.at({1, 1}) == Tile::Floor);  // agent markers are floor
}

TEST_CASE("load_layout validation errors") {
    CHECK_THROWS_AS(load_layout("WWPWW\nO1 2W\nW   W\nWDWWW\n"), MissingStation);
    CHECK_THROWS_AS(load_layout("WWPWW\nO112W\nW  2W\nWDWXW\n"), WrongAgentCount);
    CHECK_THROWS_AS(load_layout("WWPWW\nO1 2W\nW  W\nWDWXW\n"), NonRectangular);
    CHECK_THROWS_AS(load_layout("WWPWW\nO1?2W\nW   W\nWDWXW\n"), UnknownChar);
    // floor on the boundary
    CHECK_THROWS_AS(load_layout("WWPWW\nO1 2 \nW   W\nWDWXW\n"), Error);
}

TEST_CASE("shipped layouts load and validate") {
    for (const char* name : {"cramped_room", "asymmetric_advantage", "coordination_ring"}) {
        Layout l = test::shipped_layout(name);
        CHECK(l.name == name);
        CHECK(!l.cells_of(Tile::Pot).empty());
        CHECK(!l.cells_of(Tile::OnionPile).empty());
        CHECK(!l.cells_of(Tile::PlatePile).empty());
        CHECK(!l.cells_of(Tile::ServeWindow).empty());
    }
}

TEST_CASE("reset is deterministic and clean") {
    Layout l = load_layout(test::kSmallMap, "small");
    EnvConfig cfg;
    GridState a = reset(l, cfg, 7);
    GridState b = reset(l, cfg, 7);
    CHECK(a == b);
    CHECK(a.t == 0);
    for (const auto& [cell, pot] : a.pots) {
        CHECK(pot.onion_count == 0);
        CHECK(pot.cook_timer == 0);
        CHECK(!pot.ready);
    }
    for (const auto& agent : a.agents) {
        CHECK(agent.facing == Action::North);
        CHECK(agent.held == HeldItem::Nothing);
    }
}

TEST_CASE("both agents staying is a no-op step") {
    Layout l = load_layout(test::kSmallMap, "small");
    EnvConfig cfg;
    GridState s = reset(l, cfg, 0);
    StepResult r = step(s, Action::Stay, Action::Stay, cfg);
    CHECK(r.reward == 0.0);
    CHECK(r.state.t == 1);
    CHECK(r.events[0] == StepEvents{});
    CHECK(r.events[1] == StepEvents{});
    CHECK(r.state.agents == s.agents);
}

TEST_CASE("delivery pays the configured reward") {
    Layout l = load_layout(test::kSmallMap, "small");
    EnvConfig cfg;
    GridState s = reset(l, cfg, 0);
    // place agent 1 below the serve window, facing it, soup in hand
    s.agents[1].pos = {2, 3};
    s.agents[1].facing = Action::South;
    s.agents[1].held = HeldItem::Soup;
    StepResult r = step(s, Action::Stay, Action::Interact, cfg);
    CHECK(r.reward == 20.0);
    CHECK(r.events[1].delivered);
    CHECK(r.state.agents[1].held == HeldItem::Nothing);
}

TEST_CASE("contested moves block both agents") {
    Layout l = load_layout(test::kSmallMap, "small");
    EnvConfig cfg;
    GridState s = reset(l, cfg, 0);
    // both want (1, 2)
    StepResult r = step(s, Action::East, Action::West, cfg);
    CHECK(r.events[0].blocked);
    CHECK(r.events[1].blocked);
    CHECK(r.state.agents[0].pos == s.agents[0].pos);
    CHECK(r.state.agents[1].pos == s.agents[1].pos);
    // facing still updates toward the attempted direction
    CHECK(r.state.agents[0].facing == Action::East);
    CHECK(r.state.agents[1].facing == Action::West);
}

TEST_CASE("swap-through is blocked") {
    Layout l = load_layout(test::kSmallMap, "small");
    EnvConfig cfg;
    GridState s = reset(l, cfg, 0);
    s.agents[0].pos = {2, 1};
    s.agents[1].pos = {2, 2};
    StepResult r = step(s, Action::East, Action::West, cfg);
    CHECK(r.events[0].blocked);
    CHECK(r.events[1].blocked);
    CHECK(r.state.agents[0].pos == Cell{2, 1});
    CHECK(r.state.agents[1].pos == Cell{2, 2});
}

TEST_CASE("moving into a vacated cell is allowed") {
    Layout l = load_layout(test::kSmallMap, "small");
    EnvConfig cfg;
    GridState s = reset(l, cfg, 0);
    s.agents[0].pos = {2, 1};
    s.agents[1].pos = {2, 2};
    StepResult r = step(s, Action::East, Action::East, cfg);
    CHECK(r.state.agents[0].pos == Cell{2, 2});
    CHECK(r.state.agents[1].pos == Cell{2, 3});
    CHECK(!r.events[0].blocked);
    CHECK(!r.events[1].blocked);
}

TEST_CASE("moving into a stationary agent blocks only the mover") {
    Layout l = load_layout(test::kSmallMap, "small");
    EnvConfig cfg;
    GridState s = reset(l, cfg, 0);
    s.agents[0].pos = {2, 1};
    s.agents[1].pos = {2, 2};
    StepResult r = step(s, Action::East, Action::Stay, cfg);
    CHECK(r.events[0].blocked);
    CHECK(!r.events[1].blocked);
    CHECK(r.state.agents[0].pos == Cell{2, 1});
}

// Scripted rollout oracle: one soup cooked and delivered by hand-authored
// action sequences, checked step by step against the observable state.
TEST_CASE("full soup pipeline yields exactly one delivery reward") {
    Layout l = load_layout(test::kSmallMap, "small");
    EnvConfig cfg;
    cfg.cook_time = 5;
    GridState s = reset(l, cfg, 0);
    double total = 0.0;
    auto play = [&](Action a0, Action a1) {
        StepResult r = step(s, a0, a1, cfg);
        s = r.state;
        total += r.reward;
        return r;
    };

    // agent 0 ferries three onions from the pile at (1,0) to the pot at (0,2)
    play(Action::West, Action::Stay);      // face the onion pile
    play(Action::Interact, Action::Stay);  // onion 1
    CHECK(s.agents[0].held == HeldItem::Onion);
    play(Action::East, Action::Stay);      // to (1,2)
    play(Action::North, Action::Stay);     // face the pot
    play(Action::Interact, Action::Stay);  // deposit 1
    CHECK(s.pots.at({0, 2}).onion_count == 1);
    play(Action::West, Action::Stay);   // back to (1,1)
    play(Action::West, Action::Stay);   // face the pile
    play(Action::Interact, Action::Stay);
    play(Action::East, Action::Stay);
    play(Action::North, Action::Stay);
    play(Action::Interact, Action::Stay);  // deposit 2
    CHECK(s.pots.at({0, 2}).onion_count == 2);
    play(Action::West, Action::Stay);
    play(Action::West, Action::Stay);
    play(Action::Interact, Action::Stay);
    play(Action::East, Action::Stay);
    play(Action::North, Action::Stay);
    // agent 1 heads for the plate pile at (3,1) while the pot fills
    play(Action::Interact, Action::South);  // deposit 3 -> cooking starts
    CHECK(s.pots.at({0, 2}).onion_count == 3);
    CHECK(s.pots.at({0, 2}).cook_timer == cfg.cook_time);
    play(Action::West, Action::West);       // agent 1 to (2,2)
    play(Action::Stay, Action::West);       // agent 1 to (2,1)
    play(Action::Stay, Action::South);      // face the plate pile
    StepResult plate = step(s, Action::Stay, Action::Interact, cfg);
    s = plate.state;
    CHECK(plate.events[1].plate_pickup);
    CHECK(s.agents[1].held == HeldItem::Plate);

    int guard = 0;
    while (!s.pots.at({0, 2}).ready) {
        play(Action::Stay, Action::Stay);
        REQUIRE(++guard < 10);
    }
    CHECK(s.pots.at({0, 2}).cook_timer == 0);

    // agent 1 walks to (1,2), scoops, then delivers at the window (3,3)
    play(Action::Stay, Action::East);   // (2,2)
    play(Action::Stay, Action::North);  // (1,2)
    play(Action::Stay, Action::North);  // face pot (blocked move)
    StepResult scoop = step(s, Action::Stay, Action::Interact, cfg);
    s = scoop.state;
    CHECK(scoop.events[1].pot_interaction);
    CHECK(s.agents[1].held == HeldItem::Soup);
    CHECK(s.pots.at({0, 2}).onion_count == 0);
    CHECK(!s.pots.at({0, 2}).ready);
    play(Action::Stay, Action::South);  // (2,2)
    play(Action::Stay, Action::East);   // (2,3)
    play(Action::Stay, Action::South);  // face the window
    CHECK(total == 0.0);
    StepResult deliver = step(s, Action::Stay, Action::Interact, cfg);
    s = deliver.state;
    total += deliver.reward;
    CHECK(deliver.events[1].delivered);
    CHECK(total == 20.0);
}

TEST_CASE("pot refuses a fourth onion and early scooping") {
    Layout l = load_layout(test::kSmallMap, "small");
    EnvConfig cfg;
    GridState s = reset(l, cfg, 0);
    s.pots[{0, 2}] = PotState{3, 10, false};  // cooking
    s.agents[0].pos = {1, 2};
    s.agents[0].facing = Action::North;
    s.agents[0].held = HeldItem::Onion;
    StepResult r = step(s, Action::Interact, Action::Stay, cfg);
    CHECK(r.state.pots.at({0, 2}).onion_count == 3);
    CHECK(r.state.agents[0].held == HeldItem::Onion);  // deposit refused
    CHECK(!r.events[0].pot_interaction);

    s.agents[0].held = HeldItem::Plate;
    r = step(s, Action::Interact, Action::Stay, cfg);
    CHECK(r.state.agents[0].held == HeldItem::Plate);  // not ready yet
    CHECK(r.state.pots.at({0, 2}).onion_count == 3);
}

TEST_CASE("horizon is enforced exactly") {
    Layout l = load_layout(test::kSmallMap, "small");
    EnvConfig cfg;
    cfg.horizon = 5;
    GridState s = reset(l, cfg, 0);
    for (int t = 0; t < 5; ++t) s = step(s, Action::Stay, Action::Stay, cfg).state;
    CHECK(s.t == 5);
    CHECK_THROWS_AS(step(s, Action::Stay, Action::Stay, cfg), EpisodeOver);
}

TEST_CASE("counter handoff within the window") {
    Layout l = load_layout(test::kSmallMap, "small");
    EnvConfig cfg;
    GridState s = reset(l, cfg, 0);
    auto play = [&](Action a0, Action a1) {
        StepResult r = step(s, a0, a1, cfg);
        s = r.state;
        return r;
    };
    play(Action::West, Action::Stay);      // agent0 faces onion pile
    play(Action::Interact, Action::Stay);  // picks onion
    play(Action::North, Action::Stay);     // faces wall (0,1)
    play(Action::Interact, Action::Stay);  // places onion on the counter
    CHECK(s.counters.count({0, 1}) == 1);
    CHECK(s.agents[0].held == HeldItem::Nothing);
    play(Action::South, Action::West);  // agent0 clears the cell, agent1 to (1,2)
    play(Action::Stay, Action::West);   // agent1 to (1,1)
    play(Action::Stay, Action::North);  // agent1 faces the counter
    StepResult r = step(s, Action::Stay, Action::Interact, cfg);
    CHECK(r.events[0].handoff);
    CHECK(r.events[1].handoff);
    CHECK(r.events[1].onion_pickup);
    CHECK(r.state.agents[1].held == HeldItem::Onion);
    CHECK(r.state.counters.empty());
}

TEST_CASE("pickup outside the handoff window is not a handoff") {
    Layout l = load_layout(test::kSmallMap, "small");
    EnvConfig cfg;
    cfg.handoff_window = 2;
    GridState s = reset(l, cfg, 0);
    auto play = [&](Action a0, Action a1) { s = step(s, a0, a1, cfg).state; };
    play(Action::West, Action::Stay);
    play(Action::Interact, Action::Stay);
    play(Action::North, Action::Stay);
    play(Action::Interact, Action::Stay);  // placed at t=3
    play(Action::South, Action::West);
    play(Action::Stay, Action::West);
    play(Action::Stay, Action::North);  // now t=7, window long gone
    StepResult r = step(s, Action::Stay, Action::Interact, cfg);
    CHECK(!r.events[0].handoff);
    CHECK(!r.events[1].handoff);
    CHECK(r.state.agents[1].held == HeldItem::Onion);
}

TEST_CASE("observations are full state and serialize bit-exactly") {
    Layout l = load_layout(test::kSmallMap, "small");
    EnvConfig cfg;
    GridState s = reset(l, cfg, 3);
    s = step(s, Action::East, Action::South, cfg).state;
    Observation o0 = observe(s, 0);
    Observation o1 = observe(s, 1);
    CHECK(o0.state == o1.state);
    CHECK(o0.observer == 0);
    CHECK(o1.observer == 1);

    auto j = observation_to_json(o0);
    Observation back = observation_from_json(j, s.layout);
    CHECK(back.state == o0.state);
    CHECK(back.observer == o0.observer);
    CHECK(observation_to_json(back).dump() == j.dump());
}

// Conservation and safety invariants under random joint actions.
TEST_CASE("random-action episodes conserve reward and respect pot bounds") {
    Layout l = test::shipped_layout("cramped_room");
    EnvConfig cfg;
    cfg.horizon = 120;
    std::mt19937_64 rng(99);
    for (int episode = 0; episode < 40; ++episode) {
        GridState s = reset(l, cfg, episode);
        double total = 0.0;
        int deliveries = 0;
        while (s.t < cfg.horizon) {
            auto a0 = static_cast<Action>(rng() % 6);
            auto a1 = static_cast<Action>(rng() % 6);
            StepResult r = step(s, a0, a1, cfg);
            total += r.reward;
            for (const auto& ev : r.events)
                if (ev.delivered) ++deliveries;
            s = r.state;
            for (const auto& [cell, pot] : s.pots) {
                REQUIRE(pot.onion_count >= 0);
                REQUIRE(pot.onion_count <= 3);
                REQUIRE(pot.cook_timer >= 0);
                if (pot.ready) REQUIRE(pot.cook_timer == 0);
                if (pot.cook_timer > 0) REQUIRE(pot.onion_count == 3);
            }
            REQUIRE(s.agents[0].pos != s.agents[1].pos);
            REQUIRE(s.layout->is_floor(s.agents[0].pos));
            REQUIRE(s.layout->is_floor(s.agents[1].pos));
        }
        REQUIRE(total == cfg.reward_per_delivery * deliveries);
    }
}

TEST_CASE("identical action sequences give identical trajectories") {
    Layout l = test::shipped_layout("coordination_ring");
    EnvConfig cfg;
    cfg.horizon = 60;
    std::mt19937_64 rng_a(5), rng_b(5);
    GridState a = reset(l, cfg, 1);
    GridState b = reset(l, cfg, 1);
    for (int t = 0; t < 60; ++t) {
        auto aa0 = static_cast<Action>(rng_a() % 6);
        auto aa1 = static_cast<Action>(rng_a() % 6);
        auto ba0 = static_cast<Action>(rng_b() % 6);
        auto ba1 = static_cast<Action>(rng_b() % 6);
        StepResult ra = step(a, aa0, aa1, cfg);
        StepResult rb = step(b, ba0, ba1, cfg);
        a = ra.state;
        b = rb.state;
        REQUIRE(a == b);
        REQUIRE(ra.reward == rb.reward);
        REQUIRE(ra.events == rb.events);
    }
}
