#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "wappo/env.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

using namespace wappo;

TEST_CASE("theme pair: deterministic, separated, in range") {
    for (const char* family : {"cartpole", "colorgrid"}) {
        auto [s1, t1] = sample_theme_pair(family, 0);
        auto [s2, t2] = sample_theme_pair(family, 0);
        CHECK(s1.serialize() == s2.serialize());
        CHECK(t1.serialize() == t2.serialize());

        auto [s3, t3] = sample_theme_pair(family, 1);
        CHECK(s1.serialize() != s3.serialize());

        double max_gap = 0.0;
        for (std::size_t i = 0; i < s1.colors.size(); ++i)
            for (int ch = 0; ch < 3; ++ch) {
                CHECK(s1.colors[i].second[ch] >= 0.0);
                CHECK(s1.colors[i].second[ch] <= 1.0);
                CHECK(t1.colors[i].second[ch] >= 0.0);
                CHECK(t1.colors[i].second[ch] <= 1.0);
                max_gap = std::max(max_gap,
                                   std::fabs(s1.colors[i].second[ch] - t1.colors[i].second[ch]));
            }
        CHECK(max_gap >= 0.2);
    }
}

TEST_CASE("theme serialization round trip") {
    auto [src, tgt] = sample_theme_pair("cartpole", 7);
    Theme copy = Theme::deserialize(src.serialize());
    CHECK(copy.seed == src.seed);
    REQUIRE(copy.colors.size() == src.colors.size());
    for (std::size_t i = 0; i < src.colors.size(); ++i) {
        CHECK(copy.colors[i].first == src.colors[i].first);
        for (int ch = 0; ch < 3; ++ch)
            CHECK(copy.colors[i].second[ch] == src.colors[i].second[ch]);
    }
}

TEST_CASE("cartpole reset convention over 1000 samples") {
    auto [theme, tgt] = sample_theme_pair("cartpole", 0);
    CartpoleDomain dom(theme, 123);
    for (int i = 0; i < 1000; ++i) {
        dom.reset();
        const CartpoleState& s = dom.state();
        CHECK(std::fabs(s.x) <= 0.05);
        CHECK(std::fabs(s.x_dot) <= 0.05);
        CHECK(std::fabs(s.theta) <= 0.05);
        CHECK(std::fabs(s.theta_dot) <= 0.05);
        CHECK(s.t == 0);
    }
}

TEST_CASE("colorgrid reset: agent and goal distinct floor cells") {
    auto [theme, tgt] = sample_theme_pair("colorgrid", 0);
    ColorGridDomain dom(theme, 9, 0);
    for (int i = 0; i < 1000; ++i) {
        dom.reset();
        const GridState& s = dom.state();
        CHECK((s.agent_r != s.goal_r || s.agent_c != s.goal_c));
        CHECK(!dom.layout().is_wall(s.agent_r, s.agent_c));
        CHECK(!dom.layout().is_wall(s.goal_r, s.goal_c));
    }
}

TEST_CASE("equal env seeds give hidden-state-identical resets under different themes") {
    auto [src_theme, tgt_theme] = sample_theme_pair("cartpole", 3);
    CartpoleDomain a(src_theme, 77), b(tgt_theme, 77);
    for (int i = 0; i < 20; ++i) {
        a.reset();
        b.reset();
        CHECK(a.state().x == b.state().x);
        CHECK(a.state().x_dot == b.state().x_dot);
        CHECK(a.state().theta == b.state().theta);
        CHECK(a.state().theta_dot == b.state().theta_dot);
    }
}

TEST_CASE("cartpole terminates past the 12 degree threshold") {
    auto [theme, tgt] = sample_theme_pair("cartpole", 0);
    CartpoleDomain dom(theme, 1);
    dom.reset();
    // drive the pole over by always pushing right; done must trip before cap
    int steps = 0;
    bool done = false;
    while (!done && steps < 200) {
        done = dom.step(1).done;
        ++steps;
    }
    CHECK(done);
    CHECK(std::fabs(dom.state().theta) > 12.0 * M_PI / 180.0);
}

TEST_CASE("cartpole dynamics mirror symmetry over 100 random states") {
    Rng rng(21);
    for (int i = 0; i < 100; ++i) {
        CartpoleState s;
        s.x = rng.uniform(-2.0, 2.0);
        s.x_dot = rng.uniform(-2.0, 2.0);
        s.theta = rng.uniform(-0.2, 0.2);
        s.theta_dot = rng.uniform(-2.0, 2.0);
        double force = rng.uniform_int(2) == 1 ? 10.0 : -10.0;

        CartpoleState n = cartpole_dynamics(s, force);
        CartpoleState m;
        m.x = -s.x;
        m.x_dot = -s.x_dot;
        m.theta = -s.theta;
        m.theta_dot = -s.theta_dot;
        CartpoleState nm = cartpole_dynamics(m, -force);
        CHECK(nm.x == doctest::Approx(-n.x).epsilon(1e-12));
        CHECK(nm.x_dot == doctest::Approx(-n.x_dot).epsilon(1e-12));
        CHECK(nm.theta == doctest::Approx(-n.theta).epsilon(1e-12));
        CHECK(nm.theta_dot == doctest::Approx(-n.theta_dot).epsilon(1e-12));
    }
}

TEST_CASE("cartpole energy drifts less than 5% over 50 zero-force steps") {
    Rng rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        CartpoleState s;
        s.x = rng.uniform(-0.05, 0.05);
        s.x_dot = rng.uniform(-0.05, 0.05);
        s.theta = rng.uniform(-0.05, 0.05);
        s.theta_dot = rng.uniform(-0.05, 0.05);
        double e0 = cartpole_energy(s);
        REQUIRE(e0 > 0.0);  // dominated by pole potential energy near upright
        for (int i = 0; i < 50; ++i) s = cartpole_dynamics(s, 0.0);
        double e1 = cartpole_energy(s);
        CHECK(std::fabs(e1 - e0) / std::fabs(e0) < 0.05);
    }
}

TEST_CASE("emit is pure and themes change colors, never geometry") {
    auto [src_theme, tgt_theme] = sample_theme_pair("cartpole", 5);
    CartpoleState s;
    s.x = 0.37;
    s.theta = 0.1;

    Observation a = CartpoleDomain::emit(s, src_theme);
    Observation b = CartpoleDomain::emit(s, src_theme);
    REQUIRE(a.pixels.size() == static_cast<std::size_t>(kObsDim));
    for (int i = 0; i < kObsDim; ++i) CHECK(a.pixels[i] == b.pixels[i]);

    // masks are theme-independent by construction; assert they explain every
    // pixel difference between two theme renderings
    Observation c = CartpoleDomain::emit(s, tgt_theme);
    auto masks = CartpoleDomain::emission_masks(s);
    int n = kObsSize * kObsSize;
    for (int i = 0; i < n; ++i) {
        double predicted[3] = {0, 0, 0};
        for (int ch = 0; ch < 3; ++ch) {
            const char* names[5] = {"background", "track", "cart", "pole", "axle"};
            for (int l = 0; l < 5; ++l) {
                double diff = tgt_theme.color(names[l])[ch] - src_theme.color(names[l])[ch];
                predicted[ch] += masks[i][l] * diff;
            }
            double actual = c.pixels[ch * n + i] - a.pixels[ch * n + i];
            CHECK(actual == doctest::Approx(predicted[ch]).epsilon(1e-12));
        }
    }
}

TEST_CASE("pixels lie in [0,1] and pure-background pixels equal the background color") {
    auto [theme, tgt] = sample_theme_pair("cartpole", 2);
    CartpoleState s;  // centered, upright
    Observation obs = CartpoleDomain::emit(s, theme);
    int n = kObsSize * kObsSize;
    for (double v : obs.pixels) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    // top-left corner is far from track/cart/pole: pure background
    const Rgb& bg = theme.color("background");
    for (int ch = 0; ch < 3; ++ch) CHECK(obs.pixels[ch * n + 0] == bg[ch]);
}

TEST_CASE("colorgrid emission marks agent, goal, walls, and floor") {
    auto [theme, tgt] = sample_theme_pair("colorgrid", 1);
    GridLayout layout = make_grid_layout(1);
    GridState s;
    s.agent_r = 0;
    s.agent_c = 0;
    s.goal_r = 7;
    s.goal_c = 7;
    Observation obs = ColorGridDomain::emit(s, layout, theme);
    int n = kObsSize * kObsSize;
    auto pixel = [&](int r, int c, int ch) { return obs.pixels[ch * n + r * kObsSize + c]; };
    for (int ch = 0; ch < 3; ++ch) {
        CHECK(pixel(1, 1, ch) == theme.color("agent")[ch]);
        CHECK(pixel(22, 22, ch) == theme.color("goal")[ch]);
    }
    for (double v : obs.pixels) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("grid layouts are deterministic, connected, and within the wall budget") {
    for (std::uint64_t id = 0; id < 20; ++id) {
        GridLayout a = make_grid_layout(id);
        GridLayout b = make_grid_layout(id);
        CHECK(a.wall == b.wall);

        int walls = 0;
        for (bool w : a.wall) walls += w ? 1 : 0;
        CHECK(walls <= 10);  // duplicates may collide onto one cell

        // connectivity: flood fill from the first floor cell reaches all floor
        int start = -1, floor_count = 0;
        for (int i = 0; i < kGridCells * kGridCells; ++i)
            if (!a.wall[i]) {
                if (start < 0) start = i;
                ++floor_count;
            }
        std::vector<int> stack{start};
        std::set<int> seen{start};
        while (!stack.empty()) {
            int cell = stack.back();
            stack.pop_back();
            int r = cell / kGridCells, c = cell % kGridCells;
            const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
            for (int k = 0; k < 4; ++k) {
                int nr = r + dr[k], nc = c + dc[k];
                if (nr < 0 || nr >= kGridCells || nc < 0 || nc >= kGridCells) continue;
                int ni = nr * kGridCells + nc;
                if (!a.wall[ni] && !seen.count(ni)) {
                    seen.insert(ni);
                    stack.push_back(ni);
                }
            }
        }
        CHECK(static_cast<int>(seen.size()) == floor_count);
    }
}

TEST_CASE("colorgrid rewards: goal step +1 and done, otherwise -0.01") {
    auto [theme, tgt] = sample_theme_pair("colorgrid", 0);
    ColorGridDomain dom(theme, 5, 0);
    bool exercised_goal = false;
    for (int attempt = 0; attempt < 50 && !exercised_goal; ++attempt) {
        dom.reset();
        const GridState& s = dom.state();
        // walk the agent toward the goal greedily (may be blocked by walls)
        for (int i = 0; i < 99 && !dom.done(); ++i) {
            int action;
            if (s.agent_r < s.goal_r) action = 1;
            else if (s.agent_r > s.goal_r) action = 0;
            else if (s.agent_c < s.goal_c) action = 3;
            else action = 2;
            bool adjacent = std::abs(s.agent_r - s.goal_r) + std::abs(s.agent_c - s.goal_c) == 1;
            StepResult res = dom.step(action);
            if (res.done && res.reward == 1.0) {
                CHECK(adjacent);
                CHECK(!res.truncated);
                exercised_goal = true;
                break;
            }
            if (!res.done) CHECK(res.reward == -0.01);
        }
    }
    CHECK(exercised_goal);
}

TEST_CASE("step contract errors") {
    auto [ctheme, ct] = sample_theme_pair("cartpole", 0);
    CartpoleDomain cart(ctheme, 1);
    CHECK_THROWS_AS(cart.step(0), EnvError);  // before reset
    cart.reset();
    CHECK_THROWS_AS(cart.step(2), EnvError);
    CHECK_THROWS_AS(cart.step(-1), EnvError);

    auto [gtheme, gt] = sample_theme_pair("colorgrid", 0);
    ColorGridDomain grid(gtheme, 1, 0);
    grid.reset();
    CHECK_THROWS_AS(grid.step(4), EnvError);
}

TEST_CASE("rewards and done flags are theme-invariant along a shared action sequence") {
    auto [src_theme, tgt_theme] = sample_theme_pair("cartpole", 11);
    CartpoleDomain a(src_theme, 42), b(tgt_theme, 42);
    Rng rng(1);
    for (int episode = 0; episode < 3; ++episode) {
        a.reset();
        b.reset();
        while (true) {
            int action = static_cast<int>(rng.uniform_int(2));
            StepResult ra = a.step(action);
            StepResult rb = b.step(action);
            CHECK(ra.reward == rb.reward);
            CHECK(ra.done == rb.done);
            CHECK(ra.truncated == rb.truncated);
            if (ra.done) break;
        }
    }
}

TEST_CASE("paired probe is the emitted version of one hidden trajectory") {
    for (const char* family : {"cartpole", "colorgrid"}) {
        PairedProbe probe = paired_probe(family, 6, 40);
        REQUIRE(probe.source.size() == 40);
        REQUIRE(probe.target.size() == 40);
        auto [src_theme, tgt_theme] = sample_theme_pair(family, 6);

        if (std::string(family) == "cartpole") {
            REQUIRE(probe.cartpole_states.size() == 40);
            for (int i = 0; i < 40; ++i) {
                Observation s = CartpoleDomain::emit(probe.cartpole_states[i], src_theme);
                Observation t = CartpoleDomain::emit(probe.cartpole_states[i], tgt_theme);
                CHECK(s.pixels == probe.source[i].pixels);
                CHECK(t.pixels == probe.target[i].pixels);
            }
        } else {
            REQUIRE(probe.grid_states.size() == 40);
            GridLayout layout = make_grid_layout(6);
            for (int i = 0; i < 40; ++i) {
                Observation s = ColorGridDomain::emit(probe.grid_states[i], layout, src_theme);
                CHECK(s.pixels == probe.source[i].pixels);
            }
        }
    }
}

TEST_CASE("training sources never reference the paired probe oracle") {
    for (const char* file : {"/src/trainer.cpp", "/src/ppo.cpp", "/src/confusion.cpp",
                             "/include/wappo/trainer.hpp", "/include/wappo/ppo.hpp",
                             "/include/wappo/confusion.hpp"}) {
        std::ifstream in(std::string(WAPPO_SOURCE_DIR) + file);
        REQUIRE(in.good());
        std::stringstream buf;
        buf << in.rdbuf();
        CHECK(buf.str().find("paired_probe") == std::string::npos);
    }
}

TEST_CASE("fresh() clones the same Block MDP member") {
    auto [theme, tgt] = sample_theme_pair("colorgrid", 2);
    ColorGridDomain dom(theme, 1, 2);
    auto clone = dom.fresh(99);
    CHECK(clone->family() == dom.family());
    CHECK(clone->theme().serialize() == dom.theme().serialize());
    clone->reset();
    auto* grid = dynamic_cast<ColorGridDomain*>(clone.get());
    REQUIRE(grid != nullptr);
    CHECK(grid->layout().wall == dom.layout().wall);
}
