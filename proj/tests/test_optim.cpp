#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "wappo/optim.hpp"
#include "wappo/rng.hpp"

#include <cmath>

using namespace wappo;

namespace {

ParamMap one_param(const std::string& name, std::vector<double> data) {
    ParamMap m;
    std::size_t n = data.size();
    m[name] = Tensor::parameter(name, {n}, std::move(data));
    return m;
}

}  // namespace

TEST_CASE("zero gradient leaves parameters unchanged and decays square_avg") {
    ParamMap p = one_param("w", {0.5, -0.25});
    RmsPropState state;
    state.square_avg["w"] = {4.0, 1.0};
    GradMap g;
    g["w"] = {0.0, 0.0};
    rmsprop_step(p, g, state, 0.01);
    CHECK(p["w"].data()[0] == 0.5);
    CHECK(p["w"].data()[1] == -0.25);
    CHECK(state.square_avg["w"][0] == doctest::Approx(3.96).epsilon(1e-15));
    CHECK(state.square_avg["w"][1] == doctest::Approx(0.99).epsilon(1e-15));
}

TEST_CASE("first descent step hand-computed example") {
    // param 0, grad 1, rho 0.99, lr 0.01, eps 1e-8:
    //   square_avg = 0.01, param = -0.01/(0.1 + 1e-8) ~ -0.0999999990
    ParamMap p = one_param("w", {0.0});
    RmsPropState state;
    GradMap g;
    g["w"] = {1.0};
    rmsprop_step(p, g, state, 0.01);
    CHECK(state.square_avg["w"][0] == doctest::Approx(0.01).epsilon(1e-15));
    CHECK(p["w"].data()[0] == doctest::Approx(-0.01 / (0.1 + 1e-8)).epsilon(1e-12));
    CHECK(p["w"].data()[0] == doctest::Approx(-0.1).epsilon(1e-6));
}

TEST_CASE("ascent flips the update sign") {
    ParamMap pd = one_param("w", {0.0});
    ParamMap pa = one_param("w", {0.0});
    RmsPropState sd, sa;
    GradMap g;
    g["w"] = {1.0};
    rmsprop_step(pd, g, sd, 0.01, StepDirection::Descent);
    rmsprop_step(pa, g, sa, 0.01, StepDirection::Ascent);
    CHECK(pd["w"].data()[0] == -pa["w"].data()[0]);
    CHECK(pa["w"].data()[0] > 0.0);
}

TEST_CASE("non-positive learning rate is rejected") {
    ParamMap p = one_param("w", {0.0});
    RmsPropState state;
    GradMap g;
    g["w"] = {1.0};
    CHECK_THROWS_AS(rmsprop_step(p, g, state, 0.0), TensorError);
    CHECK_THROWS_AS(rmsprop_step(p, g, state, -1.0), TensorError);
}

TEST_CASE("state is the full sufficient statistic: resumed steps match") {
    Rng rng(3);
    auto make = [&](Rng r) {
        std::vector<double> d(8);
        for (auto& v : d) v = r.uniform(-1.0, 1.0);
        return d;
    };
    std::vector<double> init = make(Rng(3));
    GradMap g1, g2;
    g1["w"] = make(Rng(4));
    g2["w"] = make(Rng(5));

    // uninterrupted double step
    ParamMap pa = one_param("w", init);
    RmsPropState sa;
    rmsprop_step(pa, g1, sa, 0.01);
    rmsprop_step(pa, g2, sa, 0.01);

    // same two steps with the state copied in between (simulated save/resume)
    ParamMap pb = one_param("w", init);
    RmsPropState sb;
    rmsprop_step(pb, g1, sb, 0.01);
    RmsPropState resumed = sb;  // deep copy
    rmsprop_step(pb, g2, resumed, 0.01);

    for (std::size_t i = 0; i < 8; ++i) CHECK(pa["w"].data()[i] == pb["w"].data()[i]);
}

TEST_CASE("clamp_params clips to the bound and is idempotent") {
    ParamMap p = one_param("w", {0.5, -0.005, -0.5, 0.01, -0.01});
    clamp_params(p, 0.01);
    CHECK(p["w"].data()[0] == 0.01);
    CHECK(p["w"].data()[1] == -0.005);  // interior entry untouched
    CHECK(p["w"].data()[2] == -0.01);
    CHECK(p["w"].data()[3] == 0.01);
    CHECK(p["w"].data()[4] == -0.01);
    CHECK(max_abs_param(p) <= 0.01);

    std::vector<double> once = p["w"].data();
    clamp_params(p, 0.01);
    for (std::size_t i = 0; i < once.size(); ++i) CHECK(p["w"].data()[i] == once[i]);
}

TEST_CASE("max-norm after clamp is at most c exactly, across random parameters") {
    Rng rng(11);
    ParamMap p;
    for (int k = 0; k < 5; ++k) {
        std::vector<double> d(37);
        for (auto& v : d) v = rng.uniform(-3.0, 3.0);
        std::string name = "p" + std::to_string(k);
        p[name] = Tensor::parameter(name, {d.size()}, d);
    }
    clamp_params(p, 0.01);
    CHECK(max_abs_param(p) <= 0.01);
}
