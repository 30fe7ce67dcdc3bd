#include "doctest.h"

#include "platoon/error.hpp"
#include "platoon/sim_engine.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

using namespace platoon;

namespace {

struct Bench {
    Scenario scenario;
    LinearizedPlatoon plant;
};

Bench ring_bench(std::size_t n, std::size_t reach, double v_star = 15.0) {
    Bench b;
    Scenario& sc = b.scenario;
    sc.params.assign(n, VehicleParams{});
    const double d = 20.0 * static_cast<double>(n);
    sc.eq = equilibrium_fixed_speed(sc.params, d, v_star);
    sc.spec.n = n;
    sc.spec.road = RoadType::Ring;
    sc.spec.ring_length = d;
    for (std::size_t i = 2; i <= n; ++i) sc.spec.hdv_betas.push_back(linearize(sc.params[i - 1], sc.eq, i));
    sc.spec.observed = neighbourhood_observed(n, reach, reach);
    sc.horizon = 20.0;
    b.plant = build_plant(sc.spec, sc.eq, {});
    return b;
}

Bench open_bench(std::size_t n) {
    Bench b;
    Scenario& sc = b.scenario;
    sc.params.assign(n, VehicleParams{});
    sc.eq = equilibrium_open_road(sc.params, 15.0);
    sc.spec.n = n;
    sc.spec.road = RoadType::Open;
    for (std::size_t i = 2; i <= n; ++i) sc.spec.hdv_betas.push_back(linearize(sc.params[i - 1], sc.eq, i));
    sc.spec.observed = neighbourhood_observed(n, 0, n - 1);
    sc.horizon = 20.0;
    b.plant = build_plant(sc.spec, sc.eq, {});
    return b;
}

Controller ring_controller(const Bench& b) { return synthesize_nominal(reduce_ring(b.plant)).controller; }

double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

TEST_CASE("equilibrium is a fixed point with and without the controller") {
    Bench b = ring_bench(6, 2);
    b.scenario.horizon = 30.0;
    const Controller k = ring_controller(b);
    for (const bool with : {false, true}) {
        const Trajectory tr = simulate(b.scenario, with ? std::optional<Controller>(k) : std::nullopt);
        CHECK(tr.steps() == 3001);
        CHECK_FALSE(tr.collided);
        for (std::size_t i = 0; i < 6; ++i) {
            const auto c = static_cast<Eigen::Index>(i);
            CHECK((tr.v.col(c).array() - 15.0).abs().maxCoeff() < 1e-9);
            CHECK((tr.s.col(c).array() - b.scenario.eq.s_star[i]).abs().maxCoeff() < 1e-9);
        }
        CHECK(max_abs(tr.u) < 1e-9);
        CHECK(tr.events.empty());
    }
    Bench o = open_bench(4);
    const Trajectory tr = simulate(o.scenario, std::nullopt);
    CHECK((tr.v.array() - 15.0).abs().maxCoeff() < 1e-9);
    CHECK_THROWS_AS((void)ring_closure_error(tr), Error);
}

TEST_CASE("ring closure and no reversing under strong oscillation") {
    Bench b = ring_bench(20, 5);
    b.scenario.init.velocity_spread = 4.0;
    b.scenario.horizon = 100.0;
    const Trajectory tr = simulate(b.scenario, std::nullopt);
    CHECK_FALSE(tr.collided);
    CHECK(ring_closure_error(tr) <= 1e-9 * 400.0);
    CHECK(tr.v.minCoeff() >= 0.0);
    CHECK(oscillation_amplitude(tr, 80.0, 100.0) > 1.0);
}

TEST_CASE("simulation is deterministic") {
    Bench b = ring_bench(8, 3);
    b.scenario.init.velocity_spread = 3.0;
    b.scenario.seed = 99;
    b.scenario.disturbances = {{4, 5.0, 2.0, -3.0}};
    const Controller k = ring_controller(b);
    const Trajectory t1 = simulate(b.scenario, k);
    const Trajectory t2 = simulate(b.scenario, k);
    CHECK(t1.v == t2.v);
    CHECK(t1.s == t2.s);
    CHECK(t1.p == t2.p);
    CHECK(t1.u == t2.u);
    b.scenario.seed = 100;
    CHECK_FALSE(simulate(b.scenario, k).v == t1.v);
}

TEST_CASE("halving the step barely moves the terminal state") {
    Bench b = ring_bench(8, 3);
    b.scenario.init.velocity_spread = 0.3;
    const Controller k = ring_controller(b);
    const Trajectory coarse = simulate(b.scenario, k);
    b.scenario.dt = 0.005;
    const Trajectory fine = simulate(b.scenario, k);
    REQUIRE(coarse.events.empty());
    REQUIRE(fine.events.empty());
    const Eigen::Index lc = static_cast<Eigen::Index>(coarse.steps()) - 1;
    const Eigen::Index lf = static_cast<Eigen::Index>(fine.steps()) - 1;
    CHECK(fine.t.back() == doctest::Approx(coarse.t.back()));
    const double dv = (coarse.v.row(lc) - fine.v.row(lf)).cwiseAbs().maxCoeff() / fine.v.row(lf).cwiseAbs().maxCoeff();
    const double ds = (coarse.s.row(lc) - fine.s.row(lf)).cwiseAbs().maxCoeff() / fine.s.row(lf).cwiseAbs().maxCoeff();
    CHECK(dv < 1e-4);
    CHECK(ds < 1e-4);
}

TEST_CASE("small deviations follow the linearized closed loop") {
    Bench b = ring_bench(6, 2);
    b.scenario.init.velocity_spread = 1e-4;
    b.scenario.horizon = 10.0;
    const Controller k = ring_controller(b);
    const Trajectory tr = simulate(b.scenario, k);
    REQUIRE(tr.events.empty());

    const ClosedLoop cl = close_loop(b.plant.ss, k);
    const Eigen::Index nx = b.plant.ss.A.rows();
    Vector x0 = Vector::Zero(cl.A.rows());
    for (std::size_t i = 1; i <= 6; ++i) {
        x0(s_index(i)) = tr.s(0, static_cast<Eigen::Index>(i - 1)) - b.scenario.eq.s_star[i - 1];
        x0(v_index(i)) = tr.v(0, static_cast<Eigen::Index>(i - 1)) - 15.0;
    }
    double err = 0.0, scale = 0.0;
    for (std::size_t step = 0; step < tr.steps(); step += 50) {
        const Vector x = (cl.A * tr.t[step]).exp() * x0;
        for (std::size_t i = 1; i <= 6; ++i) {
            const auto r = static_cast<Eigen::Index>(step);
            const auto c = static_cast<Eigen::Index>(i - 1);
            const double es = tr.s(r, c) - b.scenario.eq.s_star[i - 1];
            const double ev = tr.v(r, c) - 15.0;
            err = std::max({err, std::abs(es - x(s_index(i))), std::abs(ev - x(v_index(i)))});
            scale = std::max({scale, std::abs(x(s_index(i))), std::abs(x(v_index(i)))});
        }
    }
    CHECK(nx == 12);
    CHECK(scale > 0.0);
    CHECK(err / scale < 1e-2);
}

TEST_CASE("controller dimensions are checked") {
    const Bench b = ring_bench(6, 2);
    Controller k = ring_controller(b);
    k.B_k.conservativeResize(Eigen::NoChange, k.B_k.cols() - 1);
    try {
        (void)simulate(b.scenario, k);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ConfigError);
    }
    Scenario bad = b.scenario;
    bad.dt = 0.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = b.scenario;
    bad.disturbances = {{3, 19.0, 5.0, -1.0}};
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("safety braking and collisions") {
    Bench b = ring_bench(10, 2);
    b.scenario.init.velocity_spread = 10.0;
    b.scenario.init.layout = Layout::Uniform;
    b.scenario.horizon = 30.0;
    const Trajectory tr = simulate(b.scenario, std::nullopt);
    bool braked = false;
    for (const Event& e : tr.events) braked = braked || e.kind == EventKind::SafetyBrake;
    CHECK(braked);
    CHECK(tr.v.minCoeff() >= 0.0);

    Bench crash = ring_bench(10, 2);
    crash.scenario.spec.ring_length = 60.0;
    crash.scenario.eq = equilibrium_velocity_for_ring(crash.scenario.params, 60.0);
    crash.scenario.init.layout = Layout::Uniform;
    crash.scenario.init.velocity_center = 20.0;
    crash.scenario.init.velocity_spread = 10.0;
    const Trajectory ct = simulate(crash.scenario, std::nullopt);
    CHECK(ct.collided);
    REQUIRE_FALSE(ct.events.empty());
    CHECK(ct.events.back().kind == EventKind::Collision);
    CHECK(ct.t.back() < crash.scenario.horizon);
}

TEST_CASE("metrics at equilibrium and under weight scaling") {
    Bench b = ring_bench(8, 3);
    const Trajectory eq = simulate(b.scenario, std::nullopt);
    const Metrics m0 = compute_metrics(eq, b.scenario.eq, {});
    CHECK(m0.quadratic_cost < 1e-12);
    CHECK(m0.max_spacing_error_cav < 1e-9);
    CHECK(m0.settled);
    CHECK(m0.settle_time == 0.0);
    CHECK(m0.min_spacing == doctest::Approx(20.0));

    b.scenario.init.velocity_spread = 2.0;
    const Controller k = ring_controller(b);
    const Trajectory tr = simulate(b.scenario, k);
    PerformanceWeights w;
    const Metrics m1 = compute_metrics(tr, b.scenario.eq, w);
    w.gamma_s *= 2.0;
    w.gamma_v *= 2.0;
    const Metrics m2 = compute_metrics(tr, b.scenario.eq, w);
    CHECK(m1.state_cost > 0.0);
    CHECK(m1.input_cost > 0.0);
    CHECK(m2.state_cost == doctest::Approx(4.0 * m1.state_cost).epsilon(1e-12));
    CHECK(m2.input_cost == m1.input_cost);
    CHECK(m1.quadratic_cost == doctest::Approx(m1.state_cost + m1.input_cost).epsilon(1e-12));
}

TEST_CASE("controller lowers the cost of a braking pulse") {
    Bench b = ring_bench(12, 4);
    b.scenario.horizon = 60.0;
    b.scenario.disturbances = {{5, 20.0, 3.0, -3.0}};
    const Controller k = ring_controller(b);
    const Trajectory with = simulate(b.scenario, k);
    const Trajectory without = simulate(b.scenario, std::nullopt);
    const Metrics mw = compute_metrics(with, b.scenario.eq, {}, 20.0);
    const Metrics mo = compute_metrics(without, b.scenario.eq, {}, 20.0);
    CHECK(mw.quadratic_cost < mo.quadratic_cost);
    CHECK(ring_closure_error(with) <= 1e-9 * b.scenario.spec.ring_length);
    CHECK(ring_closure_error(without) <= 1e-9 * b.scenario.spec.ring_length);
}

TEST_CASE("open-road controller keeps the platoon at the reference speed") {
    Bench b = open_bench(4);
    b.scenario.init.velocity_spread = 1.0;
    b.scenario.horizon = 60.0;
    const Controller k = synthesize_nominal(b.plant).controller;
    const Trajectory tr = simulate(b.scenario, k);
    CHECK_FALSE(tr.collided);
    CHECK(tr.u.cols() == 2);
    CHECK(max_velocity_deviation(tr, 15.0, 50.0) < 0.05);
}

TEST_CASE("trajectory CSV") {
    Bench b = ring_bench(3, 1);
    b.scenario.horizon = 0.05;
    const Trajectory tr = simulate(b.scenario, std::nullopt);
    std::ostringstream os;
    write_trajectory_csv(os, tr, 2);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "t,veh,p,v,s,u,event");
    std::vector<std::string> rows;
    while (std::getline(is, line)) rows.push_back(line);
    // Steps 0, 2, 4 and the final step 5, three vehicles each.
    CHECK(rows.size() == 12);
    CHECK(rows.front().rfind("0,1,", 0) == 0);
    CHECK(rows.back().rfind("0.05,3,", 0) == 0);
}
