#include "doctest.h"

#include "platoon/error.hpp"
#include "platoon/ovm_model.hpp"
#include "platoon/rng.hpp"

#include <cmath>
#include <numbers>
#include <vector>

using namespace platoon;

namespace {

VehicleParams random_params(Rng& rng) {
    VehicleParams p;
    p.alpha = rng.uniform(0.1, 2.0);
    p.theta = rng.uniform(0.05, 2.0);
    p.s_st = rng.uniform(1.0, 8.0);
    p.s_go = p.s_st + rng.uniform(10.0, 50.0);
    p.v_max = rng.uniform(10.0, 40.0);
    return p;
}

bool throws_kind(ErrorKind kind, auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind() == kind;
    }
    return false;
}

}  // namespace

TEST_CASE("desired speed branches") {
    const VehicleParams p;
    CHECK(desired_speed(p, 5.0) == 0.0);
    CHECK(desired_speed(p, 2.0) == 0.0);
    CHECK(desired_speed(p, 20.0) == doctest::Approx(15.0).epsilon(1e-14));
    CHECK(desired_speed(p, 40.0) == 30.0);
    CHECK(desired_speed(p, 35.0) == 30.0);
}

TEST_CASE("desired speed is monotone and continuous") {
    Rng rng(11);
    for (int k = 0; k < 200; ++k) {
        const VehicleParams p = random_params(rng);
        double prev = desired_speed(p, 0.0);
        for (double s = 0.0; s <= p.s_go + 10.0; s += 0.05) {
            const double v = desired_speed(p, s);
            CHECK(v >= prev);
            CHECK(v - prev < 0.05 * p.v_max * std::numbers::pi / (p.s_go - p.s_st) + 1e-12);
            prev = v;
        }
    }
}

TEST_CASE("acceleration law") {
    const VehicleParams p;
    CHECK(acceleration(p, 15.0, 20.0, 0.0) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(acceleration(p, 0.0, 5.0, 0.0) == 0.0);
    CHECK(acceleration(p, 15.0, 20.0, 2.0) == doctest::Approx(1.8).epsilon(1e-13));
    CHECK(acceleration(p, 10.0, 40.0, -1.0) == doctest::Approx(0.6 * 20.0 - 0.9).epsilon(1e-14));
}

TEST_CASE("equilibrium spacing") {
    const VehicleParams p;
    CHECK(equilibrium_spacing(p, 15.0) == doctest::Approx(20.0).epsilon(1e-10));
    VehicleParams q;
    q.s_go = 30.0;
    CHECK(equilibrium_spacing(q, 15.0) == doctest::Approx(17.5).epsilon(1e-10));
    CHECK(throws_kind(ErrorKind::NoEquilibrium, [&] { (void)equilibrium_spacing(p, 30.0); }));
    CHECK(throws_kind(ErrorKind::NoEquilibrium, [&] { (void)equilibrium_spacing(p, 0.0); }));
    CHECK(throws_kind(ErrorKind::NoEquilibrium, [&] { (void)equilibrium_spacing(p, -3.0); }));
}

TEST_CASE("equilibrium spacing round-trips through the desired speed") {
    Rng rng(12);
    for (int k = 0; k < 1000; ++k) {
        const VehicleParams p = random_params(rng);
        const double v = rng.uniform(1e-3, 1.0 - 1e-3) * p.v_max;
        const double s = equilibrium_spacing(p, v);
        CHECK(s > p.s_st);
        CHECK(s < p.s_go);
        CHECK(std::abs(desired_speed(p, s) - v) <= 1e-9 * p.v_max);
    }
}

TEST_CASE("parameter validation") {
    VehicleParams p;
    CHECK_NOTHROW(p.validate());
    p.alpha = 0.0;
    CHECK(throws_kind(ErrorKind::InvalidArgument, [&] { p.validate(); }));
    p = {};
    p.theta = -0.1;
    CHECK(throws_kind(ErrorKind::InvalidArgument, [&] { p.validate(); }));
    p = {};
    p.s_go = p.s_st;
    CHECK(throws_kind(ErrorKind::InvalidArgument, [&] { p.validate(); }));
    p = {};
    p.theta = 0.0;
    CHECK_NOTHROW(p.validate());
}

TEST_CASE("closed ring equilibrium") {
    const std::vector<VehicleParams> twenty(20, VehicleParams{});
    const Equilibrium eq = equilibrium_velocity_for_ring(twenty, 400.0);
    CHECK(eq.v_star == doctest::Approx(15.0).epsilon(1e-9));
    for (const double s : eq.s_star) CHECK(s == doctest::Approx(20.0).epsilon(1e-9));

    const std::vector<VehicleParams> two(2, VehicleParams{});
    const Equilibrium eq2 = equilibrium_velocity_for_ring(two, 40.0);
    CHECK(eq2.v_star == doctest::Approx(15.0).epsilon(1e-9));
    CHECK(eq2.s_star[0] == doctest::Approx(20.0).epsilon(1e-9));
    CHECK(eq2.s_star[1] == doctest::Approx(20.0).epsilon(1e-9));

    CHECK(throws_kind(ErrorKind::NoEquilibrium, [&] { (void)equilibrium_velocity_for_ring(twenty, 2000.0); }));
    CHECK(throws_kind(ErrorKind::NoEquilibrium, [&] { (void)equilibrium_velocity_for_ring(twenty, 50.0); }));
}

TEST_CASE("closed ring equilibrium invariants on heterogeneous vehicles") {
    Rng rng(13);
    for (int k = 0; k < 50; ++k) {
        const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform(0.0, 20.0));
        std::vector<VehicleParams> ps;
        double lo = 0.0, hi = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            ps.push_back(random_params(rng));
            ps.back().v_max = 30.0;
            lo += ps.back().s_st;
            hi += ps.back().s_go;
        }
        const double d = lo + rng.uniform(0.05, 0.95) * (hi - lo);
        const Equilibrium eq = equilibrium_velocity_for_ring(ps, d);
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sum += eq.s_star[i];
            CHECK(std::abs(acceleration(ps[i], eq.v_star, eq.s_star[i], 0.0)) < 1e-9);
        }
        CHECK(std::abs(sum - d) <= 1e-6 * d);
    }
}

TEST_CASE("fixed-speed ring equilibrium puts the residual on the CAV") {
    std::vector<VehicleParams> ps(20, VehicleParams{});
    ps[3].s_go = 30.0;
    const Equilibrium eq = equilibrium_fixed_speed(ps, 400.0, 15.0);
    CHECK(eq.v_star == 15.0);
    CHECK(eq.s_star[3] == doctest::Approx(17.5).epsilon(1e-10));
    double hdv = 0.0;
    for (std::size_t i = 1; i < 20; ++i) {
        hdv += eq.s_star[i];
        CHECK(std::abs(acceleration(ps[i], 15.0, eq.s_star[i], 0.0)) < 1e-9);
    }
    CHECK(eq.s_star[0] == doctest::Approx(400.0 - hdv).epsilon(1e-12));
    CHECK(eq.s_star[0] == doctest::Approx(22.5).epsilon(1e-9));
    CHECK(throws_kind(ErrorKind::NoEquilibrium, [&] { (void)equilibrium_fixed_speed(ps, 300.0, 15.0); }));

    const Equilibrium same = ring_equilibrium(ps, 400.0, ClosureMode::FixedSpeed, 15.0);
    CHECK(same.s_star == eq.s_star);
    const Equilibrium closed = ring_equilibrium(ps, 400.0, ClosureMode::Closed, 15.0);
    CHECK(closed.v_star > 15.0);
}

TEST_CASE("open-road equilibrium") {
    std::vector<VehicleParams> ps(4, VehicleParams{});
    ps[2].s_go = 30.0;
    const Equilibrium eq = equilibrium_open_road(ps, 15.0);
    CHECK(eq.s_star[0] == doctest::Approx(20.0).epsilon(1e-10));
    CHECK(eq.s_star[2] == doctest::Approx(17.5).epsilon(1e-10));
}

TEST_CASE("linearization values and degenerate cases") {
    const VehicleParams p;
    const Betas b = linearize(p, 20.0);
    CHECK(b.beta1 == doctest::Approx(0.6 * std::numbers::pi / 2.0).epsilon(1e-12));
    CHECK(b.beta2 == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(b.beta3 == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(b.valid());

    VehicleParams q;
    q.alpha = 1.0;
    q.theta = 0.0;
    CHECK(throws_kind(ErrorKind::DegenerateLinearization, [&] { (void)linearize(q, 20.0); }));
    CHECK(throws_kind(ErrorKind::DegenerateLinearization, [&] { (void)linearize(p, 35.0); }));
    CHECK(throws_kind(ErrorKind::DegenerateLinearization, [&] { (void)linearize(p, 4.0); }));

    Equilibrium eq;
    eq.v_star = 15.0;
    eq.s_star = {20.0, 20.0};
    const Betas b2 = linearize(p, eq, 2);
    CHECK(b2.beta1 == doctest::Approx(b.beta1).epsilon(1e-15));
}

TEST_CASE("analytic betas agree with central differences of the acceleration law") {
    Rng rng(14);
    const double h = 1e-6;
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const VehicleParams p = random_params(rng);
        const double s = p.s_st + rng.uniform(0.02, 0.98) * (p.s_go - p.s_st);
        const double v = desired_speed(p, s);
        const Betas b = linearize(p, s);
        const double dh_ds = (acceleration(p, v, s + h, 0.0) - acceleration(p, v, s - h, 0.0)) / (2 * h);
        const double dh_dv = (acceleration(p, v + h, s, 0.0) - acceleration(p, v - h, s, 0.0)) / (2 * h);
        const double dh_dsd = (acceleration(p, v, s, h) - acceleration(p, v, s, -h)) / (2 * h);
        worst = std::max({worst, std::abs(b.beta1 - dh_ds), std::abs(b.beta2 - (dh_dsd - dh_dv)),
                          std::abs(b.beta3 - dh_dsd)});
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("slope is the derivative of the desired speed") {
    const VehicleParams p;
    for (double s = 5.5; s < 35.0; s += 0.5) {
        const double fd = (desired_speed(p, s + 1e-6) - desired_speed(p, s - 1e-6)) / 2e-6;
        CHECK(desired_speed_slope(p, s) == doctest::Approx(fd).epsilon(1e-7));
    }
    CHECK(desired_speed_slope(p, 3.0) == 0.0);
    CHECK(desired_speed_slope(p, 40.0) == 0.0);
}
