#include "doctest.h"

#include "platoon/error.hpp"
#include "platoon/modal_analysis.hpp"
#include "platoon/rng.hpp"

#include <cmath>
#include <vector>

using namespace platoon;

namespace {

Matrix scalar(double x) { return Matrix::Constant(1, 1, x); }

// HDV coefficients linearized from random OVM parameters at a common speed.
// `wide` draws far outside the usual driver ranges.
std::vector<Betas> physical_betas(Rng& rng, std::size_t count, bool wide = false) {
    const double v_star = rng.uniform(5.0, 25.0);
    std::vector<Betas> out;
    for (std::size_t i = 0; i < count; ++i) {
        VehicleParams p;
        p.alpha = wide ? rng.uniform(0.3, 1.2) : rng.uniform(0.5, 0.7);
        p.theta = wide ? rng.uniform(0.4, 1.5) : rng.uniform(0.8, 1.0);
        p.s_go = wide ? rng.uniform(30.0, 45.0) : rng.uniform(30.0, 40.0);
        out.push_back(linearize(p, equilibrium_spacing(p, v_star)));
    }
    return out;
}

LinearizedPlatoon plant_with(RoadType road, const std::vector<Betas>& betas, std::vector<std::size_t> observed) {
    PlatoonSpec spec;
    spec.n = betas.size() + 1;
    spec.road = road;
    spec.ring_length = road == RoadType::Ring ? 20.0 * static_cast<double>(spec.n) : 0.0;
    spec.hdv_betas = betas;
    spec.observed = std::move(observed);
    Equilibrium eq;
    eq.v_star = 15.0;
    eq.s_star.assign(spec.n, 20.0);
    return build_plant(spec, eq, {});
}

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
}

Matrix random_stable(Rng& rng, Eigen::Index n) {
    Matrix a = random_matrix(rng, n, n);
    a -= (spectral_abscissa(a) + rng.uniform(0.3, 1.0)) * Matrix::Identity(n, n);
    return a;
}

double sweep_max(const Matrix& a, const Matrix& b, const Matrix& c) {
    double best = 0.0;
    for (int k = 0; k < 10000; ++k) {
        const double w = std::pow(10.0, -3.0 + 6.0 * k / 9999.0);
        best = std::max(best, sigma_max_at(a, b, c, w));
    }
    return best;
}

}  // namespace

TEST_CASE("three-vehicle ring has one uncontrollable mode, at the origin") {
    Rng rng(31);
    for (int k = 0; k < 20; ++k) {
        const AnalysisReport r = pbh_report(plant_with(RoadType::Ring, physical_betas(rng, 2), {1}));
        CHECK(r.uncontrollable_total == 1);
        CHECK(r.uncontrollable_at_origin == 1);
        for (const ModeVerdict& m : r.modes) {
            if (!m.controllable) CHECK(std::abs(m.lambda) < 1e-8);
        }
        CHECK(r.stabilizable);
        CHECK_FALSE(r.strictly_stabilizable);
    }
}

TEST_CASE("three-vehicle open road has no uncontrollable unstable mode") {
    Rng rng(32);
    for (int k = 0; k < 20; ++k) {
        const AnalysisReport r = pbh_report(plant_with(RoadType::Open, physical_betas(rng, 2), {1}));
        for (const ModeVerdict& m : r.modes) {
            if (m.lambda.real() >= -1e-8) CHECK(m.controllable);
        }
        CHECK(r.uncontrollable_at_origin == 0);
        CHECK(r.stabilizable);
        CHECK(r.strictly_stabilizable);
    }
}

TEST_CASE("ring observed through the CAV alone is observable") {
    Rng rng(33);
    const AnalysisReport r = pbh_report(plant_with(RoadType::Ring, physical_betas(rng, 4), {1}));
    CHECK(r.unobservable_total == 0);
    CHECK(r.detectable);
    bool saw_origin = false;
    for (const ModeVerdict& m : r.modes) {
        CHECK(m.observable);
        saw_origin = saw_origin || std::abs(m.lambda) < 1e-8;
    }
    CHECK(saw_origin);
}

TEST_CASE("mode counts on random platoons of 3 to 12 vehicles") {
    Rng rng(34);
    for (int k = 0; k < 100; ++k) {
        const std::size_t n = 3 + static_cast<std::size_t>(rng.uniform(0.0, 10.0));
        const std::vector<Betas> betas = physical_betas(rng, n - 1);
        const AnalysisReport ring = pbh_report(plant_with(RoadType::Ring, betas, {1}));
        CHECK(ring.uncontrollable_total == 1);
        CHECK(ring.uncontrollable_at_origin == 1);
        CHECK(ring.detectable);
        const AnalysisReport open = pbh_report(plant_with(RoadType::Open, betas, {1}));
        CHECK(open.uncontrollable_total == 0);
        CHECK(open.detectable);
    }
}

// Far-upstream modes of long platoons with widely spread drivers can sit below
// the rank tolerance, so only the origin and the unstable half-plane are
// checked here.
TEST_CASE("wide parameter draws keep the origin verdicts") {
    Rng rng(38);
    for (int k = 0; k < 100; ++k) {
        const std::size_t n = 3 + static_cast<std::size_t>(rng.uniform(0.0, 10.0));
        const std::vector<Betas> betas = physical_betas(rng, n - 1, true);
        const AnalysisReport ring = pbh_report(plant_with(RoadType::Ring, betas, {1}));
        CHECK(ring.uncontrollable_at_origin == 1);
        CHECK(ring.stabilizable);
        CHECK(ring.detectable);
        const AnalysisReport open = pbh_report(plant_with(RoadType::Open, betas, {1}));
        CHECK(open.uncontrollable_at_origin == 0);
        CHECK(open.strictly_stabilizable);
    }
}

TEST_CASE("PBH verdicts do not depend on a positive scaling of B") {
    Rng rng(35);
    for (int k = 0; k < 10; ++k) {
        const LinearizedPlatoon p = plant_with(RoadType::Ring, physical_betas(rng, 5), {1, 3});
        const AnalysisReport base = pbh_report(p.ss.A, p.ss.B, p.ss.C);
        for (const double c : {0.01, 0.5, 7.0, 100.0}) {
            const AnalysisReport scaled = pbh_report(p.ss.A, c * p.ss.B, p.ss.C);
            REQUIRE(scaled.modes.size() == base.modes.size());
            for (std::size_t i = 0; i < base.modes.size(); ++i)
                CHECK(scaled.modes[i].controllable == base.modes[i].controllable);
        }
    }
}

TEST_CASE("H-infinity norm of first-order lags") {
    CHECK(hinf_norm(scalar(-1.0), scalar(1.0), scalar(1.0)) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(hinf_norm(scalar(-2.0), scalar(3.0), scalar(1.0)) == doctest::Approx(1.5).epsilon(1e-6));
    try {
        (void)hinf_norm(scalar(0.0), scalar(1.0), scalar(1.0));
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NotHurwitz);
    }
}

TEST_CASE("H-infinity norm of a lightly damped oscillator") {
    // 1 / (s^2 + 2 z s + 1) peaks at 1 / (2 z sqrt(1 - z^2)).
    const double z = 0.05;
    Matrix a(2, 2);
    a << 0, 1, -1, -2 * z;
    Matrix b(2, 1);
    b << 0, 1;
    Matrix c(1, 2);
    c << 1, 0;
    CHECK(hinf_norm(a, b, c) == doctest::Approx(1.0 / (2 * z * std::sqrt(1 - z * z))).epsilon(1e-6));
}

TEST_CASE("H-infinity norm against a dense frequency sweep") {
    Rng rng(36);
    for (int k = 0; k < 10; ++k) {
        const Matrix a = random_stable(rng, 6);
        const Matrix b = random_matrix(rng, 6, 2);
        const Matrix c = random_matrix(rng, 3, 6);
        const double norm = hinf_norm(a, b, c);
        const double sweep = sweep_max(a, b, c);
        CHECK(sweep <= norm * (1 + 1e-6));
        CHECK(std::abs(norm - sweep) <= 1e-3 * norm);
    }
}

TEST_CASE("bounded real lemma on a first-order lag") {
    const BrlResult above = brl_check(scalar(-1.0), scalar(1.0), scalar(1.0), 1.1);
    CHECK(above.feasible);
    CHECK(above.margin > 0.0);
    CHECK(max_sym_eigenvalue(brl_block(scalar(-1.0), scalar(1.0), scalar(1.0), above.P, 1.1)) < 0.0);
    const BrlResult below = brl_check(scalar(-1.0), scalar(1.0), scalar(1.0), 0.9);
    CHECK_FALSE(below.feasible);
}

TEST_CASE("a BRL certificate bounds the H-infinity norm") {
    Rng rng(37);
    for (int k = 0; k < 6; ++k) {
        const Matrix a = random_stable(rng, 4);
        const Matrix b = random_matrix(rng, 4, 1);
        const Matrix c = random_matrix(rng, 2, 4);
        const double norm = hinf_norm(a, b, c);
        for (const double factor : {0.9, 1.05, 1.5}) {
            const double g = factor * norm;
            const BrlResult r = brl_check(a, b, c, g);
            if (r.feasible) {
                CHECK(norm <= g * (1 + 1e-6));
                CHECK(min_sym_eigenvalue(r.P) > 0.0);
            }
            if (factor > 1.0) CHECK(r.feasible);
            if (factor < 1.0) CHECK_FALSE(r.feasible);
        }
    }
}
