#include "platoon/ovm_model.hpp"

#include "platoon/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace platoon {

namespace {

constexpr double kBisectionRelTol = 1e-10;
constexpr int kMaxBisection = 400;

std::string describe(const VehicleParams& p) {
    std::ostringstream os;
    os << "(alpha=" << p.alpha << ", theta=" << p.theta << ", s_st=" << p.s_st
       << ", s_go=" << p.s_go << ", v_max=" << p.v_max << ")";
    return os.str();
}

}  // namespace

void VehicleParams::validate() const {
    if (!(alpha > 0.0) || !(theta >= 0.0) || !(v_max > 0.0) || !(s_st > 0.0) || !(s_st < s_go)) {
        fail(ErrorKind::InvalidArgument, "invalid vehicle parameters " + describe(*this));
    }
}

double desired_speed(const VehicleParams& p, double s) {
    if (s <= p.s_st) return 0.0;
    if (s >= p.s_go) return p.v_max;
    const double phase = std::numbers::pi * (s - p.s_st) / (p.s_go - p.s_st);
    return 0.5 * p.v_max * (1.0 - std::cos(phase));
}

double desired_speed_slope(const VehicleParams& p, double s) {
    if (s <= p.s_st || s >= p.s_go) return 0.0;
    const double width = p.s_go - p.s_st;
    const double phase = std::numbers::pi * (s - p.s_st) / width;
    return 0.5 * p.v_max * std::sin(phase) * std::numbers::pi / width;
}

double acceleration(const VehicleParams& p, double v, double s, double s_dot) {
    return p.alpha * (desired_speed(p, s) - v) + p.theta * s_dot;
}

double equilibrium_spacing(const VehicleParams& p, double v_star) {
    p.validate();
    if (!(v_star > 0.0) || !(v_star < p.v_max)) {
        std::ostringstream os;
        os << "no equilibrium spacing for v*=" << v_star << " with " << describe(p)
           << "; need 0 < v* < v_max";
        fail(ErrorKind::NoEquilibrium, os.str());
    }
    double lo = p.s_st;
    double hi = p.s_go;
    // Run to interval collapse: the residual then sits far below the
    // kBisectionRelTol * v_max bound, which keeps HDV accelerations at the
    // equilibrium below 1e-9 even for large alpha.
    double mid = 0.5 * (lo + hi);
    for (int it = 0; it < kMaxBisection; ++it) {
        mid = 0.5 * (lo + hi);
        const double r = desired_speed(p, mid) - v_star;
        if (r == 0.0) break;
        if (r < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo <= std::numeric_limits<double>::epsilon() * hi) break;
    }
    return mid;
}

Equilibrium equilibrium_velocity_for_ring(std::span<const VehicleParams> all_params,
                                          double ring_length) {
    if (all_params.empty()) fail(ErrorKind::InvalidArgument, "ring equilibrium needs vehicles");
    double v_cap = std::numeric_limits<double>::infinity();
    double sum_st = 0.0;
    for (const auto& p : all_params) {
        p.validate();
        v_cap = std::min(v_cap, p.v_max);
        sum_st += p.s_st;
    }
    // Largest closable length: every vehicle at the spacing where V reaches the
    // smallest v_max in the platoon.
    double sum_top = 0.0;
    for (const auto& p : all_params) {
        sum_top += (p.v_max <= v_cap) ? p.s_go : equilibrium_spacing(p, v_cap);
    }
    if (!(ring_length > sum_st) || !(ring_length < sum_top)) {
        std::ostringstream os;
        os << "ring length " << ring_length << " m outside closable range (" << sum_st << ", "
           << sum_top << ")";
        fail(ErrorKind::NoEquilibrium, os.str());
    }

    auto spacing_sum = [&](double v) {
        double total = 0.0;
        for (const auto& p : all_params) total += equilibrium_spacing(p, v);
        return total;
    };

    double lo = 0.0;
    double hi = v_cap;
    double v = 0.5 * (lo + hi);
    const double tol = kBisectionRelTol * ring_length;
    for (int it = 0; it < kMaxBisection; ++it) {
        v = 0.5 * (lo + hi);
        const double r = spacing_sum(v) - ring_length;
        if (std::abs(r) < tol) break;
        if (r < 0.0) {
            lo = v;
        } else {
            hi = v;
        }
        if (hi - lo <= std::numeric_limits<double>::epsilon() * hi) break;
    }
    Equilibrium eq;
    eq.v_star = v;
    eq.s_star.reserve(all_params.size());
    for (const auto& p : all_params) eq.s_star.push_back(equilibrium_spacing(p, v));
    return eq;
}

Equilibrium equilibrium_fixed_speed(std::span<const VehicleParams> all_params, double ring_length,
                                    double v_star) {
    if (all_params.size() < 2) fail(ErrorKind::InvalidArgument, "platoon needs at least 2 vehicles");
    Equilibrium eq;
    eq.v_star = v_star;
    eq.s_star.assign(all_params.size(), 0.0);
    double hdv_total = 0.0;
    for (std::size_t i = 1; i < all_params.size(); ++i) {
        eq.s_star[i] = equilibrium_spacing(all_params[i], v_star);
        hdv_total += eq.s_star[i];
    }
    eq.s_star[0] = ring_length - hdv_total;
    if (!(eq.s_star[0] > 0.0)) {
        std::ostringstream os;
        os << "fixed-speed closure leaves CAV spacing " << eq.s_star[0] << " m at v*=" << v_star
           << " on a " << ring_length << " m ring";
        fail(ErrorKind::NoEquilibrium, os.str());
    }
    return eq;
}

Equilibrium equilibrium_open_road(std::span<const VehicleParams> all_params, double v_star) {
    if (all_params.size() < 2) fail(ErrorKind::InvalidArgument, "platoon needs at least 2 vehicles");
    Equilibrium eq;
    eq.v_star = v_star;
    eq.s_star.reserve(all_params.size());
    for (const auto& p : all_params) eq.s_star.push_back(equilibrium_spacing(p, v_star));
    return eq;
}

Equilibrium ring_equilibrium(std::span<const VehicleParams> all_params, double ring_length,
                             ClosureMode mode, double v_star) {
    switch (mode) {
        case ClosureMode::FixedSpeed: return equilibrium_fixed_speed(all_params, ring_length, v_star);
        case ClosureMode::Closed: return equilibrium_velocity_for_ring(all_params, ring_length);
    }
    fail(ErrorKind::InvalidArgument, "unknown closure mode");
}

Betas linearize(const VehicleParams& p, double s_star) {
    p.validate();
    Betas b;
    b.beta1 = p.alpha * desired_speed_slope(p, s_star);
    b.beta2 = p.alpha + p.theta;
    b.beta3 = p.theta;
    if (!b.valid()) {
        std::ostringstream os;
        os << "linearization at s*=" << s_star << " of " << describe(p) << " gives beta=("
           << b.beta1 << ", " << b.beta2 << ", " << b.beta3 << "); all must be positive";
        fail(ErrorKind::DegenerateLinearization, os.str());
    }
    return b;
}

Betas linearize(const VehicleParams& p, const Equilibrium& eq, std::size_t vehicle) {
    if (vehicle == 0 || vehicle > eq.s_star.size()) {
        fail(ErrorKind::InvalidArgument, "vehicle id out of range");
    }
    return linearize(p, eq.s_star[vehicle - 1]);
}

}  // namespace platoon
