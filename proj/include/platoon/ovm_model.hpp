#pragma once

// Optimal-velocity car-following model: desired-speed map, acceleration law,
// equilibria and linearization coefficients.

#include <cstddef>
#include <span>
#include <vector>

namespace platoon {

// OVM parameters of one vehicle. Units: alpha, theta [1/s]; s_st, s_go [m];
// v_max [m/s].
struct VehicleParams {
    double alpha = 0.6;
    double theta = 0.9;
    double s_st = 5.0;
    double s_go = 35.0;
    double v_max = 30.0;

    // Throws InvalidArgument unless alpha > 0, theta >= 0, v_max > 0 and
    // 0 < s_st < s_go.
    void validate() const;
};

// Linearization coefficients: beta1 = dH/ds, beta2 = dH/ds_dot - dH/dv,
// beta3 = dH/ds_dot, all evaluated at equilibrium.
struct Betas {
    double beta1 = 0.0;
    double beta2 = 0.0;
    double beta3 = 0.0;

    [[nodiscard]] bool valid() const { return beta1 > 0.0 && beta2 > 0.0 && beta3 > 0.0; }
};

struct Equilibrium {
    double v_star = 0.0;
    std::vector<double> s_star;  // one entry per vehicle, vehicle 1 first
};

// How the ring closure sum(s*) = D is met.
//  FixedSpeed: HDV spacings follow from v*, the CAV slot takes the residual.
//  Closed: v* is solved so that every vehicle sits on its own OVM equilibrium.
enum class ClosureMode { FixedSpeed, Closed };

[[nodiscard]] double desired_speed(const VehicleParams& p, double s);

// dV/ds, analytic. Zero on the flat branches.
[[nodiscard]] double desired_speed_slope(const VehicleParams& p, double s);

// H = alpha (V(s) - v) + theta s_dot.
[[nodiscard]] double acceleration(const VehicleParams& p, double v, double s, double s_dot);

// Spacing s* with V(s*) = v_star, by bisection on (s_st, s_go).
// Throws NoEquilibrium unless 0 < v_star < v_max.
[[nodiscard]] double equilibrium_spacing(const VehicleParams& p, double v_star);

// Closed-ring equilibrium: bisection on v* so that sum_i s_i*(v*) = D over all
// vehicles in `all_params`. Throws NoEquilibrium when D lies outside the
// reachable range of spacing sums.
[[nodiscard]] Equilibrium equilibrium_velocity_for_ring(std::span<const VehicleParams> all_params,
                                                        double ring_length);

// Fixed-speed ring equilibrium. `all_params[0]` is the CAV slot and is not
// used; its spacing is D minus the HDV spacings. Throws NoEquilibrium if that
// residual is not positive.
[[nodiscard]] Equilibrium equilibrium_fixed_speed(std::span<const VehicleParams> all_params,
                                                  double ring_length, double v_star);

// Open road: HDV spacings from v*, the CAV spacing taken from its own
// parameters (it only sets the reference gap to the virtual leader).
[[nodiscard]] Equilibrium equilibrium_open_road(std::span<const VehicleParams> all_params,
                                                double v_star);

[[nodiscard]] Equilibrium ring_equilibrium(std::span<const VehicleParams> all_params,
                                           double ring_length, ClosureMode mode, double v_star);

// Betas at spacing s_star. Throws DegenerateLinearization when any beta is
// not strictly positive (flat branch of V, or theta = 0).
[[nodiscard]] Betas linearize(const VehicleParams& p, double s_star);

// `vehicle` is the 1-based vehicle id.
[[nodiscard]] Betas linearize(const VehicleParams& p, const Equilibrium& eq, std::size_t vehicle);

}  // namespace platoon
