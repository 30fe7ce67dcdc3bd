#pragma once

// Nonlinear closed-loop simulation of the mixed platoon with fixed-step RK4.

#include "platoon/hinf_synth.hpp"
#include "platoon/ovm_model.hpp"
#include "platoon/platoon_ss.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace platoon {

// Acceleration pulse added to one vehicle over [start, start + duration).
struct Disturbance {
    std::size_t vehicle = 0;  // 1-based
    double start = 0.0;       // s
    double duration = 0.0;    // s
    double accel = 0.0;       // m/s^2
};

enum class Layout {
    Equilibrium,  // spacings s_i* of the reference equilibrium
    Uniform,      // D / n on a ring; s_i* on an open road
};

struct InitialCondition {
    Layout layout = Layout::Equilibrium;
    // v_i(0) = velocity_center + U[-velocity_spread, velocity_spread]; a
    // negative center means "use v*".
    double velocity_center = -1.0;
    double velocity_spread = 0.0;
};

struct Scenario {
    PlatoonSpec spec;                    // n, road, ring_length, observed
    std::vector<VehicleParams> params;   // n entries; params[0] drives vehicle 1 when no controller is given
    Equilibrium eq;                      // reference point for the controller and the metrics
    InitialCondition init{};
    std::vector<Disturbance> disturbances;
    double horizon = 100.0;  // s
    double dt = 0.01;        // s
    std::uint64_t seed = 1;
    double a_min = -5.0;  // m/s^2
    double a_max = 2.0;   // m/s^2

    // Throws ConfigError on an inconsistent scenario.
    void validate() const;
};

enum class EventKind { SafetyBrake, SaturationLow, SaturationHigh, Collision };
[[nodiscard]] std::string to_string(EventKind kind);

// Events are logged when a condition switches on.
struct Event {
    double t = 0.0;
    std::size_t vehicle = 0;
    EventKind kind = EventKind::SafetyBrake;
};

// Row k of p, v, s, u belongs to time t[k].
struct Trajectory {
    std::vector<double> t;
    Matrix p;  // steps x n, m
    Matrix v;  // steps x n, m/s
    Matrix s;  // steps x n, m
    Matrix u;  // steps x inputs, controller output (zero without controller)
    std::vector<Event> events;
    bool collided = false;
    bool controlled = false;
    double ring_length = 0.0;  // 0 on the open road

    [[nodiscard]] std::size_t steps() const { return t.size(); }
    [[nodiscard]] std::size_t vehicles() const { return static_cast<std::size_t>(v.cols()); }
};

// With `controller` vehicle 1 is the CAV: on a ring its acceleration is u; on
// an open road u = (u1, u2) sets the virtual leader speed v* + u1 and the CAV
// acceleration u2. Without a controller vehicle 1 follows the OVM too.
[[nodiscard]] Trajectory simulate(const Scenario& scenario, const std::optional<Controller>& controller);

struct Metrics {
    double max_spacing_error_cav = 0.0;  // m
    double quadratic_cost = 0.0;
    double state_cost = 0.0;
    double input_cost = 0.0;
    double settle_time = 0.0;  // s; end of horizon when not settled
    bool settled = false;
    double min_spacing = 0.0;  // m
};

// quadratic_cost = sum_k dt (xbar' T xbar + u' Q u), T = diag(gamma_s^2,
// gamma_v^2, ...), Q = diag(gamma_u^2) (ring) or diag(gamma_u1^2, gamma_u2^2).
// Settling means all |v_i - v*| < settle_band from some time after the last
// disturbance until the end.
[[nodiscard]] Metrics compute_metrics(const Trajectory& traj, const Equilibrium& eq, const PerformanceWeights& w,
                                      double after = 0.0, double settle_band = 0.1);

// max_i (max_t v_i - min_t v_i) / 2 over t in [t0, t1].
[[nodiscard]] double oscillation_amplitude(const Trajectory& traj, double t0, double t1);
// max_{i, t >= t0} |v_i(t) - v_ref|.
[[nodiscard]] double max_velocity_deviation(const Trajectory& traj, double v_ref, double t0);
// max_t |sum_i s_i(t) - D| (ring only).
[[nodiscard]] double ring_closure_error(const Trajectory& traj);

// CSV with header t,veh,p,v,s,u,event; one row per vehicle every `stride`
// steps. `u` is the CAV acceleration command on vehicle 1 rows.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj, std::size_t stride = 1);

}  // namespace platoon
