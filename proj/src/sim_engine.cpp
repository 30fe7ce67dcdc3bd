#include "platoon/sim_engine.hpp"

#include "platoon/error.hpp"
#include "platoon/rng.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace platoon {

std::string to_string(EventKind kind) {
    switch (kind) {
        case EventKind::SafetyBrake: return "safety_brake";
        case EventKind::SaturationLow: return "saturation_low";
        case EventKind::SaturationHigh: return "saturation_high";
        case EventKind::Collision: return "collision";
    }
    return "unknown";
}

void Scenario::validate() const {
    auto bad = [](const std::string& m) { fail(ErrorKind::ConfigError, "scenario: " + m); };
    if (spec.n < 2) bad("need at least two vehicles");
    if (params.size() != spec.n) bad("expected one parameter set per vehicle");
    for (const auto& p : params) {
        try {
            p.validate();
        } catch (const Error& e) {
            bad(e.what());
        }
    }
    if (eq.s_star.size() != spec.n) bad("equilibrium does not match the vehicle count");
    if (!(eq.v_star > 0.0)) bad("equilibrium speed must be positive");
    if (spec.road == RoadType::Ring && !(spec.ring_length > 0.0)) bad("ring length must be positive");
    if (!(dt > 0.0) || !std::isfinite(dt)) bad("dt must be positive");
    if (!(horizon >= dt) || !std::isfinite(horizon)) bad("horizon must be at least one step");
    if (!(a_min < 0.0 && a_max > 0.0)) bad("need a_min < 0 < a_max");
    if (init.velocity_spread < 0.0) bad("velocity spread must be non-negative");
    for (const auto& d : disturbances) {
        if (d.vehicle < 1 || d.vehicle > spec.n) bad("disturbance names an unknown vehicle");
        if (d.start < 0.0 || d.duration < 0.0 || d.start + d.duration > horizon + 1e-12)
            bad("disturbance window must lie within the horizon");
    }
}

namespace {

struct Layout_ {
    std::size_t n;
    bool ring;
    bool open_leader;  // open road: leader position is an extra state
    Eigen::Index nk;   // controller order

    Eigen::Index p(std::size_t i) const { return static_cast<Eigen::Index>(i); }  // 0-based vehicle
    Eigen::Index v(std::size_t i) const { return static_cast<Eigen::Index>(n + i); }
    Eigen::Index leader() const { return static_cast<Eigen::Index>(2 * n); }
    Eigen::Index xk() const { return static_cast<Eigen::Index>(2 * n + (open_leader ? 1 : 0)); }
    Eigen::Index size() const { return xk() + nk; }
};

struct Flags {
    std::vector<char> brake, sat_low, sat_high;
};

class Dynamics {
public:
    Dynamics(const Scenario& sc, const std::optional<Controller>& k)
        : sc_(sc), k_(k), lay_{sc.spec.n, sc.spec.road == RoadType::Ring, sc.spec.road == RoadType::Open,
                               k ? k->order() : 0} {
        y_.resize(static_cast<Eigen::Index>(2 * sc.spec.observed.size()));
    }

    const Layout_& layout() const { return lay_; }

    double spacing(const Vector& z, std::size_t i) const {
        if (i == 0) {
            if (lay_.ring) return z(lay_.p(lay_.n - 1)) - z(lay_.p(0)) + sc_.spec.ring_length;
            return z(lay_.leader()) - z(lay_.p(0));
        }
        return z(lay_.p(i - 1)) - z(lay_.p(i));
    }

    // Controller output at state z (zero without controller).
    Vector control(const Vector& z) {
        const Eigen::Index q = sc_.spec.road == RoadType::Ring ? 1 : 2;
        if (!k_) return Vector::Zero(q);
        return k_->C_k * z.segment(lay_.xk(), lay_.nk);
    }

    // Fills dz; `flags` (optional) records the braking and saturation state.
    void eval(double t, const Vector& z, Vector& dz, Flags* flags) {
        const std::size_t n = lay_.n;
        dz.setZero(lay_.size());
        const Vector u = control(z);
        const double v_star = sc_.eq.v_star;
        const double lead_speed = lay_.open_leader ? v_star + (k_ ? u(0) : 0.0) : 0.0;

        for (std::size_t i = 0; i < n; ++i) {
            const double vi = z(lay_.v(i));
            const double si = spacing(z, i);
            double v_pred;
            if (i == 0)
                v_pred = lay_.ring ? z(lay_.v(n - 1)) : lead_speed;
            else
                v_pred = z(lay_.v(i - 1));

            double a;
            if (i == 0 && k_)
                a = lay_.ring ? u(0) : u(1);
            else
                a = acceleration(sc_.params[i], vi, si, v_pred - vi);
            for (const auto& d : sc_.disturbances)
                if (d.vehicle == i + 1 && t >= d.start && t < d.start + d.duration) a += d.accel;

            bool brake = false;
            if (si > 0.0 && (vi * vi - v_pred * v_pred) / (2.0 * si) >= std::abs(sc_.a_min)) {
                a = sc_.a_min;
                brake = true;
            }
            bool low = false, high = false;
            if (a < sc_.a_min) {
                a = sc_.a_min;
                low = true;
            } else if (a > sc_.a_max) {
                a = sc_.a_max;
                high = true;
            }
            if (vi <= 0.0 && a < 0.0) a = 0.0;
            if (flags) {
                flags->brake[i] = brake;
                flags->sat_low[i] = low;
                flags->sat_high[i] = high;
            }
            dz(lay_.p(i)) = vi;
            dz(lay_.v(i)) = a;
        }
        if (lay_.open_leader) dz(lay_.leader()) = lead_speed;
        if (k_) {
            std::size_t r = 0;
            for (const std::size_t j : sc_.spec.observed) {
                y_(static_cast<Eigen::Index>(r++)) = spacing(z, j - 1) - sc_.eq.s_star[j - 1];
                y_(static_cast<Eigen::Index>(r++)) = z(lay_.v(j - 1)) - v_star;
            }
            dz.segment(lay_.xk(), lay_.nk) = k_->A_k * z.segment(lay_.xk(), lay_.nk) + k_->B_k * y_;
        }
    }

private:
    const Scenario& sc_;
    const std::optional<Controller>& k_;
    Layout_ lay_;
    Vector y_;
};

void check_controller(const Scenario& sc, const Controller& k) {
    const std::size_t n = sc.spec.n;
    const Eigen::Index order = k.A_k.rows();
    const Eigen::Index q = sc.spec.road == RoadType::Ring ? 1 : 2;
    const Eigen::Index m = static_cast<Eigen::Index>(2 * sc.spec.observed.size());
    const bool order_ok = order == static_cast<Eigen::Index>(2 * n) ||
                          (sc.spec.road == RoadType::Ring && order == static_cast<Eigen::Index>(2 * n - 1));
    if (k.A_k.cols() != order || !order_ok || k.B_k.rows() != order || k.B_k.cols() != m ||
        k.C_k.rows() != q || k.C_k.cols() != order) {
        std::ostringstream os;
        os << "controller dimensions (A_k " << k.A_k.rows() << "x" << k.A_k.cols() << ", B_k " << k.B_k.rows() << "x"
           << k.B_k.cols() << ", C_k " << k.C_k.rows() << "x" << k.C_k.cols() << ") do not fit a " << n
           << "-vehicle " << to_string(sc.spec.road) << " plant observing " << sc.spec.observed.size()
           << " vehicles";
        fail(ErrorKind::ConfigError, os.str());
    }
}

}  // namespace

Trajectory simulate(const Scenario& sc, const std::optional<Controller>& controller) {
    sc.validate();
    if (controller) check_controller(sc, *controller);
    if (sc.spec.observed.empty() && controller) fail(ErrorKind::ConfigError, "controller without observations");

    Dynamics dyn(sc, controller);
    const Layout_& lay = dyn.layout();
    const std::size_t n = sc.spec.n;
    const bool ring = lay.ring;

    // Initial state.
    Vector z = Vector::Zero(lay.size());
    std::vector<double> gaps(n);
    for (std::size_t i = 0; i < n; ++i) gaps[i] = sc.eq.s_star[i];
    if (sc.init.layout == Layout::Uniform && ring)
        std::fill(gaps.begin(), gaps.end(), sc.spec.ring_length / static_cast<double>(n));
    z(lay.p(0)) = 0.0;
    for (std::size_t i = 1; i < n; ++i) z(lay.p(i)) = z(lay.p(i - 1)) - gaps[i];
    if (lay.open_leader) z(lay.leader()) = gaps[0];
    if (ring) {
        // s_1 follows from closure; it equals gaps[0] when the layout sums to D.
        double sum = 0.0;
        for (std::size_t i = 1; i < n; ++i) sum += gaps[i];
        if (!(sc.spec.ring_length - sum > 0.0)) fail(ErrorKind::ConfigError, "initial layout does not fit the ring");
    }
    Rng rng(sc.seed);
    const double vc = sc.init.velocity_center < 0.0 ? sc.eq.v_star : sc.init.velocity_center;
    for (std::size_t i = 0; i < n; ++i) {
        double v = vc;
        if (sc.init.velocity_spread > 0.0) v += rng.uniform(-sc.init.velocity_spread, sc.init.velocity_spread);
        z(lay.v(i)) = std::max(v, 0.0);
    }

    const auto steps = static_cast<std::size_t>(std::floor(sc.horizon / sc.dt + 1e-9)) + 1;
    Trajectory tr;
    tr.controlled = controller.has_value();
    tr.ring_length = ring ? sc.spec.ring_length : 0.0;
    const Eigen::Index q = ring ? 1 : 2;
    tr.t.reserve(steps);
    tr.p.resize(static_cast<Eigen::Index>(steps), static_cast<Eigen::Index>(n));
    tr.v.resize(static_cast<Eigen::Index>(steps), static_cast<Eigen::Index>(n));
    tr.s.resize(static_cast<Eigen::Index>(steps), static_cast<Eigen::Index>(n));
    tr.u.resize(static_cast<Eigen::Index>(steps), q);

    Flags flags{std::vector<char>(n, 0), std::vector<char>(n, 0), std::vector<char>(n, 0)};
    Flags prev = flags;
    Vector k1, k2, k3, k4, tmp;
    const double h = sc.dt;

    std::size_t k = 0;
    for (; k < steps; ++k) {
        const double t = static_cast<double>(k) * h;
        const auto row = static_cast<Eigen::Index>(k);
        tr.t.push_back(t);
        bool collided = false;
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<Eigen::Index>(i);
            tr.p(row, c) = z(lay.p(i));
            tr.v(row, c) = z(lay.v(i));
            tr.s(row, c) = dyn.spacing(z, i);
            if (tr.s(row, c) <= 0.0) {
                tr.events.push_back({t, i + 1, EventKind::Collision});
                collided = true;
            }
        }
        tr.u.row(row) = dyn.control(z).transpose();
        if (collided) {
            tr.collided = true;
            ++k;
            break;
        }
        if (k + 1 == steps) {
            ++k;
            break;
        }

        dyn.eval(t, z, k1, &flags);
        for (std::size_t i = 0; i < n; ++i) {
            if (flags.brake[i] && !prev.brake[i]) tr.events.push_back({t, i + 1, EventKind::SafetyBrake});
            if (flags.sat_low[i] && !prev.sat_low[i]) tr.events.push_back({t, i + 1, EventKind::SaturationLow});
            if (flags.sat_high[i] && !prev.sat_high[i]) tr.events.push_back({t, i + 1, EventKind::SaturationHigh});
        }
        prev = flags;
        tmp = z + 0.5 * h * k1;
        dyn.eval(t + 0.5 * h, tmp, k2, nullptr);
        tmp = z + 0.5 * h * k2;
        dyn.eval(t + 0.5 * h, tmp, k3, nullptr);
        tmp = z + h * k3;
        dyn.eval(t + h, tmp, k4, nullptr);
        z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        for (std::size_t i = 0; i < n; ++i) z(lay.v(i)) = std::max(z(lay.v(i)), 0.0);
    }
    const auto rows = static_cast<Eigen::Index>(k);
    tr.p.conservativeResize(rows, Eigen::NoChange);
    tr.v.conservativeResize(rows, Eigen::NoChange);
    tr.s.conservativeResize(rows, Eigen::NoChange);
    tr.u.conservativeResize(rows, Eigen::NoChange);
    return tr;
}

Metrics compute_metrics(const Trajectory& tr, const Equilibrium& eq, const PerformanceWeights& w, double after,
                        double settle_band) {
    Metrics m;
    const std::size_t steps = tr.steps();
    const std::size_t n = tr.vehicles();
    if (steps == 0) return m;
    const double dt = steps > 1 ? tr.t[1] - tr.t[0] : 0.0;
    const double ws = w.gamma_s * w.gamma_s;
    const double wv = w.gamma_v * w.gamma_v;
    Vector q(tr.u.cols());
    if (q.size() == 1)
        q(0) = w.gamma_u * w.gamma_u;
    else if (q.size() == 2)
        q << w.gamma_u1 * w.gamma_u1, w.gamma_u2 * w.gamma_u2;

    m.min_spacing = std::numeric_limits<double>::infinity();
    double last_bad = -1.0;
    bool any_bad = false;
    for (std::size_t k = 0; k < steps; ++k) {
        const auto r = static_cast<Eigen::Index>(k);
        double xs = 0.0;
        bool bad = false;
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<Eigen::Index>(i);
            const double ds = tr.s(r, c) - eq.s_star[i];
            const double dv = tr.v(r, c) - eq.v_star;
            xs += ws * ds * ds + wv * dv * dv;
            if (std::abs(dv) >= settle_band) bad = true;
            m.min_spacing = std::min(m.min_spacing, tr.s(r, c));
        }
        double us = 0.0;
        for (Eigen::Index j = 0; j < q.size(); ++j) us += q(j) * tr.u(r, j) * tr.u(r, j);
        if (k + 1 < steps) {
            m.state_cost += dt * xs;
            m.input_cost += dt * us;
        }
        m.max_spacing_error_cav = std::max(m.max_spacing_error_cav, std::abs(tr.s(r, 0) - eq.s_star[0]));
        if (bad) {
            any_bad = true;
            last_bad = tr.t[k];
        }
    }
    m.quadratic_cost = m.state_cost + m.input_cost;

    // First sample after `after` from which every later sample is in the band.
    const double t_end = tr.t.back();
    if (!any_bad) {
        m.settled = true;
        m.settle_time = after;
    } else if (last_bad < t_end && !tr.collided) {
        m.settled = true;
        m.settle_time = std::max(after, last_bad + dt);
    } else {
        m.settled = false;
        m.settle_time = t_end;
    }
    return m;
}

double oscillation_amplitude(const Trajectory& tr, double t0, double t1) {
    double amp = 0.0;
    for (Eigen::Index i = 0; i < tr.v.cols(); ++i) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t k = 0; k < tr.steps(); ++k) {
            if (tr.t[k] < t0 - 1e-12 || tr.t[k] > t1 + 1e-12) continue;
            lo = std::min(lo, tr.v(static_cast<Eigen::Index>(k), i));
            hi = std::max(hi, tr.v(static_cast<Eigen::Index>(k), i));
        }
        if (hi >= lo) amp = std::max(amp, 0.5 * (hi - lo));
    }
    return amp;
}

double max_velocity_deviation(const Trajectory& tr, double v_ref, double t0) {
    double dev = 0.0;
    for (std::size_t k = 0; k < tr.steps(); ++k) {
        if (tr.t[k] < t0 - 1e-12) continue;
        dev = std::max(dev, (tr.v.row(static_cast<Eigen::Index>(k)).array() - v_ref).abs().maxCoeff());
    }
    return dev;
}

double ring_closure_error(const Trajectory& tr) {
    if (tr.ring_length <= 0.0) fail(ErrorKind::NotRing, "closure error is defined on ring roads only");
    double err = 0.0;
    for (Eigen::Index k = 0; k < tr.s.rows(); ++k) err = std::max(err, std::abs(tr.s.row(k).sum() - tr.ring_length));
    return err;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& tr, std::size_t stride) {
    if (stride == 0) stride = 1;
    const std::size_t n = tr.vehicles();
    // Events are attached to the first written row at or after their time.
    std::size_t next_event = 0;
    out << "t,veh,p,v,s,u,event\n";
    out << std::setprecision(10);
    std::vector<std::size_t> rows;
    for (std::size_t k = 0; k < tr.steps(); k += stride) rows.push_back(k);
    // Keep the final sample even when the stride skips it.
    if (!rows.empty() && rows.back() + 1 != tr.steps()) rows.push_back(tr.steps() - 1);
    for (const std::size_t k : rows) {
        const auto r = static_cast<Eigen::Index>(k);
        std::vector<std::string> tags(n);
        while (next_event < tr.events.size() && tr.events[next_event].t <= tr.t[k] + 1e-12) {
            const Event& e = tr.events[next_event++];
            std::string& tag = tags[e.vehicle - 1];
            if (!tag.empty()) tag += ';';
            tag += to_string(e.kind);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<Eigen::Index>(i);
            const double u = (i == 0 && tr.controlled) ? tr.u(r, tr.u.cols() - 1) : 0.0;
            out << tr.t[k] << ',' << (i + 1) << ',' << tr.p(r, c) << ',' << tr.v(r, c) << ',' << tr.s(r, c) << ','
                << u << ',' << tags[i] << '\n';
        }
    }
}

}  // namespace platoon
