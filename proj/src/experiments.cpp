#include "platoon/experiments.hpp"

#include "platoon/error.hpp"
#include "platoon/rng.hpp"
#include "platoon/svg_plot.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace platoon {

namespace {

[[noreturn]] void config_error(const std::string& m) { fail(ErrorKind::ConfigError, m); }

// Reads one JSON object and rejects any key that was never asked for.
class Fields {
public:
    Fields(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) config_error(where_ + ": expected an object");
    }

    bool has(const char* key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    double number(const char* key, double fallback) {
        if (!has(key)) return fallback;
        return number_at(key);
    }
    double number(const char* key) {
        if (!has(key)) config_error(where_ + ": missing '" + key + "'");
        return number_at(key);
    }
    std::uint64_t integer(const char* key, std::uint64_t fallback) {
        if (!has(key)) return fallback;
        const Json& v = j_[key];
        if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
            config_error(where_ + "." + key + ": expected a non-negative integer");
        return v.get<std::uint64_t>();
    }
    std::string text(const char* key, const std::string& fallback) {
        if (!has(key)) return fallback;
        const Json& v = j_[key];
        if (!v.is_string()) config_error(where_ + "." + key + ": expected a string");
        return v.get<std::string>();
    }
    const Json* object(const char* key) {
        if (!has(key)) return nullptr;
        return &j_[key];
    }
    std::string path(const char* key) const { return where_ + "." + key; }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) config_error(where_ + ": unknown field '" + it.key() + "'");
        }
    }

private:
    double number_at(const char* key) const {
        const Json& v = j_[key];
        if (!v.is_number()) config_error(where_ + "." + key + ": expected a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) config_error(where_ + "." + key + ": not finite");
        return x;
    }

    const Json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

VehicleParams parse_params(const Json& j, const std::string& where, VehicleParams p) {
    Fields f(j, where);
    p.alpha = f.number("alpha_per_s", p.alpha);
    p.theta = f.number("theta_per_s", p.theta);
    p.s_st = f.number("s_st_m", p.s_st);
    p.s_go = f.number("s_go_m", p.s_go);
    p.v_max = f.number("v_max_mps", p.v_max);
    f.finish();
    try {
        p.validate();
    } catch (const Error& e) {
        config_error(where + ": " + e.what());
    }
    return p;
}

Json params_to_json(const VehicleParams& p) {
    return Json{{"alpha_per_s", p.alpha}, {"theta_per_s", p.theta}, {"s_st_m", p.s_st}, {"s_go_m", p.s_go},
                {"v_max_mps", p.v_max}};
}

std::vector<std::size_t> observed_for(const ScenarioConfig& cfg) {
    if (!cfg.observed_ids.empty()) return cfg.observed_ids;
    const std::size_t ahead = cfg.road == RoadType::Ring ? cfg.observe_ahead : 0;
    return neighbourhood_observed(cfg.vehicles, ahead, cfg.observe_behind);
}

std::string format_number(double x) {
    std::ostringstream os;
    os << std::setprecision(10) << x;
    return os.str();
}

int exit_code(ErrorKind kind) { return kind == ErrorKind::ConfigError ? 2 : 1; }

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) config_error("cannot write " + path.string());
    out << text;
}

}  // namespace

ScenarioConfig parse_scenario(const Json& j, const std::filesystem::path& base_dir) {
    ScenarioConfig c;
    Fields f(j, "scenario");
    const std::string schema = f.text("schema", "");
    if (schema != kScenarioSchema)
        config_error("scenario: schema must be \"" + std::string(kScenarioSchema) + "\", got \"" + schema + "\"");
    try {
        c.road = road_from_string(f.text("road", "ring"));
    } catch (const Error& e) {
        config_error(std::string("scenario.road: ") + e.what());
    }
    c.vehicles = f.integer("vehicles", c.vehicles);
    if (c.vehicles < 2) config_error("scenario.vehicles: need at least 2");
    if (c.road == RoadType::Ring) c.ring_length = f.number("ring_length_m", c.ring_length);
    const std::string closure = f.text("closure", "fixed_speed");
    if (closure == "fixed_speed")
        c.closure = ClosureMode::FixedSpeed;
    else if (closure == "closed")
        c.closure = ClosureMode::Closed;
    else
        config_error("scenario.closure: expected \"fixed_speed\" or \"closed\"");
    if (c.closure == ClosureMode::Closed && c.road != RoadType::Ring)
        config_error("scenario.closure: \"closed\" applies to ring roads only");
    c.v_star = f.number("v_star_mps", c.v_star);

    if (const Json* o = f.object("observed")) {
        Fields g(*o, f.path("observed"));
        c.observe_ahead = g.integer("ahead", c.observe_ahead);
        c.observe_behind = g.integer("behind", c.observe_behind);
        if (g.has("ids")) {
            try {
                c.observed_ids = (*o)["ids"].get<std::vector<std::size_t>>();
            } catch (const nlohmann::json::exception&) {
                config_error("scenario.observed.ids: expected an array of vehicle ids");
            }
            std::sort(c.observed_ids.begin(), c.observed_ids.end());
            c.observed_ids.erase(std::unique(c.observed_ids.begin(), c.observed_ids.end()), c.observed_ids.end());
            if (c.observed_ids.empty() || c.observed_ids.front() != 1 || c.observed_ids.back() > c.vehicles)
                config_error("scenario.observed.ids: ids must lie in 1..vehicles and include 1");
        }
        g.finish();
    }
    if (const Json* o = f.object("hdv")) c.hdv = parse_params(*o, f.path("hdv"), c.hdv);
    c.cav = c.hdv;
    if (const Json* o = f.object("cav")) c.cav = parse_params(*o, f.path("cav"), c.cav);
    if (const Json* o = f.object("heterogeneity")) {
        Fields g(*o, f.path("heterogeneity"));
        c.heterogeneity.alpha_spread = g.number("alpha_spread_per_s", 0.0);
        c.heterogeneity.theta_spread = g.number("theta_spread_per_s", 0.0);
        c.heterogeneity.s_go_spread = g.number("s_go_spread_m", 0.0);
        c.heterogeneity.seed = g.integer("seed", c.heterogeneity.seed);
        g.finish();
        if (c.heterogeneity.alpha_spread < 0 || c.heterogeneity.theta_spread < 0 || c.heterogeneity.s_go_spread < 0)
            config_error("scenario.heterogeneity: spreads must be non-negative");
    }
    if (const Json* o = f.object("weights")) {
        Fields g(*o, f.path("weights"));
        c.weights.gamma_s = g.number("gamma_s", c.weights.gamma_s);
        c.weights.gamma_v = g.number("gamma_v", c.weights.gamma_v);
        c.weights.gamma_u = g.number("gamma_u", c.weights.gamma_u);
        c.weights.gamma_u1 = g.number("gamma_u1", c.weights.gamma_u1);
        c.weights.gamma_u2 = g.number("gamma_u2", c.weights.gamma_u2);
        g.finish();
        try {
            c.weights.validate(c.road);
        } catch (const Error& e) {
            config_error(std::string("scenario.weights: ") + e.what());
        }
    }
    if (const Json* o = f.object("initial")) {
        Fields g(*o, f.path("initial"));
        const std::string layout = g.text("layout", "equilibrium");
        if (layout == "equilibrium")
            c.initial.layout = Layout::Equilibrium;
        else if (layout == "uniform")
            c.initial.layout = Layout::Uniform;
        else
            config_error("scenario.initial.layout: expected \"equilibrium\" or \"uniform\"");
        c.initial.velocity_center = g.number("velocity_center_mps", -1.0);
        c.initial.velocity_spread = g.number("velocity_spread_mps", 0.0);
        g.finish();
    }
    if (f.has("disturbances")) {
        const Json& arr = j["disturbances"];
        if (!arr.is_array()) config_error("scenario.disturbances: expected an array");
        for (std::size_t k = 0; k < arr.size(); ++k) {
            Fields g(arr[k], "scenario.disturbances[" + std::to_string(k) + "]");
            Disturbance d;
            d.vehicle = g.integer("vehicle", 0);
            d.start = g.number("start_s");
            d.duration = g.number("duration_s");
            d.accel = g.number("accel_mps2");
            g.finish();
            c.disturbances.push_back(d);
        }
    }
    c.horizon = f.number("horizon_s", c.horizon);
    c.dt = f.number("dt_s", c.dt);
    c.seed = f.integer("seed", c.seed);
    c.a_min = f.number("a_min_mps2", c.a_min);
    c.a_max = f.number("a_max_mps2", c.a_max);
    if (f.has("controller_file")) {
        const std::filesystem::path p = f.text("controller_file", "");
        if (p.empty()) config_error("scenario.controller_file: empty path");
        c.controller_file = p.is_absolute() ? p : base_dir / p;
    }
    if (const Json* o = f.object("synthesis")) {
        Fields g(*o, f.path("synthesis"));
        c.pole_radius = g.number("pole_radius_radps", c.pole_radius);
        if (c.pole_radius < 0.0) config_error("scenario.synthesis.pole_radius_radps: must be >= 0");
        c.robust_samples = static_cast<int>(g.integer("robust_samples", static_cast<std::uint64_t>(c.robust_samples)));
        if (const Json* u = g.object("uncertainty")) {
            Fields h(*u, g.path("uncertainty"));
            c.ranges.d_alpha = h.number("alpha_range_per_s", c.ranges.d_alpha);
            c.ranges.d_theta = h.number("theta_range_per_s", c.ranges.d_theta);
            c.ranges.d_s_go = h.number("s_go_range_m", c.ranges.d_s_go);
            h.finish();
            if (c.ranges.d_alpha < 0 || c.ranges.d_theta < 0 || c.ranges.d_s_go < 0)
                config_error("scenario.synthesis.uncertainty: ranges must be non-negative");
        }
        g.finish();
    }
    c.ranges.nominal = c.hdv;
    if (const Json* o = f.object("sweep")) {
        Fields g(*o, f.path("sweep"));
        c.sweep.accel = g.number("accel_mps2", c.sweep.accel);
        c.sweep.start = g.number("start_s", c.sweep.start);
        c.sweep.duration = g.number("duration_s", c.sweep.duration);
        c.sweep.threads = static_cast<unsigned>(g.integer("threads", c.sweep.threads));
        g.finish();
    }
    if (const Json* o = f.object("output")) {
        Fields g(*o, f.path("output"));
        c.csv_stride = g.integer("csv_stride", c.csv_stride);
        g.finish();
        if (c.csv_stride == 0) config_error("scenario.output.csv_stride: must be positive");
    }
    f.finish();
    return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& file) {
    const Json j = read_json_file(file);
    return parse_scenario(j, file.has_parent_path() ? file.parent_path() : std::filesystem::path("."));
}

Json scenario_to_json(const ScenarioConfig& c) {
    Json j;
    j["schema"] = kScenarioSchema;
    j["road"] = to_string(c.road);
    j["vehicles"] = c.vehicles;
    if (c.road == RoadType::Ring) {
        j["ring_length_m"] = c.ring_length;
        j["closure"] = c.closure == ClosureMode::FixedSpeed ? "fixed_speed" : "closed";
    }
    j["v_star_mps"] = c.v_star;
    if (c.observed_ids.empty())
        j["observed"] = Json{{"ahead", c.observe_ahead}, {"behind", c.observe_behind}};
    else
        j["observed"] = Json{{"ids", c.observed_ids}};
    j["hdv"] = params_to_json(c.hdv);
    j["cav"] = params_to_json(c.cav);
    j["heterogeneity"] = Json{{"alpha_spread_per_s", c.heterogeneity.alpha_spread},
                              {"theta_spread_per_s", c.heterogeneity.theta_spread},
                              {"s_go_spread_m", c.heterogeneity.s_go_spread},
                              {"seed", c.heterogeneity.seed}};
    j["weights"] = weights_to_json(c.weights);
    Json init{{"layout", c.initial.layout == Layout::Equilibrium ? "equilibrium" : "uniform"},
              {"velocity_spread_mps", c.initial.velocity_spread}};
    if (c.initial.velocity_center >= 0.0) init["velocity_center_mps"] = c.initial.velocity_center;
    j["initial"] = init;
    Json dist = Json::array();
    for (const auto& d : c.disturbances)
        dist.push_back(Json{{"vehicle", d.vehicle}, {"start_s", d.start}, {"duration_s", d.duration},
                            {"accel_mps2", d.accel}});
    j["disturbances"] = dist;
    j["horizon_s"] = c.horizon;
    j["dt_s"] = c.dt;
    j["seed"] = c.seed;
    j["a_min_mps2"] = c.a_min;
    j["a_max_mps2"] = c.a_max;
    if (c.controller_file) j["controller_file"] = c.controller_file->string();
    j["synthesis"] = Json{{"pole_radius_radps", c.pole_radius},
                          {"robust_samples", c.robust_samples},
                          {"uncertainty", Json{{"alpha_range_per_s", c.ranges.d_alpha},
                                               {"theta_range_per_s", c.ranges.d_theta},
                                               {"s_go_range_m", c.ranges.d_s_go}}}};
    j["sweep"] = Json{{"accel_mps2", c.sweep.accel}, {"start_s", c.sweep.start}, {"duration_s", c.sweep.duration},
                      {"threads", c.sweep.threads}};
    j["output"] = Json{{"csv_stride", c.csv_stride}};
    return j;
}

ScenarioConfig reference_ring_config(double v_star) {
    ScenarioConfig c;
    c.road = RoadType::Ring;
    c.vehicles = 20;
    c.ring_length = 400.0;
    c.v_star = v_star;
    c.heterogeneity = {0.1, 0.1, 5.0, 1};
    c.ranges.nominal = c.hdv;
    return c;
}

PlatoonSetup build_setup(const ScenarioConfig& cfg) {
    const std::size_t n = cfg.vehicles;
    PlatoonSetup s;
    s.params.assign(n, cfg.hdv);
    s.params[0] = cfg.cav;
    Rng rng(cfg.heterogeneity.seed);
    for (std::size_t i = 1; i < n; ++i) {
        VehicleParams& p = s.params[i];
        p.alpha += rng.uniform(-cfg.heterogeneity.alpha_spread, cfg.heterogeneity.alpha_spread);
        p.theta += rng.uniform(-cfg.heterogeneity.theta_spread, cfg.heterogeneity.theta_spread);
        p.s_go += rng.uniform(-cfg.heterogeneity.s_go_spread, cfg.heterogeneity.s_go_spread);
        try {
            p.validate();
        } catch (const Error& e) {
            config_error("vehicle " + std::to_string(i + 1) + " parameters after heterogeneity draw: " + e.what());
        }
    }

    Equilibrium eq;
    if (cfg.road == RoadType::Ring)
        eq = ring_equilibrium(s.params, cfg.ring_length, cfg.closure, cfg.v_star);
    else
        eq = equilibrium_open_road(s.params, cfg.v_star);

    PlatoonSpec spec;
    spec.n = n;
    spec.road = cfg.road;
    spec.ring_length = cfg.road == RoadType::Ring ? cfg.ring_length : 0.0;
    for (std::size_t i = 2; i <= n; ++i) spec.hdv_betas.push_back(linearize(s.params[i - 1], eq, i));
    spec.observed = observed_for(cfg);
    s.plant = build_plant(spec, eq, cfg.weights);
    return s;
}

Scenario make_scenario(const ScenarioConfig& cfg, const PlatoonSetup& setup) {
    Scenario sc;
    sc.spec = setup.plant.spec;
    sc.params = setup.params;
    sc.eq = setup.plant.eq;
    sc.init = cfg.initial;
    sc.disturbances = cfg.disturbances;
    sc.horizon = cfg.horizon;
    sc.dt = cfg.dt;
    sc.seed = cfg.seed;
    sc.a_min = cfg.a_min;
    sc.a_max = cfg.a_max;
    sc.validate();
    return sc;
}

SynthesisOutcome synthesize_for(const ScenarioConfig& cfg, const PlatoonSetup& setup, bool robust, bool full_ring) {
    const LinearizedPlatoon& plant = setup.plant;
    const bool ring = plant.spec.road == RoadType::Ring;
    const bool reduce = ring && !full_ring;

    SynthesisOptions opts;
    opts.pole_radius = cfg.pole_radius;
    opts.robust_samples = cfg.robust_samples;
    opts.allow_marginal = ring && full_ring;

    SynthesisOutcome out;
    std::optional<ReducedPlatoon> red;
    if (reduce) red = reduce_ring(plant);
    const StateSpace& model = reduce ? red->ss : plant.ss;

    bool did_robust = false;
    if (robust) {
        ParameterRanges ranges = cfg.ranges;
        ranges.nominal = cfg.hdv;
        try {
            const UncertaintyModel unc = platoon_uncertainty(plant.spec, ranges, plant.eq.v_star, reduce);
            out.result = synthesize_robust(model, unc, opts);
            did_robust = true;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::EmptyUncertainty) throw;
            out.note = "uncertainty ranges are degenerate; nominal synthesis used";
        }
    }
    if (!did_robust) {
        if (reduce)
            out.result = synthesize_nominal(*red, opts);
        else
            out.result = synthesize_nominal(plant, opts);
    }
    out.meta.gamma = out.result.gamma;
    out.meta.road = plant.spec.road;
    out.meta.reduced = reduce;
    out.meta.robust = did_robust;
    out.meta.weights = plant.weights;
    out.meta.vehicles = plant.spec.n;
    out.meta.v_star = plant.eq.v_star;
    out.meta.observed = plant.spec.observed;
    return out;
}

Json analyze_setup(const PlatoonSetup& setup, const AnalysisOptions& opts) {
    const AnalysisReport full = pbh_report(setup.plant, opts);
    Json j = report_to_json(full);
    j["model"] = "full";
    j["states"] = setup.plant.ss.states();
    j["road"] = to_string(setup.plant.spec.road);
    j["v_star_mps"] = setup.plant.eq.v_star;
    j["s_star_m"] = setup.plant.eq.s_star;
    j["observed"] = setup.plant.spec.observed;
    if (setup.plant.spec.road == RoadType::Ring) {
        const ReducedPlatoon red = reduce_ring(setup.plant);
        Json r = report_to_json(pbh_report(red, opts));
        r["states"] = red.ss.states();
        j["reduced"] = r;
    }
    return j;
}

std::vector<SweepRow> run_sweep(const ScenarioConfig& cfg, const PlatoonSetup& setup, const Controller& controller) {
    const std::size_t n = setup.plant.spec.n;
    std::vector<SweepRow> rows(n - 1);
    ScenarioConfig base = cfg;
    base.disturbances.clear();
    if (cfg.sweep.start + cfg.sweep.duration > cfg.horizon)
        config_error("sweep pulse does not fit in the horizon");
    const Scenario proto = make_scenario(base, setup);

    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&]() {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= rows.size()) return;
            try {
                Scenario sc = proto;
                sc.disturbances = {{k + 2, cfg.sweep.start, cfg.sweep.duration, cfg.sweep.accel}};
                const double after = cfg.sweep.start + cfg.sweep.duration;
                const Trajectory with = simulate(sc, controller);
                const Trajectory without = simulate(sc, std::nullopt);
                SweepRow& row = rows[k];
                row.vehicle = k + 2;
                row.controlled = compute_metrics(with, sc.eq, setup.plant.weights, after);
                row.baseline = compute_metrics(without, sc.eq, setup.plant.weights, after);
                row.collided_controlled = with.collided;
                row.collided_baseline = without.collided;
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                next.store(rows.size());
                return;
            }
        }
    };
    unsigned threads = cfg.sweep.threads ? cfg.sweep.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(rows.size()));
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
    return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << "vehicle,max_spacing_error_cav_m,quadratic_cost,settled,settle_time_s,min_spacing_m,collided,"
           "baseline_max_spacing_error_cav_m,baseline_quadratic_cost,baseline_collided\n";
    out << std::setprecision(10);
    for (const auto& r : rows) {
        out << r.vehicle << ',' << r.controlled.max_spacing_error_cav << ',' << r.controlled.quadratic_cost << ','
            << (r.controlled.settled ? 1 : 0) << ',' << r.controlled.settle_time << ',' << r.controlled.min_spacing
            << ',' << (r.collided_controlled ? 1 : 0) << ',' << r.baseline.max_spacing_error_cav << ','
            << r.baseline.quadratic_cost << ',' << (r.collided_baseline ? 1 : 0) << '\n';
    }
}

Mode mode_from_string(const std::string& name) {
    if (name == "analyze") return Mode::Analyze;
    if (name == "synthesize") return Mode::Synthesize;
    if (name == "simulate") return Mode::Simulate;
    if (name == "sweep") return Mode::Sweep;
    config_error("unknown mode '" + name + "'");
}

namespace {

Json synthesis_summary(const SynthesisOutcome& o) {
    const SynthesisDiagnostics& d = o.result.diagnostics;
    Json j{{"gamma", o.result.gamma},
           {"robust", o.meta.robust},
           {"reduced", o.meta.reduced},
           {"controller_order", o.result.controller.order()},
           {"solver_iterations", d.solver_iterations},
           {"solve_seconds", d.solve_seconds},
           {"decision_variables", d.decision_variables},
           {"max_violation", d.max_violation},
           {"recovery_condition", d.recovery_condition},
           {"factor_residual", d.factor_residual},
           {"closed_loop_abscissa", d.closed_loop_abscissa},
           {"closed_loop_spectral_radius", d.closed_loop_spectral_radius},
           {"closed_loop_hinf", d.closed_loop_hinf},
           {"solver_message", d.solver_message}};
    if (o.meta.robust) {
        j["sample_hinf"] = d.sample_hinf;
        j["sample_abscissa"] = d.sample_abscissa;
        j["epsilons"] = d.epsilons;
    }
    if (!o.note.empty()) j["note"] = o.note;
    return j;
}

void plot_trajectory(const std::filesystem::path& dir, const Trajectory& tr, const std::string& tag) {
    write_text(dir / ("velocity" + tag + ".svg"),
               svg_line_plot(tr.t, tr.v, {"Velocity (vehicle 1 highlighted)", "time [s]", "velocity [m/s]"}));
    write_text(dir / ("spacing" + tag + ".svg"),
               svg_line_plot(tr.t, tr.s, {"Spacing (vehicle 1 highlighted)", "time [s]", "spacing [m]"}));
}

Controller load_controller(const ScenarioConfig& cfg) {
    if (!std::filesystem::exists(*cfg.controller_file))
        config_error("controller file not found: " + cfg.controller_file->string());
    return controller_from_json(read_json_file(*cfg.controller_file));
}

Json run_mode(const ExperimentConfig& ec, std::ostream& log) {
    ScenarioConfig cfg = load_scenario(ec.scenario_file);
    if (ec.seed) cfg.seed = *ec.seed;
    std::error_code fs_err;
    std::filesystem::create_directories(ec.out_dir, fs_err);
    if (fs_err) config_error("cannot create output directory " + ec.out_dir.string() + ": " + fs_err.message());

    const PlatoonSetup setup = build_setup(cfg);
    Json summary{{"status", "ok"}};
    Json artifacts = Json::array();
    auto note_artifact = [&](const std::filesystem::path& p) { artifacts.push_back(p.string()); };

    switch (ec.mode) {
        case Mode::Analyze: {
            const Json report = analyze_setup(setup);
            const auto path = ec.out_dir / "analysis.json";
            write_json_file(path, report);
            note_artifact(path);
            summary["stabilizable"] = report["stabilizable"];
            summary["detectable"] = report["detectable"];
            summary["uncontrollable_at_origin"] = report["uncontrollable_at_origin"];
            break;
        }
        case Mode::Synthesize: {
            log << "synthesizing " << (ec.robust ? "robust" : "nominal") << " controller for " << cfg.vehicles
                << " vehicles\n";
            const SynthesisOutcome o = synthesize_for(cfg, setup, ec.robust, ec.full_ring);
            const auto kpath = ec.out_dir / "controller.json";
            write_json_file(kpath, controller_to_json(o.result.controller, o.meta));
            note_artifact(kpath);
            const auto spath = ec.out_dir / "synthesis.json";
            write_json_file(spath, synthesis_summary(o));
            note_artifact(spath);
            summary["gamma"] = o.result.gamma;
            break;
        }
        case Mode::Simulate: {
            std::optional<Controller> k;
            if (cfg.controller_file) k = load_controller(cfg);
            const Scenario sc = make_scenario(cfg, setup);
            const Trajectory tr = simulate(sc, k);
            double after = 0.0;
            for (const auto& d : sc.disturbances) after = std::max(after, d.start + d.duration);
            const Metrics m = compute_metrics(tr, sc.eq, setup.plant.weights, after);
            const auto csv = ec.out_dir / "trajectory.csv";
            {
                std::ofstream out(csv);
                if (!out) config_error("cannot write " + csv.string());
                write_trajectory_csv(out, tr, cfg.csv_stride);
            }
            note_artifact(csv);
            Json mj = metrics_to_json(m);
            mj["controlled"] = k.has_value();
            mj["collided"] = tr.collided;
            mj["events"] = tr.events.size();
            const auto mpath = ec.out_dir / "metrics.json";
            write_json_file(mpath, mj);
            note_artifact(mpath);
            if (ec.plot) {
                plot_trajectory(ec.out_dir, tr, "");
                note_artifact(ec.out_dir / "velocity.svg");
                note_artifact(ec.out_dir / "spacing.svg");
            }
            summary["metrics"] = mj;
            if (tr.collided) {
                fail(ErrorKind::Collision, "collision at t = " + format_number(tr.t.back()) + " s");
            }
            break;
        }
        case Mode::Sweep: {
            Controller k;
            if (cfg.controller_file) {
                k = load_controller(cfg);
            } else {
                log << "synthesizing " << (ec.robust ? "robust" : "nominal") << " controller for the sweep\n";
                const SynthesisOutcome o = synthesize_for(cfg, setup, ec.robust, ec.full_ring);
                k = o.result.controller;
                const auto kpath = ec.out_dir / "controller.json";
                write_json_file(kpath, controller_to_json(k, o.meta));
                note_artifact(kpath);
                summary["gamma"] = o.result.gamma;
            }
            const std::vector<SweepRow> rows = run_sweep(cfg, setup, k);
            const auto csv = ec.out_dir / "sweep.csv";
            {
                std::ofstream out(csv);
                if (!out) config_error("cannot write " + csv.string());
                write_sweep_csv(out, rows);
            }
            note_artifact(csv);
            if (ec.plot) {
                std::vector<double> idx;
                Matrix costs(static_cast<Eigen::Index>(rows.size()), 2);
                for (std::size_t r = 0; r < rows.size(); ++r) {
                    idx.push_back(static_cast<double>(rows[r].vehicle));
                    costs(static_cast<Eigen::Index>(r), 0) = rows[r].controlled.quadratic_cost;
                    costs(static_cast<Eigen::Index>(r), 1) = rows[r].baseline.quadratic_cost;
                }
                const auto svg = ec.out_dir / "sweep_cost.svg";
                write_text(svg, svg_line_plot(idx, costs,
                                              {"Quadratic cost per perturbed vehicle (controlled highlighted)",
                                               "perturbed vehicle", "cost"}));
                note_artifact(svg);
            }
            summary["rows"] = rows.size();
            break;
        }
    }
    summary["artifacts"] = artifacts;
    return summary;
}

}  // namespace

int run(const ExperimentConfig& ec, std::ostream& out, std::ostream& log) {
    try {
        const Json summary = run_mode(ec, log);
        out << summary.dump() << '\n';
        return 0;
    } catch (const Error& e) {
        out << Json{{"kind", std::string(to_string(e.kind()))}, {"message", e.what()}}.dump() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        out << Json{{"kind", "InternalError"}, {"message", e.what()}}.dump() << '\n';
        return 1;
    }
}

}  // namespace platoon
