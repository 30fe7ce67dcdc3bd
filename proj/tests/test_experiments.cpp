#include "doctest.h"

#include "platoon/error.hpp"
#include "platoon/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace platoon;
namespace fs = std::filesystem;

namespace {

Json small_ring() {
    return Json::parse(R"({
        "schema": "platoon-scenario/1",
        "road": "ring",
        "vehicles": 6,
        "ring_length_m": 120,
        "v_star_mps": 15,
        "observed": {"ahead": 2, "behind": 2},
        "heterogeneity": {"alpha_spread_per_s": 0.1, "theta_spread_per_s": 0.1, "s_go_spread_m": 5, "seed": 3},
        "horizon_s": 40,
        "sweep": {"accel_mps2": -3, "start_s": 10, "duration_s": 3, "threads": 2}
    })");
}

bool config_error_on(const Json& j) {
    try {
        (void)parse_scenario(j, ".");
    } catch (const Error& e) {
        return e.kind() == ErrorKind::ConfigError;
    }
    return false;
}

fs::path scratch_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("platoon_test_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

fs::path write_config(const fs::path& dir, const Json& j) {
    const fs::path p = dir / "scenario.json";
    std::ofstream(p) << j.dump(2);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("scenario parsing is fail-closed") {
    CHECK_NOTHROW((void)parse_scenario(small_ring(), "."));

    Json j = small_ring();
    j["colour"] = "red";
    CHECK(config_error_on(j));
    j = small_ring();
    j["observed"]["sideways"] = 1;
    CHECK(config_error_on(j));
    j = small_ring();
    j["hdv"] = {{"alpha_per_s", 0.5}, {"alpha", 0.5}};
    CHECK(config_error_on(j));
    j = small_ring();
    j["disturbances"] = Json::array({{{"vehicle", 2}, {"start_s", 1}, {"duration_s", 1}, {"accel_mps2", -1}, {"x", 0}}});
    CHECK(config_error_on(j));
    j = small_ring();
    j["schema"] = "platoon-scenario/2";
    CHECK(config_error_on(j));
    j = small_ring();
    j.erase("schema");
    CHECK(config_error_on(j));
    j = small_ring();
    j["road"] = "motorway";
    CHECK(config_error_on(j));
    j = small_ring();
    j["vehicles"] = 1;
    CHECK(config_error_on(j));
    j = small_ring();
    j["horizon_s"] = "long";
    CHECK(config_error_on(j));
    j = small_ring();
    j["closure"] = "open";
    CHECK(config_error_on(j));
}

TEST_CASE("scenario JSON round trip") {
    Json j = small_ring();
    j["disturbances"] = Json::array({{{"vehicle", 3}, {"start_s", 5}, {"duration_s", 2}, {"accel_mps2", -2}}});
    j["weights"] = {{"gamma_s", 0.05}, {"gamma_v", 0.2}, {"gamma_u", 2}};
    j["initial"] = {{"layout", "uniform"}, {"velocity_spread_mps", 3}};
    const ScenarioConfig a = parse_scenario(j, ".");
    const Json dumped = scenario_to_json(a);
    const ScenarioConfig b = parse_scenario(dumped, ".");
    CHECK(scenario_to_json(b) == dumped);
    CHECK(b.vehicles == 6);
    CHECK(b.disturbances.size() == 1);
    CHECK(b.disturbances[0].vehicle == 3);
    CHECK(b.weights.gamma_u == 2.0);
    CHECK(b.initial.layout == Layout::Uniform);
    CHECK(b.heterogeneity.seed == 3);
}

TEST_CASE("reference ring setup") {
    const ScenarioConfig cfg = reference_ring_config();
    const PlatoonSetup s = build_setup(cfg);
    CHECK(s.plant.spec.n == 20);
    CHECK(s.plant.spec.observed.size() == 11);
    CHECK(s.plant.ss.C.rows() == 22);
    CHECK(s.plant.eq.v_star == 15.0);
    double total = 0.0;
    for (const double x : s.plant.eq.s_star) total += x;
    CHECK(total == doctest::Approx(400.0).epsilon(1e-12));
    // Heterogeneous draws stay inside their spreads.
    for (std::size_t i = 1; i < s.params.size(); ++i) {
        CHECK(std::abs(s.params[i].alpha - 0.6) <= 0.1);
        CHECK(std::abs(s.params[i].theta - 0.9) <= 0.1);
        CHECK(std::abs(s.params[i].s_go - 35.0) <= 5.0);
    }
    CHECK(build_setup(cfg).params[5].alpha == s.params[5].alpha);
}

TEST_CASE("analyze writes a structural report") {
    const fs::path dir = scratch_dir("analyze");
    ExperimentConfig ec;
    ec.mode = Mode::Analyze;
    ec.scenario_file = write_config(dir, small_ring());
    ec.out_dir = dir / "out";
    std::ostringstream out, log;
    REQUIRE(run(ec, out, log) == 0);
    const Json summary = Json::parse(out.str());
    CHECK(summary["status"] == "ok");
    const Json report = read_json_file(ec.out_dir / "analysis.json");
    CHECK(report["stabilizable"] == true);
    CHECK(report["detectable"] == true);
    CHECK(report["uncontrollable_at_origin"] == 1);
    CHECK(report["states"] == 12);
    CHECK(report["reduced"]["states"] == 11);
    CHECK(report["reduced"]["uncontrollable_at_origin"] == 0);
}

TEST_CASE("synthesize then simulate through the driver") {
    const fs::path dir = scratch_dir("pipeline");
    Json j = small_ring();
    j["initial"] = {{"velocity_spread_mps", 2}};
    j["controller_file"] = "out/controller.json";
    const fs::path cfg = write_config(dir, j);

    ExperimentConfig ec;
    ec.mode = Mode::Synthesize;
    ec.scenario_file = cfg;
    ec.out_dir = dir / "out";
    std::ostringstream out, log;
    REQUIRE(run(ec, out, log) == 0);
    const Json summary = Json::parse(out.str());
    CHECK(summary["gamma"].get<double>() > 0.0);
    ControllerMeta meta;
    const Controller k = controller_from_json(read_json_file(ec.out_dir / "controller.json"), &meta);
    CHECK(k.order() == 11);
    CHECK(meta.vehicles == 6);
    CHECK(meta.reduced);
    CHECK(meta.gamma == summary["gamma"].get<double>());

    ec.mode = Mode::Simulate;
    ec.plot = true;
    std::ostringstream out2;
    REQUIRE(run(ec, out2, log) == 0);
    const Json sim = Json::parse(out2.str());
    CHECK(sim["metrics"]["controlled"] == true);
    CHECK(sim["metrics"]["collided"] == false);
    CHECK(slurp(ec.out_dir / "trajectory.csv").rfind("t,veh,p,v,s,u,event\n", 0) == 0);
    CHECK(slurp(ec.out_dir / "velocity.svg").rfind("<svg", 0) == 0);
    CHECK(fs::exists(ec.out_dir / "metrics.json"));
}

TEST_CASE("missing controller file is a configuration error") {
    const fs::path dir = scratch_dir("missing");
    Json j = small_ring();
    j["controller_file"] = "nowhere/controller.json";
    ExperimentConfig ec;
    ec.mode = Mode::Simulate;
    ec.scenario_file = write_config(dir, j);
    ec.out_dir = dir / "out";
    std::ostringstream out, log;
    CHECK(run(ec, out, log) == 2);
    const Json err = Json::parse(out.str());
    CHECK(err["kind"] == "ConfigError");
    CHECK(err["message"].get<std::string>().find("controller file not found") != std::string::npos);
}

TEST_CASE("unreadable scenario is a configuration error") {
    const fs::path dir = scratch_dir("unreadable");
    std::ofstream(dir / "broken.json") << "{ not json";
    ExperimentConfig ec;
    ec.mode = Mode::Analyze;
    ec.scenario_file = dir / "broken.json";
    ec.out_dir = dir / "out";
    std::ostringstream out, log;
    CHECK(run(ec, out, log) == 2);
    ec.scenario_file = dir / "absent.json";
    std::ostringstream out2;
    CHECK(run(ec, out2, log) == 2);
    CHECK(Json::parse(out2.str())["kind"] == "ConfigError");
}

TEST_CASE("sweep covers every human-driven vehicle and is reproducible") {
    const ScenarioConfig cfg = parse_scenario(small_ring(), ".");
    const PlatoonSetup setup = build_setup(cfg);
    const Controller k = synthesize_for(cfg, setup, false, false).result.controller;
    const std::vector<SweepRow> rows = run_sweep(cfg, setup, k);
    REQUIRE(rows.size() == 5);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        CHECK(rows[r].vehicle == r + 2);
        CHECK(rows[r].baseline.quadratic_cost > 0.0);
        CHECK(rows[r].controlled.quadratic_cost > 0.0);
    }
    ScenarioConfig serial = cfg;
    serial.sweep.threads = 1;
    std::ostringstream a, b;
    write_sweep_csv(a, rows);
    write_sweep_csv(b, run_sweep(serial, setup, k));
    CHECK(a.str() == b.str());
    CHECK(a.str().rfind("vehicle,max_spacing_error_cav_m,quadratic_cost,", 0) == 0);
}

TEST_CASE("mode names") {
    CHECK(mode_from_string("sweep") == Mode::Sweep);
    CHECK_THROWS_AS((void)mode_from_string("plot"), Error);
}

TEST_CASE("reference sweep settles for every perturbed vehicle") {
    const ScenarioConfig cfg = reference_ring_config();
    const PlatoonSetup setup = build_setup(cfg);
    const Controller k = synthesize_for(cfg, setup, false, false).result.controller;
    const std::vector<SweepRow> rows = run_sweep(cfg, setup, k);
    REQUIRE(rows.size() == 19);
    for (const SweepRow& r : rows) {
        CHECK(std::isfinite(r.controlled.quadratic_cost));
        CHECK(r.controlled.settled);
        CHECK_FALSE(r.collided_controlled);
    }
    std::ostringstream csv;
    write_sweep_csv(csv, rows);
    const std::string text = csv.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 20);
}
