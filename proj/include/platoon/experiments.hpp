#pragma once

// Scenario configuration, experiment drivers and the CLI entry point.

#include "platoon/hinf_synth.hpp"
#include "platoon/json_io.hpp"
#include "platoon/modal_analysis.hpp"
#include "platoon/sim_engine.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace platoon {

inline constexpr const char* kScenarioSchema = "platoon-scenario/1";

// Spread of the human-driven vehicle parameters around `hdv`: each HDV draws
// alpha + U[-alpha_spread, alpha_spread] and likewise for theta and s_go.
struct Heterogeneity {
    double alpha_spread = 0.0;
    double theta_spread = 0.0;
    double s_go_spread = 0.0;
    std::uint64_t seed = 1;
};

struct SweepSettings {
    double accel = -3.0;     // m/s^2
    double start = 20.0;     // s
    double duration = 3.0;   // s
    unsigned threads = 0;    // 0: hardware concurrency
};

// Parsed scenario file. Field names in the file carry their units.
struct ScenarioConfig {
    RoadType road = RoadType::Ring;
    std::size_t vehicles = 20;
    double ring_length = 400.0;
    double v_star = 15.0;
    ClosureMode closure = ClosureMode::FixedSpeed;
    std::size_t observe_ahead = 5;
    std::size_t observe_behind = 5;
    std::vector<std::size_t> observed_ids;  // overrides ahead/behind when non-empty
    VehicleParams hdv{};
    VehicleParams cav{};
    Heterogeneity heterogeneity{};
    PerformanceWeights weights{};
    InitialCondition initial{};
    std::vector<Disturbance> disturbances;
    double horizon = 100.0;
    double dt = 0.01;
    std::uint64_t seed = 1;
    double a_min = -5.0;
    double a_max = 2.0;
    std::optional<std::filesystem::path> controller_file;
    double pole_radius = 20.0;
    int robust_samples = 50;
    ParameterRanges ranges{};  // nominal values are taken from `hdv`
    SweepSettings sweep{};
    std::size_t csv_stride = 10;
};

// Throws ConfigError on schema violations, including unknown fields. Relative
// paths resolve against `base_dir`.
[[nodiscard]] ScenarioConfig parse_scenario(const Json& j, const std::filesystem::path& base_dir);
[[nodiscard]] ScenarioConfig load_scenario(const std::filesystem::path& file);
[[nodiscard]] Json scenario_to_json(const ScenarioConfig& cfg);

// Ring of 20 vehicles on 400 m with heterogeneous HDVs (alpha 0.6 +- 0.1,
// theta 0.9 +- 0.1, s_go 35 +- 5), CAV observing five vehicles on each side.
[[nodiscard]] ScenarioConfig reference_ring_config(double v_star = 15.0);

struct PlatoonSetup {
    std::vector<VehicleParams> params;  // vehicle 1 first
    LinearizedPlatoon plant;
};

[[nodiscard]] PlatoonSetup build_setup(const ScenarioConfig& cfg);
[[nodiscard]] Scenario make_scenario(const ScenarioConfig& cfg, const PlatoonSetup& setup);

struct SynthesisOutcome {
    SynthesisResult result;
    ControllerMeta meta;
    std::string note;
};

// Nominal or robust synthesis on the reduced ring (or the full model when
// `full_ring`). A degenerate uncertainty model falls back to nominal synthesis.
[[nodiscard]] SynthesisOutcome synthesize_for(const ScenarioConfig& cfg, const PlatoonSetup& setup, bool robust,
                                              bool full_ring);

// Report for the full model, plus the reduced ring when applicable.
[[nodiscard]] Json analyze_setup(const PlatoonSetup& setup, const AnalysisOptions& opts = {});

struct SweepRow {
    std::size_t vehicle = 0;  // perturbed vehicle
    Metrics controlled;
    Metrics baseline;  // same pulse, vehicle 1 driven by the OVM
    bool collided_controlled = false;
    bool collided_baseline = false;
};

// One braking pulse per vehicle 2..n; runs are distributed over threads.
[[nodiscard]] std::vector<SweepRow> run_sweep(const ScenarioConfig& cfg, const PlatoonSetup& setup,
                                              const Controller& controller);
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

enum class Mode { Analyze, Synthesize, Simulate, Sweep };
[[nodiscard]] Mode mode_from_string(const std::string& name);

struct ExperimentConfig {
    Mode mode = Mode::Analyze;
    std::filesystem::path scenario_file;
    std::filesystem::path out_dir = "out";
    std::optional<std::uint64_t> seed;
    bool robust = false;
    bool full_ring = false;
    bool plot = false;
};

// Runs one subcommand and writes its artifacts. A JSON summary (or an error
// object {"kind", "message"}) goes to `out`; returns 0, 1 (computational
// failure) or 2 (configuration error).
int run(const ExperimentConfig& cfg, std::ostream& out, std::ostream& log);

}  // namespace platoon
