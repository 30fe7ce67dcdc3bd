#pragma once

// JSON serialization of matrices, controllers, reports and metrics.

#include "platoon/hinf_synth.hpp"
#include "platoon/modal_analysis.hpp"
#include "platoon/sim_engine.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>

namespace platoon {

using Json = nlohmann::ordered_json;

// {"rows": r, "cols": c, "data": [[row 0], [row 1], ...]}
[[nodiscard]] Json matrix_to_json(const Matrix& m);
// Throws ConfigError on a malformed matrix; `what` names the field.
[[nodiscard]] Matrix matrix_from_json(const Json& j, const std::string& what);

struct ControllerMeta {
    double gamma = 0.0;
    RoadType road = RoadType::Ring;
    bool reduced = true;
    bool robust = false;
    PerformanceWeights weights{};
    std::size_t vehicles = 0;
    double v_star = 0.0;
    std::vector<std::size_t> observed;
};

[[nodiscard]] Json controller_to_json(const Controller& k, const ControllerMeta& meta);
[[nodiscard]] Controller controller_from_json(const Json& j, ControllerMeta* meta = nullptr);

[[nodiscard]] Json weights_to_json(const PerformanceWeights& w);
[[nodiscard]] Json report_to_json(const AnalysisReport& r);
[[nodiscard]] Json metrics_to_json(const Metrics& m);

// Throws ConfigError when the file is missing or not valid JSON.
[[nodiscard]] Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

}  // namespace platoon
