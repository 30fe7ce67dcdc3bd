#include "platoon/json_io.hpp"

#include "platoon/error.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace platoon {

namespace {

[[noreturn]] void config_error(const std::string& m) { fail(ErrorKind::ConfigError, m); }

Json finite_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

}  // namespace

Json matrix_to_json(const Matrix& m) {
    Json data = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        data.push_back(std::move(row));
    }
    return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const Json& j, const std::string& what) {
    if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data"))
        config_error(what + ": expected {rows, cols, data}");
    if (!j["rows"].is_number_unsigned() || !j["cols"].is_number_unsigned())
        config_error(what + ": rows and cols must be non-negative integers");
    const auto rows = j["rows"].get<Eigen::Index>();
    const auto cols = j["cols"].get<Eigen::Index>();
    const Json& data = j["data"];
    if (!data.is_array() || static_cast<Eigen::Index>(data.size()) != rows)
        config_error(what + ": data must hold one array per row");
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const Json& row = data[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            config_error(what + ": row " + std::to_string(i) + " has the wrong length");
        for (Eigen::Index c = 0; c < cols; ++c) {
            const Json& x = row[static_cast<std::size_t>(c)];
            if (!x.is_number()) config_error(what + ": non-numeric entry");
            m(i, c) = x.get<double>();
            if (!std::isfinite(m(i, c))) config_error(what + ": non-finite entry");
        }
    }
    return m;
}

Json weights_to_json(const PerformanceWeights& w) {
    return Json{{"gamma_s", w.gamma_s}, {"gamma_v", w.gamma_v}, {"gamma_u", w.gamma_u},
                {"gamma_u1", w.gamma_u1}, {"gamma_u2", w.gamma_u2}};
}

Json controller_to_json(const Controller& k, const ControllerMeta& meta) {
    Json j;
    j["A_k"] = matrix_to_json(k.A_k);
    j["B_k"] = matrix_to_json(k.B_k);
    j["C_k"] = matrix_to_json(k.C_k);
    j["meta"] = Json{{"gamma", meta.gamma},
                     {"road", to_string(meta.road)},
                     {"reduced", meta.reduced},
                     {"robust", meta.robust},
                     {"weights", weights_to_json(meta.weights)},
                     {"vehicles", meta.vehicles},
                     {"v_star_mps", meta.v_star},
                     {"observed", meta.observed}};
    return j;
}

Controller controller_from_json(const Json& j, ControllerMeta* meta) {
    if (!j.is_object()) config_error("controller: expected a JSON object");
    for (const char* key : {"A_k", "B_k", "C_k"})
        if (!j.contains(key)) config_error(std::string("controller: missing ") + key);
    Controller k;
    k.A_k = matrix_from_json(j["A_k"], "A_k");
    k.B_k = matrix_from_json(j["B_k"], "B_k");
    k.C_k = matrix_from_json(j["C_k"], "C_k");
    if (k.A_k.rows() != k.A_k.cols() || k.B_k.rows() != k.A_k.rows() || k.C_k.cols() != k.A_k.rows())
        config_error("controller: inconsistent A_k, B_k, C_k dimensions");
    if (meta && j.contains("meta")) {
        try {
            const Json& m = j["meta"];
            meta->gamma = m.value("gamma", 0.0);
            meta->road = road_from_string(m.value("road", std::string("ring")));
            meta->reduced = m.value("reduced", true);
            meta->robust = m.value("robust", false);
            meta->vehicles = m.value("vehicles", std::size_t{0});
            meta->v_star = m.value("v_star_mps", 0.0);
            if (m.contains("observed")) meta->observed = m["observed"].get<std::vector<std::size_t>>();
            if (m.contains("weights")) {
                const Json& w = m["weights"];
                meta->weights.gamma_s = w.value("gamma_s", meta->weights.gamma_s);
                meta->weights.gamma_v = w.value("gamma_v", meta->weights.gamma_v);
                meta->weights.gamma_u = w.value("gamma_u", meta->weights.gamma_u);
                meta->weights.gamma_u1 = w.value("gamma_u1", meta->weights.gamma_u1);
                meta->weights.gamma_u2 = w.value("gamma_u2", meta->weights.gamma_u2);
            }
        } catch (const nlohmann::json::exception& e) {
            config_error(std::string("controller meta: ") + e.what());
        } catch (const Error& e) {
            config_error(std::string("controller meta: ") + e.what());
        }
    }
    return k;
}

Json report_to_json(const AnalysisReport& r) {
    Json modes = Json::array();
    for (const auto& m : r.modes) {
        modes.push_back(Json{{"re", m.lambda.real()},
                             {"im", m.lambda.imag()},
                             {"controllable", m.controllable},
                             {"observable", m.observable},
                             {"residual_ctrb", m.residual_ctrb},
                             {"residual_obsv", m.residual_obsv}});
    }
    return Json{{"stabilizable", r.stabilizable},
                {"strictly_stabilizable", r.strictly_stabilizable},
                {"detectable", r.detectable},
                {"uncontrollable_at_origin", r.uncontrollable_at_origin},
                {"uncontrollable_total", r.uncontrollable_total},
                {"unobservable_total", r.unobservable_total},
                {"rank_tol", r.rank_tol},
                {"modes", std::move(modes)}};
}

Json metrics_to_json(const Metrics& m) {
    return Json{{"max_spacing_error_cav_m", finite_or_null(m.max_spacing_error_cav)},
                {"quadratic_cost", finite_or_null(m.quadratic_cost)},
                {"state_cost", finite_or_null(m.state_cost)},
                {"input_cost", finite_or_null(m.input_cost)},
                {"settle_time_s", finite_or_null(m.settle_time)},
                {"settled", m.settled},
                {"min_spacing_m", finite_or_null(m.min_spacing)}};
}

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) config_error("cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        config_error(path.string() + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
    std::ofstream out(path);
    if (!out) config_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) config_error("write failed: " + path.string());
}

}  // namespace platoon
