#pragma once

// H-infinity dynamic output-feedback synthesis (nominal and norm-bounded
// robust) via the linearizing change of variables, and controller recovery.

#include "platoon/lmi.hpp"
#include "platoon/modal_analysis.hpp"
#include "platoon/platoon_ss.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace platoon {

// x_k' = A_k x_k + B_k y,  u = C_k x_k
struct Controller {
    Matrix A_k;
    Matrix B_k;
    Matrix C_k;

    [[nodiscard]] Eigen::Index order() const { return A_k.rows(); }
};

struct ClosedLoop {
    Matrix A;
    Matrix B;
    Matrix C;
};

[[nodiscard]] ClosedLoop close_loop(const StateSpace& plant, const Controller& k);
// Same with the plant A replaced by `a` (uncertainty samples).
[[nodiscard]] ClosedLoop close_loop(const StateSpace& plant, const Matrix& a, const Controller& k);

struct SynthesisOptions {
    // Closed-loop poles are confined to |lambda| <= pole_radius [rad/s];
    // 0 disables the region constraint.
    double pole_radius = 20.0;
    bool allow_marginal = false;
    double verify_tol = 1e-2;
    double max_recovery_condition = 1e12;
    bool check_preconditions = true;
    LmiOptions lmi{};
    AnalysisOptions analysis{};
    int robust_samples = 50;
    std::uint64_t robust_seed = 20240501;
};

struct SynthesisDiagnostics {
    int solver_iterations = 0;
    double solve_seconds = 0.0;
    double max_violation = 0.0;
    double recovery_condition = 0.0;
    double factor_residual = 0.0;
    double closed_loop_abscissa = 0.0;
    double closed_loop_spectral_radius = 0.0;
    double closed_loop_hinf = 0.0;
    std::size_t decision_variables = 0;
    std::string solver_message;
    // Robust path only.
    std::vector<double> sample_hinf;
    std::vector<double> sample_abscissa;
    std::vector<double> epsilons;
};

struct SynthesisResult {
    Controller controller;
    double gamma = 0.0;
    double eta = 0.0;
    Matrix X;
    Matrix Y;
    Matrix M;
    Matrix N;
    SynthesisDiagnostics diagnostics;
};

struct UncertaintyModel {
    Matrix A_nominal;
    Matrix L;
    Matrix R;
    Matrix a_min;
    Matrix a_max;
    double rho_varrho = 0.0;
    double rho = 0.0;
    double varrho = 0.0;
};

struct RecoveryInfo {
    Matrix M;
    Matrix N;
    double condition = 0.0;
    double factor_residual = 0.0;
};

// Controller from the LMI variables; `a` is the plant (or nominal) A.
// Throws RecoveryIllConditioned when I - YX is singular or too ill-conditioned.
[[nodiscard]] Controller recover_controller(const Matrix& x, const Matrix& y, const Matrix& a_hat,
                                            const Matrix& b_hat, const Matrix& c_hat, const StateSpace& plant,
                                            const Matrix& a, RecoveryInfo* info = nullptr,
                                            double max_condition = 1e12);

// Lyapunov certificate P = Lambda2 Lambda1^-1 of the closed loop.
[[nodiscard]] Matrix certificate_from(const Matrix& x, const Matrix& y, const Matrix& m, const Matrix& n);

[[nodiscard]] SynthesisResult synthesize_nominal(const StateSpace& plant, const SynthesisOptions& opts = {});
[[nodiscard]] SynthesisResult synthesize_nominal(const ReducedPlatoon& plant, const SynthesisOptions& opts = {});
// Full-order plant; ring roads require opts.allow_marginal.
[[nodiscard]] SynthesisResult synthesize_nominal(const LinearizedPlatoon& plant, const SynthesisOptions& opts = {});

// Entrywise ranges -> midpoint A_N and scalings L = varrho I, R = rho I.
// Throws EmptyUncertainty when every range is degenerate.
[[nodiscard]] UncertaintyModel build_uncertainty(const Matrix& a_min, const Matrix& a_max);

// Parameter ranges of the human-driven vehicles around nominal values.
struct ParameterRanges {
    VehicleParams nominal{};
    double d_alpha = 0.1;
    double d_theta = 0.1;
    double d_s_go = 5.0;
};

// Entry ranges of A for a platoon whose HDVs have parameters in `ranges`,
// each linearized at its own equilibrium spacing for speed v_star.
void platoon_entry_ranges(const PlatoonSpec& spec, const ParameterRanges& ranges, double v_star,
                          bool reduced, Matrix& a_min, Matrix& a_max);

[[nodiscard]] UncertaintyModel platoon_uncertainty(const PlatoonSpec& spec, const ParameterRanges& ranges,
                                                   double v_star, bool reduced);

// A_N + L F R for a random F with ||F||_2 = scale (scale in [0, 1]).
[[nodiscard]] Matrix sample_admissible(const UncertaintyModel& unc, std::uint64_t seed, double scale);

// Solves the robust LMI with A_N in place of plant.A; samples F to verify.
[[nodiscard]] SynthesisResult synthesize_robust(const StateSpace& plant, const UncertaintyModel& unc,
                                                const SynthesisOptions& opts = {});

}  // namespace platoon
