#pragma once

// Block-diagonal semidefinite programs in LMI form:
//
//     minimize    c^T y
//     subject to  F0 + sum_i y_i F_i  >= 0   (block-diagonal, PSD cone per block)
//
// Solved by a primal-dual interior-point method (HKM search direction,
// Mehrotra predictor-corrector, infeasible start).

#include "platoon/linalg.hpp"

#include <memory>
#include <string>
#include <vector>

namespace platoon {

// One nonzero of a symmetric block, stored once with row <= col.
struct SymEntry {
    int block = 0;
    int row = 0;
    int col = 0;
    double value = 0.0;
};

struct ConicProblem {
    std::vector<int> block_sizes;
    std::vector<double> objective;            // c, one entry per scalar variable
    std::vector<SymEntry> constant;           // F0
    std::vector<std::vector<SymEntry>> coeffs;  // F_i, one list per scalar variable

    [[nodiscard]] std::size_t num_vars() const { return objective.size(); }
    // Throws InvalidArgument on out-of-range or lower-triangle entries.
    void validate() const;
};

enum class SdpStatus { Optimal, Infeasible, Unbounded, NumericalTrouble, IterationLimit };

[[nodiscard]] std::string to_string(SdpStatus status);

struct SdpSettings {
    double gap_tol = 1e-8;
    double feas_tol = 1e-8;
    // A run that stalls is still accepted (at reduced accuracy) when its best
    // iterate meets these looser bounds.
    double relaxed_gap_tol = 1e-3;
    double relaxed_feas_tol = 1e-4;
    double step_fraction = 0.95;
    int max_iterations = 120;
    // Infeasibility certificates are accepted when the normalized residual of
    // the ray is below this threshold.
    double certificate_tol = 1e-8;
    bool verbose = false;
};

struct SdpResult {
    SdpStatus status = SdpStatus::NumericalTrouble;
    Vector y;                   // decision variables
    double primal_objective = 0.0;  // c^T y
    double dual_objective = 0.0;
    double relative_gap = 0.0;
    double primal_infeasibility = 0.0;  // of the LMI side (F(y) >= 0 residual)
    double dual_infeasibility = 0.0;
    int iterations = 0;
    std::string message;
};

class SdpBackend {
public:
    virtual ~SdpBackend() = default;
    [[nodiscard]] virtual std::string name() const = 0;
    [[nodiscard]] virtual SdpResult solve(const ConicProblem& problem, const SdpSettings& settings) = 0;
};

class InteriorPointBackend final : public SdpBackend {
public:
    [[nodiscard]] std::string name() const override { return "native-ipm"; }
    [[nodiscard]] SdpResult solve(const ConicProblem& problem, const SdpSettings& settings) override;
};

[[nodiscard]] std::unique_ptr<SdpBackend> make_default_backend();

// Evaluates F0 + sum y_i F_i as dense blocks.
[[nodiscard]] std::vector<Matrix> evaluate_blocks(const ConicProblem& problem, const Vector& y);

}  // namespace platoon
