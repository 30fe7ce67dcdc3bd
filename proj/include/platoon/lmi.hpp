#pragma once

// Block-structured LMIs over matrix variables, compiled to a ConicProblem.
//
//   LmiProgram prog;
//   auto P = prog.add_variable("P", 3, 3, /*symmetric=*/true);
//   prog.add_constraint(BlockMatrix{{Aᵀ·P + P·A}}, Sense::NegativeDefinite);
//   auto sol = prog.solve();

#include "platoon/linalg.hpp"
#include "platoon/sdp_solver.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace platoon {

struct MatVar {
    std::string name;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    bool symmetric = false;
    int id = -1;

    [[nodiscard]] bool is_scalar() const { return rows == 1 && cols == 1; }
};

// Affine matrix expression: constant + sum of left * V * right (or V^T).
class AffineExpr {
public:
    struct Term {
        int var = -1;
        Matrix left;
        Matrix right;
        bool transposed = false;
    };

    AffineExpr() = default;
    AffineExpr(Eigen::Index rows, Eigen::Index cols);
    // Constant expression.
    explicit AffineExpr(const Matrix& constant);
    // The variable itself.
    AffineExpr(const MatVar& v);  // NOLINT(google-explicit-constructor)

    [[nodiscard]] static AffineExpr zero(Eigen::Index rows, Eigen::Index cols);
    // v * K for a scalar variable v and constant K.
    [[nodiscard]] static AffineExpr scaled(const MatVar& scalar, const Matrix& k);

    [[nodiscard]] Eigen::Index rows() const { return constant_.rows(); }
    [[nodiscard]] Eigen::Index cols() const { return constant_.cols(); }
    [[nodiscard]] const Matrix& constant() const { return constant_; }
    [[nodiscard]] const std::vector<Term>& terms() const { return terms_; }

    [[nodiscard]] AffineExpr transpose() const;

    AffineExpr& operator+=(const AffineExpr& rhs);
    AffineExpr& operator-=(const AffineExpr& rhs);
    AffineExpr& operator*=(double s);

    friend AffineExpr operator+(AffineExpr a, const AffineExpr& b) { return a += b; }
    friend AffineExpr operator-(AffineExpr a, const AffineExpr& b) { return a -= b; }
    friend AffineExpr operator-(AffineExpr a) { return a *= -1.0; }
    friend AffineExpr operator*(double s, AffineExpr a) { return a *= s; }
    friend AffineExpr operator*(const Matrix& m, const AffineExpr& a);
    friend AffineExpr operator*(const AffineExpr& a, const Matrix& m);

    // Value with the given variable assignment (indexed by variable id).
    [[nodiscard]] Matrix evaluate(const std::vector<Matrix>& values) const;

private:
    Matrix constant_;
    std::vector<Term> terms_;
};

// Symmetric block matrix given by its upper triangle; blocks left empty are
// zero. Dimensions are inferred from the row/column they sit in.
class BlockMatrix {
public:
    explicit BlockMatrix(std::size_t n_blocks);
    void set(std::size_t i, std::size_t j, const AffineExpr& e);  // requires i <= j
    [[nodiscard]] std::size_t size() const { return n_; }
    [[nodiscard]] const std::optional<AffineExpr>& at(std::size_t i, std::size_t j) const;
    // Block row heights; throws DimensionMismatch on inconsistent blocks.
    [[nodiscard]] std::vector<Eigen::Index> block_sizes() const;
    [[nodiscard]] Matrix evaluate(const std::vector<Matrix>& values) const;

private:
    std::size_t n_;
    std::vector<std::optional<AffineExpr>> blocks_;
};

enum class Sense { PositiveDefinite, PositiveSemidefinite, NegativeDefinite, NegativeSemidefinite };

struct LmiOptions {
    // Strict inequalities M < 0 become M <= -eps I with
    // eps = strict_margin_rel * max(1, ||F0||_F, max_i ||F_i||_F) per block.
    double strict_margin_rel = 1e-7;
    double feas_tol = 1e-6;
    SdpSettings sdp{};
};

enum class LmiStatus { Optimal, Infeasible, NumericalTrouble };

[[nodiscard]] std::string to_string(LmiStatus status);

struct ConstraintReport {
    std::string label;
    double violation = 0.0;  // >= 0; how far the closed inequality is violated
    double margin = 0.0;     // signed extreme eigenvalue in the required direction
};

struct LmiSolution {
    LmiStatus status = LmiStatus::NumericalTrouble;
    std::map<std::string, Matrix> values;
    double objective_value = 0.0;
    double max_violation = 0.0;
    std::vector<ConstraintReport> constraints;
    SdpResult solver;
    std::string message;

    [[nodiscard]] const Matrix& value(const std::string& name) const;
    [[nodiscard]] double scalar(const std::string& name) const { return value(name)(0, 0); }
    // Throws Infeasible / NumericalTrouble unless status is Optimal.
    void require_optimal() const;
};

class LmiProgram {
public:
    MatVar add_variable(const std::string& name, Eigen::Index rows, Eigen::Index cols, bool symmetric);
    MatVar add_symmetric(const std::string& name, Eigen::Index n) { return add_variable(name, n, n, true); }
    MatVar add_scalar(const std::string& name) { return add_variable(name, 1, 1, true); }

    void add_constraint(const BlockMatrix& m, Sense sense, const std::string& label = {});
    void add_constraint(const AffineExpr& m, Sense sense, const std::string& label = {});

    // Objective: minimize sum_k weight_k * scalar_k.
    void minimize(const MatVar& scalar, double weight = 1.0);

    [[nodiscard]] const std::vector<MatVar>& variables() const { return vars_; }
    [[nodiscard]] std::size_t num_scalar_unknowns() const;

    // Compiles to F0 + sum y_i F_i >= 0 form.
    [[nodiscard]] ConicProblem assemble(const LmiOptions& opts = {}) const;

    // Sparse-triplet JSON dump of the assembled problem.
    [[nodiscard]] std::string conic_json(const LmiOptions& opts = {}) const;

    [[nodiscard]] LmiSolution solve(const LmiOptions& opts = {}, SdpBackend* backend = nullptr) const;

    // Re-evaluates every constraint at the given values (indexed by variable id).
    [[nodiscard]] std::vector<ConstraintReport> check(const std::vector<Matrix>& values) const;

private:
    struct Constraint {
        BlockMatrix matrix;
        Sense sense;
        std::string label;
    };
    struct Slot {
        int var;
        Eigen::Index row;
        Eigen::Index col;
    };

    void build_slots() const;

    std::vector<MatVar> vars_;
    std::vector<Constraint> constraints_;
    std::vector<std::pair<int, double>> objective_;
    mutable std::vector<Slot> slots_;
    mutable std::vector<std::vector<int>> slot_index_;  // per var, row-major rows*cols, -1 if unused
};

}  // namespace platoon
