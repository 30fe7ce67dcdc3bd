#pragma once

// Eigenstructure checks (PBH), H-infinity norm and bounded-real-lemma
// certificates.

#include "platoon/linalg.hpp"
#include "platoon/lmi.hpp"
#include "platoon/platoon_ss.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace platoon {

struct ModeVerdict {
    Complex lambda;
    bool controllable = true;
    bool observable = true;
    double residual_ctrb = 0.0;
    double residual_obsv = 0.0;
};

struct AnalysisOptions {
    double rank_tol_rel = 1e-7;  // rank_tol = rank_tol_rel * ||A||_F
    double stab_tol = 1e-8;
    // Eigenvalues closer than cluster_tol_rel * max(1, ||A||_F) are treated as
    // one repeated eigenvalue.
    double cluster_tol_rel = 1e-6;
};

struct AnalysisReport {
    std::vector<ModeVerdict> modes;  // one entry per real eigenvalue / conjugate pair
    bool stabilizable = false;       // tolerates uncontrollable modes at the origin
    bool strictly_stabilizable = false;
    bool detectable = false;
    std::size_t uncontrollable_at_origin = 0;
    std::size_t uncontrollable_total = 0;
    std::size_t unobservable_total = 0;
    double rank_tol = 0.0;
};

[[nodiscard]] AnalysisReport pbh_report(const Matrix& a, const Matrix& b, const Matrix& c,
                                        const AnalysisOptions& opts = {});
[[nodiscard]] AnalysisReport pbh_report(const LinearizedPlatoon& plant, const AnalysisOptions& opts = {});
[[nodiscard]] AnalysisReport pbh_report(const ReducedPlatoon& plant, const AnalysisOptions& opts = {});

// Largest singular value of C (jw I - A)^-1 B.
[[nodiscard]] double sigma_max_at(const Matrix& a, const Matrix& b, const Matrix& c, double omega);

// H-infinity norm of the strictly proper system (A, B, C) by Hamiltonian
// level-set iteration. Throws NotHurwitz unless max Re(lambda) < -1e-9.
[[nodiscard]] double hinf_norm(const Matrix& a, const Matrix& b, const Matrix& c, double rel_tol = 1e-6);

struct BrlResult {
    bool feasible = false;
    Matrix P;
    double margin = 0.0;  // min(lambda_min(P), -lambda_max(BRL block))
    std::string message;
};

// BRL block [[A^T P + P A, P B, C^T], [B^T P, -g^2 I, 0], [C, 0, -I]].
[[nodiscard]] Matrix brl_block(const Matrix& a, const Matrix& b, const Matrix& c, const Matrix& p, double gamma);

// Searches for P > 0 with brl_block(P) < 0 by maximizing the common margin.
[[nodiscard]] BrlResult brl_check(const Matrix& a, const Matrix& b, const Matrix& c, double gamma,
                                  const LmiOptions& opts = {});

}  // namespace platoon
