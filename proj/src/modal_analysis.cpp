#include "platoon/modal_analysis.hpp"

#include "platoon/error.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace platoon {

namespace {

ComplexMatrix to_complex(const Matrix& m) { return m.cast<Complex>(); }

// Singular values (ascending) of [lambda I - A, B].
Vector pencil_singular_values(const Matrix& a, const Matrix& b, Complex lambda) {
    const Eigen::Index n = a.rows();
    ComplexMatrix pencil(n, n + b.cols());
    pencil.leftCols(n) = -to_complex(a);
    pencil.leftCols(n).diagonal().array() += lambda;
    pencil.rightCols(b.cols()) = to_complex(b);
    Eigen::JacobiSVD<ComplexMatrix> svd(pencil);
    Vector sv = svd.singularValues();
    std::sort(sv.data(), sv.data() + sv.size());
    if (sv.size() < n) {
        Vector padded = Vector::Zero(n);
        padded.tail(sv.size()) = sv;
        sv = padded;
    }
    return sv.head(n);
}

}  // namespace

AnalysisReport pbh_report(const Matrix& a, const Matrix& b, const Matrix& c, const AnalysisOptions& opts) {
    if (a.rows() != a.cols()) fail(ErrorKind::DimensionMismatch, "PBH: A must be square");
    if (b.rows() != a.rows()) fail(ErrorKind::DimensionMismatch, "PBH: B rows must match A");
    if (c.size() != 0 && c.cols() != a.rows()) fail(ErrorKind::DimensionMismatch, "PBH: C columns must match A");

    const Eigen::Index n = a.rows();
    AnalysisReport rep;
    const double a_norm = a.norm();
    rep.rank_tol = opts.rank_tol_rel * a_norm;
    const double cluster_tol = opts.cluster_tol_rel * std::max(1.0, a_norm);

    const Eigen::VectorXcd ev = eigenvalues(a);

    // Group numerically repeated eigenvalues.
    std::vector<int> cluster(static_cast<std::size_t>(n), -1);
    std::vector<std::vector<Eigen::Index>> members;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (cluster[static_cast<std::size_t>(i)] >= 0) continue;
        const int id = static_cast<int>(members.size());
        members.push_back({i});
        cluster[static_cast<std::size_t>(i)] = id;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            if (cluster[static_cast<std::size_t>(j)] < 0 && std::abs(ev(i) - ev(j)) < cluster_tol) {
                cluster[static_cast<std::size_t>(j)] = id;
                members.back().push_back(j);
            }
        }
    }

    const Matrix ct = c.size() == 0 ? Matrix::Zero(n, 0) : Matrix(c.transpose());
    const Matrix at = a.transpose();
    std::vector<ModeVerdict> all(static_cast<std::size_t>(n));
    for (const auto& group : members) {
        Complex centre(0.0, 0.0);
        for (auto i : group) centre += ev(i);
        centre /= static_cast<double>(group.size());
        if (std::abs(centre.imag()) < cluster_tol) centre = Complex(centre.real(), 0.0);
        if (std::abs(centre) < cluster_tol) centre = Complex(0.0, 0.0);
        // Rank deficiency of the pencil counts uncontrollable copies; it is
        // capped by the algebraic multiplicity of the cluster.
        const Vector sc = pencil_singular_values(a, b, centre);
        const Vector so = pencil_singular_values(at, ct, centre);
        for (std::size_t k = 0; k < group.size(); ++k) {
            ModeVerdict& mv = all[static_cast<std::size_t>(group[k])];
            mv.lambda = group.size() == 1 ? ev(group[k]) : centre;
            mv.residual_ctrb = sc(static_cast<Eigen::Index>(k));
            mv.residual_obsv = so(static_cast<Eigen::Index>(k));
            mv.controllable = mv.residual_ctrb > rep.rank_tol;
            mv.observable = mv.residual_obsv > rep.rank_tol;
        }
    }

    rep.stabilizable = true;
    rep.strictly_stabilizable = true;
    rep.detectable = true;
    for (Eigen::Index i = 0; i < n; ++i) {
        const ModeVerdict& mv = all[static_cast<std::size_t>(i)];
        const bool at_origin = std::abs(ev(i)) <= std::max(rep.rank_tol, cluster_tol);
        const bool unstable = ev(i).real() >= -opts.stab_tol;
        if (!mv.controllable) {
            ++rep.uncontrollable_total;
            if (at_origin) ++rep.uncontrollable_at_origin;
            if (unstable) {
                rep.strictly_stabilizable = false;
                if (!at_origin) rep.stabilizable = false;
            }
        }
        if (!mv.observable) {
            ++rep.unobservable_total;
            if (unstable) rep.detectable = false;
        }
        // Conjugate pairs are reported once, by their upper member.
        if (ev(i).imag() < 0.0 && mv.lambda.imag() < 0.0) continue;
        rep.modes.push_back(mv);
    }
    return rep;
}

AnalysisReport pbh_report(const LinearizedPlatoon& plant, const AnalysisOptions& opts) {
    return pbh_report(plant.ss.A, plant.ss.B, plant.ss.C, opts);
}

AnalysisReport pbh_report(const ReducedPlatoon& plant, const AnalysisOptions& opts) {
    return pbh_report(plant.ss.A, plant.ss.B, plant.ss.C, opts);
}

double sigma_max_at(const Matrix& a, const Matrix& b, const Matrix& c, double omega) {
    const Eigen::Index n = a.rows();
    ComplexMatrix m = -to_complex(a);
    m.diagonal().array() += Complex(0.0, omega);
    const ComplexMatrix g = to_complex(c) * Eigen::PartialPivLU<ComplexMatrix>(m).solve(to_complex(b));
    (void)n;
    if (g.size() == 0) return 0.0;
    Eigen::JacobiSVD<ComplexMatrix> svd(g);
    return svd.singularValues()(0);
}

double hinf_norm(const Matrix& a, const Matrix& b, const Matrix& c, double rel_tol) {
    if (a.rows() != a.cols() || b.rows() != a.rows() || c.cols() != a.rows()) {
        fail(ErrorKind::DimensionMismatch, "hinf_norm: inconsistent dimensions");
    }
    const Eigen::VectorXcd poles = eigenvalues(a);
    if (poles.size() > 0 && poles.real().maxCoeff() >= -1e-9) {
        fail(ErrorKind::NotHurwitz, "hinf_norm: A is not Hurwitz (abscissa " +
                                        std::to_string(poles.real().maxCoeff()) + ")");
    }
    if (b.cols() == 0 || c.rows() == 0 || a.rows() == 0) return 0.0;

    // Initial lower bound from DC and the pole frequencies.
    double lb = sigma_max_at(a, b, c, 0.0);
    for (Eigen::Index i = 0; i < poles.size(); ++i) {
        const double w = std::abs(poles(i).imag());
        if (w > 0.0) lb = std::max(lb, sigma_max_at(a, b, c, w));
        lb = std::max(lb, sigma_max_at(a, b, c, std::abs(poles(i))));
    }
    if (lb == 0.0) return 0.0;

    const Eigen::Index n = a.rows();
    const Matrix bbt = b * b.transpose();
    const Matrix ctc = c.transpose() * c;
    const double tol = 0.5 * rel_tol;
    for (int iter = 0; iter < 200; ++iter) {
        const double g = (1.0 + 2.0 * tol) * lb;
        Matrix h(2 * n, 2 * n);
        h << a, bbt / g, -ctc / g, -a.transpose();
        const Eigen::VectorXcd hev = eigenvalues(h);
        const double h_norm = h.norm();
        std::vector<double> omegas;
        for (Eigen::Index i = 0; i < hev.size(); ++i) {
            const Complex z = hev(i);
            if (std::abs(z.real()) <= 1e-8 * std::max(1.0, h_norm) && z.imag() >= 0.0) omegas.push_back(z.imag());
        }
        if (omegas.empty()) return g;
        std::sort(omegas.begin(), omegas.end());
        double best = lb;
        if (omegas.size() == 1) {
            best = std::max(best, sigma_max_at(a, b, c, omegas[0]));
        }
        for (std::size_t k = 0; k + 1 < omegas.size(); ++k) {
            best = std::max(best, sigma_max_at(a, b, c, 0.5 * (omegas[k] + omegas[k + 1])));
        }
        for (double w : omegas) best = std::max(best, sigma_max_at(a, b, c, w));
        if (best <= lb * (1.0 + tol)) return g;
        lb = best;
    }
    fail(ErrorKind::NumericalTrouble, "hinf_norm: level-set iteration did not converge");
}

Matrix brl_block(const Matrix& a, const Matrix& b, const Matrix& c, const Matrix& p, double gamma) {
    const Eigen::Index n = a.rows();
    const Eigen::Index nd = b.cols();
    const Eigen::Index nz = c.rows();
    Matrix m = Matrix::Zero(n + nd + nz, n + nd + nz);
    m.topLeftCorner(n, n) = a.transpose() * p + p * a;
    m.block(0, n, n, nd) = p * b;
    m.block(n, 0, nd, n) = b.transpose() * p;
    m.block(0, n + nd, n, nz) = c.transpose();
    m.block(n + nd, 0, nz, n) = c;
    m.block(n, n, nd, nd) = -gamma * gamma * Matrix::Identity(nd, nd);
    m.block(n + nd, n + nd, nz, nz) = -Matrix::Identity(nz, nz);
    return m;
}

BrlResult brl_check(const Matrix& a, const Matrix& b, const Matrix& c, double gamma, const LmiOptions& opts) {
    if (!(gamma > 0.0)) fail(ErrorKind::InvalidArgument, "brl_check: gamma must be positive");
    const Eigen::Index n = a.rows();
    const Eigen::Index nd = b.cols();
    const Eigen::Index nz = c.rows();
    LmiProgram prog;
    auto p = prog.add_symmetric("P", n);
    auto t = prog.add_scalar("t");
    // maximize t s.t. P >= t I, BRL(P) <= -t I. Bounded because the constant
    // diagonal blocks of BRL are negative.
    prog.add_constraint(AffineExpr(p) - AffineExpr::scaled(t, Matrix::Identity(n, n)), Sense::PositiveSemidefinite, "P - tI");
    BlockMatrix m(3);
    m.set(0, 0, a.transpose() * AffineExpr(p) + AffineExpr(p) * a + AffineExpr::scaled(t, Matrix::Identity(n, n)));
    m.set(0, 1, AffineExpr(p) * b);
    m.set(0, 2, AffineExpr(Matrix(c.transpose())));
    m.set(1, 1, AffineExpr(Matrix(-gamma * gamma * Matrix::Identity(nd, nd))) + AffineExpr::scaled(t, Matrix::Identity(nd, nd)));
    m.set(1, 2, AffineExpr(Matrix::Zero(nd, nz)));
    m.set(2, 2, AffineExpr(Matrix(-Matrix::Identity(nz, nz))) + AffineExpr::scaled(t, Matrix::Identity(nz, nz)));
    prog.add_constraint(m, Sense::NegativeSemidefinite, "BRL + tI");
    prog.minimize(t, -1.0);

    BrlResult res;
    const LmiSolution sol = prog.solve(opts);
    if (sol.status == LmiStatus::NumericalTrouble && sol.solver.status != SdpStatus::Optimal) {
        fail(ErrorKind::SolverFailure, "brl_check: " + sol.message + " (" + sol.solver.message + ")");
    }
    if (sol.solver.status == SdpStatus::Infeasible) {
        res.message = "no certificate";
        return res;
    }
    res.P = sol.value("P");
    // Independent margin at the returned P.
    res.margin = std::min(min_sym_eigenvalue(res.P), -max_sym_eigenvalue(brl_block(a, b, c, res.P, gamma)));
    res.feasible = res.margin > 0.0;
    res.message = res.feasible ? "certificate found" : "optimal margin not positive";
    return res;
}

}  // namespace platoon
