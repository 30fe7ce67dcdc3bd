#include "platoon/hinf_synth.hpp"

#include "platoon/error.hpp"
#include "platoon/rng.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace platoon {

ClosedLoop close_loop(const StateSpace& plant, const Controller& k) { return close_loop(plant, plant.A, k); }

ClosedLoop close_loop(const StateSpace& plant, const Matrix& a, const Controller& k) {
    const Eigen::Index nx = a.rows();
    const Eigen::Index nk = k.order();
    if (k.B_k.cols() != plant.C.rows() || k.C_k.rows() != plant.B.cols() || k.A_k.cols() != nk ||
        k.B_k.rows() != nk || k.C_k.cols() != nk) {
        fail(ErrorKind::DimensionMismatch, "controller does not match plant dimensions");
    }
    ClosedLoop cl;
    cl.A = Matrix::Zero(nx + nk, nx + nk);
    cl.A.topLeftCorner(nx, nx) = a;
    cl.A.topRightCorner(nx, nk) = plant.B * k.C_k;
    cl.A.bottomLeftCorner(nk, nx) = k.B_k * plant.C;
    cl.A.bottomRightCorner(nk, nk) = k.A_k;
    cl.B = Matrix::Zero(nx + nk, plant.Bd.cols());
    cl.B.topRows(nx) = plant.Bd;
    cl.C = Matrix::Zero(plant.Cz.rows(), nx + nk);
    cl.C.leftCols(nx) = plant.Cz;
    cl.C.rightCols(nk) = plant.Dz * k.C_k;
    return cl;
}

Controller recover_controller(const Matrix& x, const Matrix& y, const Matrix& a_hat, const Matrix& b_hat,
                              const Matrix& c_hat, const StateSpace& plant, const Matrix& a, RecoveryInfo* info,
                              double max_condition) {
    const Eigen::Index n = x.rows();
    const Matrix target = Matrix::Identity(n, n) - y * x;
    Eigen::JacobiSVD<Matrix> svd(target, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector sv = svd.singularValues();
    const double smax = sv.size() ? sv(0) : 0.0;
    const double smin = sv.size() ? sv(sv.size() - 1) : 0.0;
    const double cond = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
    if (!(smax > 0.0) || !(cond <= max_condition)) {
        std::ostringstream os;
        os << "I - YX is singular or ill-conditioned (cond " << cond << ")";
        fail(ErrorKind::RecoveryIllConditioned, os.str());
    }
    const Vector root = sv.cwiseSqrt();
    const Vector inv_root = root.cwiseInverse();
    const Matrix nmat = svd.matrixU() * root.asDiagonal();
    const Matrix mmat = svd.matrixV() * root.asDiagonal();
    const Matrix n_inv = inv_root.asDiagonal() * svd.matrixU().transpose();
    const Matrix m_inv_t = svd.matrixV() * inv_root.asDiagonal();

    const double residual = (nmat * mmat.transpose() - target).norm();
    if (residual >= 1e-8 * target.norm()) {
        fail(ErrorKind::RecoveryIllConditioned, "factorization residual of I - YX too large");
    }

    Controller k;
    k.B_k = n_inv * b_hat;
    k.C_k = c_hat * m_inv_t;
    k.A_k = n_inv *
            (a_hat - nmat * k.B_k * plant.C * x - y * plant.B * k.C_k * mmat.transpose() - y * a * x) *
            m_inv_t;
    if (info != nullptr) {
        info->M = mmat;
        info->N = nmat;
        info->condition = cond;
        info->factor_residual = residual / target.norm();
    }
    return k;
}

Matrix certificate_from(const Matrix& x, const Matrix& y, const Matrix& m, const Matrix& n) {
    const Eigen::Index k = x.rows();
    Matrix l1 = Matrix::Zero(2 * k, 2 * k);
    l1.topLeftCorner(k, k) = x;
    l1.topRightCorner(k, k).setIdentity();
    l1.bottomLeftCorner(k, k) = m.transpose();
    Matrix l2 = Matrix::Zero(2 * k, 2 * k);
    l2.topLeftCorner(k, k).setIdentity();
    l2.topRightCorner(k, k) = y;
    l2.bottomRightCorner(k, k) = n.transpose();
    // P = L2 L1^-1  <=>  P^T = L1^-T L2^T
    const Matrix pt = l1.transpose().fullPivLu().solve(l2.transpose());
    return symmetrize(pt.transpose());
}

namespace {

struct Vars {
    MatVar x, y, ah, bh, ch, eta;
    MatVar e1, e2, e3;
};

void check_plant(const StateSpace& p) {
    const Eigen::Index nx = p.A.rows();
    if (p.A.cols() != nx || p.B.rows() != nx || p.C.cols() != nx || p.Bd.rows() != nx || p.Cz.cols() != nx ||
        p.Dz.rows() != p.Cz.rows() || p.Dz.cols() != p.B.cols()) {
        fail(ErrorKind::DimensionMismatch, "plant matrices have inconsistent dimensions");
    }
}

void check_preconditions(const StateSpace& p, const SynthesisOptions& opts) {
    if (p.C.rows() == 0) {
        fail(ErrorKind::PreconditionViolation, "no measured outputs: the plant is not detectable");
    }
    if (!opts.check_preconditions) return;
    const AnalysisReport rep = pbh_report(p.A, p.B, p.C, opts.analysis);
    const bool stab = opts.allow_marginal ? rep.stabilizable : rep.strictly_stabilizable;
    if (!stab) {
        fail(ErrorKind::PreconditionViolation,
             "(A, B) is not stabilizable" +
                 std::string(rep.uncontrollable_at_origin > 0 ? " (uncontrollable mode at the origin; reduce the ring "
                                                                "model or allow marginal synthesis)"
                                                              : ""));
    }
    if (!rep.detectable) fail(ErrorKind::PreconditionViolation, "(A, C) is not detectable");
}

// Builds the synthesis LMI with system matrix `a`; `unc` adds the robust terms.
LmiProgram build_program(const StateSpace& p, const Matrix& a, const UncertaintyModel* unc,
                         const SynthesisOptions& opts, Vars& v) {
    const Eigen::Index nx = a.rows();
    const Eigen::Index nu = p.B.cols();
    const Eigen::Index ny = p.C.rows();
    const Eigen::Index nd = p.Bd.cols();
    const Eigen::Index nz = p.Cz.rows();
    const Matrix id = Matrix::Identity(nx, nx);

    LmiProgram prog;
    v.x = prog.add_symmetric("X", nx);
    v.y = prog.add_symmetric("Y", nx);
    v.ah = prog.add_variable("Ahat", nx, nx, false);
    v.bh = prog.add_variable("Bhat", nx, ny, false);
    v.ch = prog.add_variable("Chat", nu, nx, false);
    v.eta = prog.add_scalar("eta");
    if (unc != nullptr) {
        v.e1 = prog.add_scalar("eps1");
        v.e2 = prog.add_scalar("eps2");
        v.e3 = prog.add_scalar("eps3");
    }
    const AffineExpr X(v.x);
    const AffineExpr Y(v.y);
    const AffineExpr Ah(v.ah);
    const AffineExpr Bh(v.bh);
    const AffineExpr Ch(v.ch);
    const Matrix at = a.transpose();

    BlockMatrix xy(2);
    xy.set(0, 0, X);
    xy.set(0, 1, AffineExpr(id));
    xy.set(1, 1, Y);
    prog.add_constraint(xy, Sense::PositiveDefinite, "[X I; I Y] > 0");

    const AffineExpr bch = p.B * Ch;
    const AffineExpr bhc = Bh * p.C;
    AffineExpr o11 = a * X + X * at + bch + bch.transpose();
    AffineExpr o22 = at * Y + Y * a + bhc + bhc.transpose();
    if (unc != nullptr) {
        const Matrix llt = unc->L * unc->L.transpose();
        o11 += AffineExpr::scaled(v.e1, llt) + AffineExpr::scaled(v.e2, llt);
        o22 += AffineExpr::scaled(v.e3, Matrix(unc->R.transpose() * unc->R));
    }
    const std::size_t nblocks = unc != nullptr ? 9 : 4;
    BlockMatrix bm(nblocks);
    bm.set(0, 0, o11);
    bm.set(0, 1, Ah.transpose() + AffineExpr(a));
    bm.set(0, 2, AffineExpr(p.Bd));
    bm.set(0, 3, X * Matrix(p.Cz.transpose()) + Ch.transpose() * Matrix(p.Dz.transpose()));
    bm.set(1, 1, o22);
    bm.set(1, 2, Y * p.Bd);
    bm.set(1, 3, AffineExpr(Matrix(p.Cz.transpose())));
    bm.set(2, 2, AffineExpr::scaled(v.eta, -Matrix::Identity(nd, nd)));
    bm.set(2, 3, AffineExpr(Matrix::Zero(nd, nz)));
    bm.set(3, 3, AffineExpr(Matrix(-Matrix::Identity(nz, nz))));
    if (unc != nullptr) {
        const Matrix rt = unc->R.transpose();
        const Matrix& l = unc->L;
        // Columns of Gamma12: [X R^T; 0], [0; R^T], [0; Y L], [X R^T; 0], [0; Y L].
        bm.set(0, 4, X * rt);
        bm.set(1, 5, AffineExpr(rt));
        bm.set(1, 6, Y * l);
        bm.set(0, 7, X * rt);
        bm.set(1, 8, Y * l);
        bm.set(4, 4, AffineExpr::scaled(v.e1, -Matrix::Identity(nx, nx)));
        bm.set(5, 5, AffineExpr::scaled(v.e2, -Matrix::Identity(nx, nx)));
        bm.set(6, 6, AffineExpr::scaled(v.e3, -Matrix::Identity(nx, nx)));
        bm.set(7, 7, AffineExpr(Matrix(-Matrix::Identity(nx, nx))));
        bm.set(8, 8, AffineExpr(Matrix(-Matrix::Identity(nx, nx))));
    }
    prog.add_constraint(bm, Sense::NegativeDefinite, unc != nullptr ? "robust bounded-real LMI" : "bounded-real LMI");

    if (opts.pole_radius > 0.0) {
        const double r = opts.pole_radius;
        BlockMatrix disk(4);
        disk.set(0, 0, -r * X);
        disk.set(0, 1, AffineExpr(Matrix(-r * id)));
        disk.set(1, 1, -r * Y);
        disk.set(0, 2, a * X + bch);
        disk.set(0, 3, AffineExpr(a));
        disk.set(1, 2, Ah);
        disk.set(1, 3, Y * a + bhc);
        disk.set(2, 2, -r * X);
        disk.set(2, 3, AffineExpr(Matrix(-r * id)));
        disk.set(3, 3, -r * Y);
        prog.add_constraint(disk, Sense::NegativeDefinite, "pole disk");
    }
    prog.minimize(v.eta);
    return prog;
}

SynthesisResult solve_and_recover(const StateSpace& p, const Matrix& a, const UncertaintyModel* unc,
                                  const SynthesisOptions& opts) {
    Vars v;
    const LmiProgram prog = build_program(p, a, unc, opts, v);
    const auto t0 = std::chrono::steady_clock::now();
    const LmiSolution sol = prog.solve(opts.lmi);
    const auto t1 = std::chrono::steady_clock::now();
    sol.require_optimal();

    SynthesisResult res;
    res.diagnostics.solve_seconds = std::chrono::duration<double>(t1 - t0).count();
    res.diagnostics.solver_iterations = sol.solver.iterations;
    res.diagnostics.solver_message = sol.solver.message;
    res.diagnostics.max_violation = sol.max_violation;
    res.diagnostics.decision_variables = prog.num_scalar_unknowns();
    res.eta = sol.scalar("eta");
    res.gamma = std::sqrt(std::max(res.eta, 0.0));
    res.X = sol.value("X");
    res.Y = sol.value("Y");
    if (unc != nullptr) {
        res.diagnostics.epsilons = {sol.scalar("eps1"), sol.scalar("eps2"), sol.scalar("eps3")};
    }
    RecoveryInfo info;
    res.controller = recover_controller(res.X, res.Y, sol.value("Ahat"), sol.value("Bhat"), sol.value("Chat"), p, a,
                                        &info, opts.max_recovery_condition);
    res.M = info.M;
    res.N = info.N;
    res.diagnostics.recovery_condition = info.condition;
    res.diagnostics.factor_residual = info.factor_residual;
    return res;
}

void verify_closed_loop(const StateSpace& p, const Matrix& a, SynthesisResult& res, const SynthesisOptions& opts,
                        ErrorKind kind, const std::string& what) {
    const ClosedLoop cl = close_loop(p, a, res.controller);
    const Eigen::VectorXcd ev = eigenvalues(cl.A);
    const double abscissa = ev.real().maxCoeff();
    const double radius = ev.cwiseAbs().maxCoeff();
    if (kind == ErrorKind::VerificationFailed) {
        res.diagnostics.closed_loop_abscissa = abscissa;
        res.diagnostics.closed_loop_spectral_radius = radius;
    } else {
        res.diagnostics.sample_abscissa.push_back(abscissa);
    }
    if (!(abscissa < -1e-9)) {
        std::ostringstream os;
        os << what << ": closed loop not Hurwitz (spectral abscissa " << abscissa << ")";
        fail(kind, os.str());
    }
    const double norm = hinf_norm(cl.A, cl.B, cl.C);
    if (kind == ErrorKind::VerificationFailed) {
        res.diagnostics.closed_loop_hinf = norm;
    } else {
        res.diagnostics.sample_hinf.push_back(norm);
    }
    if (norm > res.gamma * (1.0 + opts.verify_tol)) {
        std::ostringstream os;
        os << what << ": closed-loop H-infinity norm " << norm << " exceeds gamma " << res.gamma;
        fail(kind, os.str());
    }
}

}  // namespace

SynthesisResult synthesize_nominal(const StateSpace& plant, const SynthesisOptions& opts) {
    check_plant(plant);
    check_preconditions(plant, opts);
    SynthesisResult res = solve_and_recover(plant, plant.A, nullptr, opts);
    verify_closed_loop(plant, plant.A, res, opts, ErrorKind::VerificationFailed, "nominal synthesis");
    return res;
}

SynthesisResult synthesize_nominal(const ReducedPlatoon& plant, const SynthesisOptions& opts) {
    return synthesize_nominal(plant.ss, opts);
}

SynthesisResult synthesize_nominal(const LinearizedPlatoon& plant, const SynthesisOptions& opts) {
    if (plant.spec.road == RoadType::Ring && !opts.allow_marginal) {
        fail(ErrorKind::PreconditionViolation,
             "full ring model keeps an uncontrollable mode at the origin; synthesize on the reduced model or set "
             "allow_marginal");
    }
    return synthesize_nominal(plant.ss, opts);
}

UncertaintyModel build_uncertainty(const Matrix& a_min, const Matrix& a_max) {
    if (a_min.rows() != a_max.rows() || a_min.cols() != a_max.cols() || a_min.rows() != a_min.cols()) {
        fail(ErrorKind::DimensionMismatch, "uncertainty ranges must be square and of equal shape");
    }
    if ((a_max - a_min).minCoeff() < 0.0) fail(ErrorKind::InvalidArgument, "uncertainty range with a_min > a_max");
    UncertaintyModel u;
    u.a_min = a_min;
    u.a_max = a_max;
    u.A_nominal = 0.5 * (a_min + a_max);
    u.rho_varrho = 0.5 * (a_max - a_min).norm();
    if (!(u.rho_varrho > 0.0)) {
        fail(ErrorKind::EmptyUncertainty, "all uncertainty ranges are degenerate; use nominal synthesis");
    }
    u.rho = std::sqrt(u.rho_varrho);
    u.varrho = u.rho;
    const Eigen::Index n = a_min.rows();
    u.L = u.varrho * Matrix::Identity(n, n);
    u.R = u.rho * Matrix::Identity(n, n);
    return u;
}

void platoon_entry_ranges(const PlatoonSpec& spec, const ParameterRanges& ranges, double v_star, bool reduced,
                          Matrix& a_min, Matrix& a_max) {
    if (reduced && spec.road != RoadType::Ring) fail(ErrorKind::NotRing, "reduced ranges need a ring plant");
    // beta is monotone in each parameter, so the extremes sit on the corners of
    // the parameter box.
    double lo[3] = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                    std::numeric_limits<double>::infinity()};
    double hi[3] = {-lo[0], -lo[1], -lo[2]};
    for (int ia = -1; ia <= 1; ++ia) {
        for (int it = -1; it <= 1; ++it) {
            for (int is = -1; is <= 1; ++is) {
                VehicleParams q = ranges.nominal;
                q.alpha += ia * ranges.d_alpha;
                q.theta += it * ranges.d_theta;
                q.s_go += is * ranges.d_s_go;
                const Betas b = linearize(q, equilibrium_spacing(q, v_star));
                const double vals[3] = {b.beta1, b.beta2, b.beta3};
                for (int k = 0; k < 3; ++k) {
                    lo[k] = std::min(lo[k], vals[k]);
                    hi[k] = std::max(hi[k], vals[k]);
                }
            }
        }
    }
    PlatoonSpec s_lo = spec;
    PlatoonSpec s_hi = spec;
    for (auto& b : s_lo.hdv_betas) b = {lo[0], hi[1], lo[2]};  // A carries -beta2
    for (auto& b : s_hi.hdv_betas) b = {hi[0], lo[1], hi[2]};
    Equilibrium eq;
    eq.v_star = v_star;
    eq.s_star.assign(spec.n, 0.0);
    const LinearizedPlatoon p_lo = build_plant(s_lo, eq, {});
    const LinearizedPlatoon p_hi = build_plant(s_hi, eq, {});
    Matrix lo_m = p_lo.ss.A.cwiseMin(p_hi.ss.A);
    Matrix hi_m = p_lo.ss.A.cwiseMax(p_hi.ss.A);
    if (reduced) {
        const Eigen::Index r = lo_m.rows() - 1;
        lo_m = Matrix(lo_m.bottomRightCorner(r, r));
        hi_m = Matrix(hi_m.bottomRightCorner(r, r));
    }
    a_min = lo_m;
    a_max = hi_m;
}

UncertaintyModel platoon_uncertainty(const PlatoonSpec& spec, const ParameterRanges& ranges, double v_star,
                                     bool reduced) {
    Matrix a_min;
    Matrix a_max;
    platoon_entry_ranges(spec, ranges, v_star, reduced, a_min, a_max);
    return build_uncertainty(a_min, a_max);
}

Matrix sample_admissible(const UncertaintyModel& unc, std::uint64_t seed, double scale) {
    const Eigen::Index n = unc.A_nominal.rows();
    Rng rng(seed);
    Matrix g(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) g(i, j) = rng.normal();
    }
    Eigen::JacobiSVD<Matrix> svd(g);
    const Matrix f = (scale / svd.singularValues()(0)) * g;
    return unc.A_nominal + unc.L * f * unc.R;
}

SynthesisResult synthesize_robust(const StateSpace& plant, const UncertaintyModel& unc, const SynthesisOptions& opts) {
    check_plant(plant);
    if (unc.A_nominal.rows() != plant.A.rows()) {
        fail(ErrorKind::DimensionMismatch, "uncertainty model does not match plant order");
    }
    if (!(unc.rho_varrho > 0.0)) {
        fail(ErrorKind::EmptyUncertainty, "degenerate uncertainty model; use nominal synthesis");
    }
    StateSpace nominal = plant;
    nominal.A = unc.A_nominal;
    check_preconditions(nominal, opts);
    SynthesisResult res = solve_and_recover(nominal, unc.A_nominal, &unc, opts);
    verify_closed_loop(nominal, unc.A_nominal, res, opts, ErrorKind::VerificationFailed, "robust synthesis (A_N)");

    Rng seeds(opts.robust_seed);
    for (int k = 0; k < opts.robust_samples; ++k) {
        const std::uint64_t seed = seeds.next();
        const double scale = (k % 2 == 0) ? 1.0 : seeds.uniform();
        const Matrix a = sample_admissible(unc, seed, scale);
        std::ostringstream what;
        what << "robust verification sample " << k << " (seed " << seed << ", ||F|| = " << scale << ")";
        verify_closed_loop(nominal, a, res, opts, ErrorKind::RobustVerificationFailed, what.str());
    }
    return res;
}

}  // namespace platoon
