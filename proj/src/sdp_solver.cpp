#include "platoon/sdp_solver.hpp"

#include "platoon/error.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

namespace platoon {

std::string to_string(SdpStatus status) {
    switch (status) {
        case SdpStatus::Optimal: return "optimal";
        case SdpStatus::Infeasible: return "infeasible";
        case SdpStatus::Unbounded: return "unbounded";
        case SdpStatus::NumericalTrouble: return "numerical_trouble";
        case SdpStatus::IterationLimit: return "iteration_limit";
    }
    return "unknown";
}

void ConicProblem::validate() const {
    if (coeffs.size() != objective.size()) {
        fail(ErrorKind::InvalidArgument, "conic problem: objective and coefficient counts differ");
    }
    auto check = [&](const SymEntry& e) {
        if (e.block < 0 || e.block >= static_cast<int>(block_sizes.size())) {
            fail(ErrorKind::InvalidArgument, "conic problem: block index out of range");
        }
        const int nb = block_sizes[static_cast<std::size_t>(e.block)];
        if (e.row < 0 || e.col < 0 || e.row >= nb || e.col >= nb || e.row > e.col) {
            fail(ErrorKind::InvalidArgument, "conic problem: entry outside block upper triangle");
        }
    };
    for (const auto& e : constant) check(e);
    for (const auto& list : coeffs) {
        for (const auto& e : list) check(e);
    }
}

std::vector<Matrix> evaluate_blocks(const ConicProblem& problem, const Vector& y) {
    std::vector<Matrix> out;
    out.reserve(problem.block_sizes.size());
    for (int nb : problem.block_sizes) out.push_back(Matrix::Zero(nb, nb));
    auto add = [&](const SymEntry& e, double scale) {
        Matrix& m = out[static_cast<std::size_t>(e.block)];
        m(e.row, e.col) += scale * e.value;
        if (e.row != e.col) m(e.col, e.row) += scale * e.value;
    };
    for (const auto& e : problem.constant) add(e, 1.0);
    for (std::size_t i = 0; i < problem.coeffs.size(); ++i) {
        if (y(static_cast<Eigen::Index>(i)) == 0.0) continue;
        for (const auto& e : problem.coeffs[i]) add(e, y(static_cast<Eigen::Index>(i)));
    }
    return out;
}

std::unique_ptr<SdpBackend> make_default_backend() { return std::make_unique<InteriorPointBackend>(); }

namespace {

// Internally the problem is held in the standard primal-dual pair
//   (P) min <C,X>  s.t. <A_i,X> = b_i, X >= 0
//   (D) max b^T y  s.t. S = C - sum y_i A_i >= 0
// with C = F0, A_i = -F_i, b = -c, so that S = F(y).

struct Entry {
    int row;
    int col;
    double value;
};

struct VarBlock {
    int var;
    std::vector<Entry> entries;   // upper triangle
    std::vector<int> rows;        // distinct rows touched by the full (symmetric) pattern
    std::vector<Entry> full;      // both triangles
};

using Blocks = std::vector<Matrix>;

constexpr int kRefineSteps = 3;

class Ipm {
public:
    Ipm(const ConicProblem& p, const SdpSettings& s) : prob_(p), set_(s) {
        m_ = static_cast<Eigen::Index>(p.num_vars());
        nblocks_ = p.block_sizes.size();
        per_block_.resize(nblocks_);
        b_ = Vector::Zero(m_);
        for (Eigen::Index i = 0; i < m_; ++i) b_(i) = -p.objective[static_cast<std::size_t>(i)];

        for (std::size_t i = 0; i < p.coeffs.size(); ++i) {
            std::vector<std::vector<Entry>> by_block(nblocks_);
            for (const auto& e : p.coeffs[i]) {
                if (e.value == 0.0) continue;
                by_block[static_cast<std::size_t>(e.block)].push_back({e.row, e.col, -e.value});
            }
            for (std::size_t b = 0; b < nblocks_; ++b) {
                if (by_block[b].empty()) continue;
                VarBlock vb;
                vb.var = static_cast<int>(i);
                vb.entries = std::move(by_block[b]);
                for (const auto& e : vb.entries) {
                    vb.full.push_back(e);
                    if (e.row != e.col) vb.full.push_back({e.col, e.row, e.value});
                }
                for (const auto& e : vb.full) vb.rows.push_back(e.row);
                std::sort(vb.rows.begin(), vb.rows.end());
                vb.rows.erase(std::unique(vb.rows.begin(), vb.rows.end()), vb.rows.end());
                per_block_[b].push_back(std::move(vb));
            }
        }
        c_.resize(nblocks_);
        for (std::size_t b = 0; b < nblocks_; ++b) {
            c_[b] = Matrix::Zero(p.block_sizes[b], p.block_sizes[b]);
        }
        for (const auto& e : p.constant) {
            Matrix& cb = c_[static_cast<std::size_t>(e.block)];
            cb(e.row, e.col) += e.value;
            if (e.row != e.col) cb(e.col, e.row) += e.value;
        }
        total_dim_ = 0;
        for (int nb : p.block_sizes) total_dim_ += nb;
    }

    SdpResult run();

private:
    // <A_i, Z> for every i; Z need not be symmetric.
    Vector apply_a(const Blocks& z) const {
        Vector out = Vector::Zero(m_);
        for (std::size_t b = 0; b < nblocks_; ++b) {
            const Matrix& zb = z[b];
            for (const auto& vb : per_block_[b]) {
                double acc = 0.0;
                for (const auto& e : vb.entries) {
                    acc += e.row == e.col ? e.value * zb(e.row, e.row)
                                          : e.value * (zb(e.row, e.col) + zb(e.col, e.row));
                }
                out(vb.var) += acc;
            }
        }
        return out;
    }

    // sum_i y_i A_i
    Blocks apply_at(const Vector& y) const {
        Blocks out(nblocks_);
        for (std::size_t b = 0; b < nblocks_; ++b) {
            out[b] = Matrix::Zero(c_[b].rows(), c_[b].cols());
            for (const auto& vb : per_block_[b]) {
                const double yi = y(vb.var);
                if (yi == 0.0) continue;
                for (const auto& e : vb.full) out[b](e.row, e.col) += yi * e.value;
            }
        }
        return out;
    }

    void form_schur(const Blocks& x, const Blocks& sinv, Matrix& schur) const {
        schur.setZero(m_, m_);
        Matrix w;
        Matrix k;
        std::vector<int> pos;
        for (std::size_t b = 0; b < nblocks_; ++b) {
            const auto& vars = per_block_[b];
            const Matrix& xb = x[b];
            const Matrix& sb = sinv[b];
            const Eigen::Index nb = xb.rows();
            pos.assign(static_cast<std::size_t>(nb), -1);
            for (std::size_t ii = 0; ii < vars.size(); ++ii) {
                const VarBlock& vi = vars[ii];
                const auto np = static_cast<Eigen::Index>(vi.rows.size());
                for (Eigen::Index r = 0; r < np; ++r) pos[static_cast<std::size_t>(vi.rows[static_cast<std::size_t>(r)])] = static_cast<int>(r);
                // W = A_i[P,:] X, K = S^-1[:,P] W = S^-1 A_i X
                w.setZero(np, nb);
                for (const auto& e : vi.full) w.row(pos[static_cast<std::size_t>(e.row)]) += e.value * xb.row(e.col);
                Matrix sp(nb, np);
                for (Eigen::Index r = 0; r < np; ++r) sp.col(r) = sb.col(vi.rows[static_cast<std::size_t>(r)]);
                k.noalias() = sp * w;
                for (std::size_t jj = ii; jj < vars.size(); ++jj) {
                    const VarBlock& vj = vars[jj];
                    double acc = 0.0;
                    for (const auto& e : vj.entries) {
                        acc += e.row == e.col ? e.value * k(e.row, e.row)
                                              : e.value * (k(e.col, e.row) + k(e.row, e.col));
                    }
                    schur(vi.var, vj.var) += acc;
                }
                for (Eigen::Index r = 0; r < np; ++r) pos[static_cast<std::size_t>(vi.rows[static_cast<std::size_t>(r)])] = -1;
            }
        }
        // Variables may appear in several blocks in different orders; fold to
        // a symmetric matrix.
        for (Eigen::Index i = 0; i < m_; ++i) {
            for (Eigen::Index j = i + 1; j < m_; ++j) {
                const double v = schur(i, j) + schur(j, i);
                schur(i, j) = v;
                schur(j, i) = v;
            }
        }
    }

    // Largest alpha in (0, inf] such that Z + alpha dZ stays PSD, given L = chol(Z).
    static double max_step(const Eigen::LLT<Matrix>& chol, const Matrix& dz) {
        Matrix t = chol.matrixL().solve(dz);
        t = chol.matrixL().solve(t.transpose()).transpose();
        Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(t), Eigen::EigenvaluesOnly);
        const double lmin = es.eigenvalues().minCoeff();
        return lmin >= 0.0 ? std::numeric_limits<double>::infinity() : -1.0 / lmin;
    }

    static double inner(const Blocks& a, const Blocks& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i].cwiseProduct(b[i]).sum();
        return s;
    }

    static double fro(const Blocks& a) {
        double s = 0.0;
        for (const auto& m : a) s += m.squaredNorm();
        return std::sqrt(s);
    }

    const ConicProblem& prob_;
    SdpSettings set_;
    Eigen::Index m_ = 0;
    std::size_t nblocks_ = 0;
    Eigen::Index total_dim_ = 0;
    std::vector<std::vector<VarBlock>> per_block_;
    Blocks c_;
    Vector b_;
};

SdpResult Ipm::run() {
    SdpResult res;
    res.y = Vector::Zero(m_);
    if (total_dim_ == 0) {
        res.status = SdpStatus::Optimal;
        res.message = "empty problem";
        return res;
    }

    // Initial point scaled to the data.
    std::vector<double> a_norm(static_cast<std::size_t>(m_), 0.0);
    for (std::size_t b = 0; b < nblocks_; ++b) {
        for (const auto& vb : per_block_[b]) {
            double s = 0.0;
            for (const auto& e : vb.full) s += e.value * e.value;
            a_norm[static_cast<std::size_t>(vb.var)] += s;
        }
    }
    double max_a = 0.0;
    double alpha0 = 0.0;
    for (Eigen::Index i = 0; i < m_; ++i) {
        const double an = std::sqrt(a_norm[static_cast<std::size_t>(i)]);
        max_a = std::max(max_a, an);
        alpha0 = std::max(alpha0, (1.0 + std::abs(b_(i))) / (1.0 + an));
    }
    const double c_norm = fro(c_);
    const double b_norm = b_.norm();
    const double dim = static_cast<double>(total_dim_);
    const double x0 = 10.0 * dim * alpha0;
    const double s0 = 10.0 * (1.0 + std::max(max_a, c_norm)) / std::sqrt(dim);

    Blocks x(nblocks_);
    Blocks s(nblocks_);
    for (std::size_t b = 0; b < nblocks_; ++b) {
        const auto nb = c_[b].rows();
        x[b] = x0 * Matrix::Identity(nb, nb);
        s[b] = s0 * Matrix::Identity(nb, nb);
    }
    Vector y = Vector::Zero(m_);

    Matrix schur;
    Blocks sinv(nblocks_);
    std::vector<Eigen::LLT<Matrix>> chol_x(nblocks_);
    std::vector<Eigen::LLT<Matrix>> chol_s(nblocks_);

    struct Best {
        double score = std::numeric_limits<double>::infinity();
        Vector y;
        double pobj = 0, dobj = 0, gap = 0, pinf = 0, dinf = 0;
    } best;

    int stall = 0;
    int last_improvement = 0;
    double prev_mu = std::numeric_limits<double>::infinity();

    for (int it = 0; it < set_.max_iterations; ++it) {
        res.iterations = it;
        for (std::size_t b = 0; b < nblocks_; ++b) {
            chol_s[b].compute(s[b]);
            chol_x[b].compute(x[b]);
            if (chol_s[b].info() != Eigen::Success || chol_x[b].info() != Eigen::Success) {
                res.status = SdpStatus::NumericalTrouble;
                res.message = "iterate lost positive definiteness";
                goto finish;
            }
            sinv[b] = chol_s[b].solve(Matrix::Identity(s[b].rows(), s[b].cols()));
            sinv[b] = symmetrize(sinv[b]);
        }
        {
            const Blocks aty = apply_at(y);
            Blocks rd(nblocks_);
            for (std::size_t b = 0; b < nblocks_; ++b) rd[b] = c_[b] - aty[b] - s[b];
            const Vector ax = apply_a(x);
            const Vector rp = b_ - ax;
            const double mu = inner(x, s) / dim;
            const double cx = inner(c_, x);
            const double by = b_.dot(y);

            const double gap = std::abs(cx - by) / (1.0 + std::abs(cx) + std::abs(by));
            const double pinf = rp.norm() / (1.0 + b_norm);
            const double dinf = fro(rd) / (1.0 + c_norm);
            if (set_.verbose) {
                std::fprintf(stderr, "ipm %3d  pobj % .8e  dobj % .8e  gap %.2e  pinf %.2e  dinf %.2e  mu %.2e\n",
                             it, -by, -cx, gap, pinf, dinf, mu);
            }
            const double score = std::max({gap, pinf, dinf});
            if (dinf < 1e3 * set_.feas_tol && score < best.score) {
                if (score < 0.5 * best.score) last_improvement = it;
                best = {score, y, -by, -cx, gap, pinf, dinf};
            }
            if (best.y.size() == m_ && best.gap < set_.relaxed_gap_tol && best.pinf < set_.relaxed_feas_tol &&
                it - last_improvement >= 6) {
                res.status = SdpStatus::NumericalTrouble;
                res.message = "progress stalled";
                goto finish;
            }
            if (gap < set_.gap_tol && pinf < set_.feas_tol && dinf < set_.feas_tol) {
                res.status = SdpStatus::Optimal;
                res.message = "converged";
                goto finish;
            }
            // Certificates of infeasibility of the LMI side (primal ray) or of
            // unboundedness (dual ray).
            if (cx < 0.0 && ax.norm() / -cx < set_.certificate_tol) {
                res.status = SdpStatus::Infeasible;
                res.message = "found certificate X >= 0 with A(X) ~ 0 and <F0,X> < 0";
                res.y = y;
                res.iterations = it;
                return res;
            }
            if (by > 0.0) {
                double ray = 0.0;
                for (std::size_t b = 0; b < nblocks_; ++b) ray += (aty[b] + s[b]).squaredNorm();
                if (std::sqrt(ray) / by < set_.certificate_tol) {
                    res.status = SdpStatus::Unbounded;
                    res.message = "LMI objective unbounded below";
                    res.y = y;
                    res.iterations = it;
                    return res;
                }
            }

            form_schur(x, sinv, schur);
            Eigen::LLT<Eigen::Ref<Matrix>> llt(schur);
            if (llt.info() != Eigen::Success) {
                form_schur(x, sinv, schur);
                const double shift = 1e-13 * std::max(1.0, schur.diagonal().cwiseAbs().maxCoeff());
                schur.diagonal().array() += shift;
                llt.compute(schur);
                if (llt.info() != Eigen::Success) {
                    res.status = SdpStatus::NumericalTrouble;
                    res.message = "Schur complement not positive definite";
                    goto finish;
                }
            }

            // X R_d S^-1 term shared by predictor and corrector.
            Blocks xrs(nblocks_);
            for (std::size_t b = 0; b < nblocks_; ++b) xrs[b] = x[b] * rd[b] * sinv[b];
            const Vector a_xrs = apply_a(xrs);

            // Search direction for complementarity target W. The Schur system
            // is refined against the exact operator A(dX(dy)) = r_p, which the
            // factorized matrix only approximates when it is ill-conditioned.
            auto direction = [&](const Blocks& w, Vector& dy, Blocks& dx, Blocks& ds) {
                dy = llt.solve(b_ - apply_a(w) + a_xrs);
                ds.resize(nblocks_);
                dx.resize(nblocks_);
                const double rp_norm = std::max(rp.norm(), 1e-300);
                for (int refine = 0;; ++refine) {
                    const Blocks atdy = apply_at(dy);
                    for (std::size_t b = 0; b < nblocks_; ++b) {
                        ds[b] = rd[b] - atdy[b];
                        dx[b] = symmetrize(w[b] - x[b] - x[b] * ds[b] * sinv[b]);
                    }
                    if (refine == kRefineSteps) break;
                    const Vector err = rp - apply_a(dx);
                    if (err.norm() <= 1e-12 * (1.0 + b_norm) || err.norm() <= 1e-6 * rp_norm) break;
                    dy += llt.solve(err);
                }
            };
            auto steps = [&](const Blocks& dx, const Blocks& ds, double& ap, double& ad) {
                ap = std::numeric_limits<double>::infinity();
                ad = std::numeric_limits<double>::infinity();
                for (std::size_t b = 0; b < nblocks_; ++b) {
                    ap = std::min(ap, max_step(chol_x[b], dx[b]));
                    ad = std::min(ad, max_step(chol_s[b], ds[b]));
                }
            };

            // Predictor.
            Blocks zero(nblocks_);
            for (std::size_t b = 0; b < nblocks_; ++b) zero[b] = Matrix::Zero(x[b].rows(), x[b].cols());
            Vector dy_a;
            Blocks dx_a;
            Blocks ds_a;
            direction(zero, dy_a, dx_a, ds_a);
            double ap = 0;
            double ad = 0;
            steps(dx_a, ds_a, ap, ad);
            ap = std::min(1.0, ap);
            ad = std::min(1.0, ad);
            double mu_aff = 0.0;
            for (std::size_t b = 0; b < nblocks_; ++b) {
                mu_aff += (x[b] + ap * dx_a[b]).cwiseProduct(s[b] + ad * ds_a[b]).sum();
            }
            mu_aff /= dim;
            const double sigma = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, 3.0), 0.0, 1.0);

            // Corrector.
            Blocks w(nblocks_);
            for (std::size_t b = 0; b < nblocks_; ++b) {
                w[b] = sigma * mu * sinv[b] - dx_a[b] * ds_a[b] * sinv[b];
            }
            Vector dy;
            Blocks dx;
            Blocks ds;
            direction(w, dy, dx, ds);
            steps(dx, ds, ap, ad);
            const double tau = set_.step_fraction;
            ap = std::min(1.0, tau * ap);
            ad = std::min(1.0, tau * ad);

            for (std::size_t b = 0; b < nblocks_; ++b) {
                x[b] = symmetrize(x[b] + ap * dx[b]);
                s[b] = symmetrize(s[b] + ad * ds[b]);
            }
            y += ad * dy;
            if (set_.verbose) std::fprintf(stderr, "      ap %.3e ad %.3e sigma %.2e |X| %.2e |S| %.2e |y| %.2e\n", ap, ad, sigma, fro(x), fro(s), y.norm());

            if (ap < 1e-8 && ad < 1e-8) {
                if (++stall >= 3) {
                    res.status = SdpStatus::NumericalTrouble;
                    res.message = "step lengths collapsed";
                    goto finish;
                }
            } else if (mu > 0.9 * prev_mu && std::min(ap, ad) < 1e-3) {
                ++stall;
                if (stall >= 8) {
                    res.status = SdpStatus::NumericalTrouble;
                    res.message = "no progress";
                    goto finish;
                }
            } else {
                stall = 0;
            }
            prev_mu = mu;
        }
        if (it + 1 == set_.max_iterations) {
            res.status = SdpStatus::IterationLimit;
            res.message = "iteration limit reached";
        }
    }

finish:
    if (res.status == SdpStatus::Optimal) {
        res.y = y;
    } else if (best.y.size() == m_) {
        res.y = best.y;
    } else {
        res.y = y;
    }
    {
        // Final diagnostics at the returned point.
        const Blocks aty = apply_at(res.y);
        double rd2 = 0.0;
        for (std::size_t b = 0; b < nblocks_; ++b) rd2 += (c_[b] - aty[b] - s[b]).squaredNorm();
        res.primal_objective = -b_.dot(res.y);
        if (res.status == SdpStatus::Optimal) {
            res.dual_objective = -inner(c_, x);
            res.relative_gap = std::abs(res.primal_objective - res.dual_objective) /
                               (1.0 + std::abs(res.primal_objective) + std::abs(res.dual_objective));
            res.primal_infeasibility = std::sqrt(rd2) / (1.0 + c_norm);
            res.dual_infeasibility = (b_ - apply_a(x)).norm() / (1.0 + b_norm);
        } else if (best.y.size() == m_) {
            res.dual_objective = best.dobj;
            res.relative_gap = best.gap;
            res.primal_infeasibility = best.dinf;
            res.dual_infeasibility = best.pinf;
            // A stalled run whose best iterate already meets relaxed
            // tolerances is reported as optimal; the caller re-verifies.
            if (best.gap < set_.relaxed_gap_tol && best.pinf < set_.relaxed_feas_tol &&
                best.dinf < set_.feas_tol) {
                res.status = SdpStatus::Optimal;
                res.message += " (returned best iterate at reduced accuracy)";
            }
        }
    }
    return res;
}

}  // namespace

SdpResult InteriorPointBackend::solve(const ConicProblem& problem, const SdpSettings& settings) {
    problem.validate();
    Ipm ipm(problem, settings);
    return ipm.run();
}

}  // namespace platoon
