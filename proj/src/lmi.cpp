#include "platoon/lmi.hpp"

#include "platoon/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <tuple>

namespace platoon {

namespace {

void require_same_shape(const AffineExpr& a, const AffineExpr& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        std::ostringstream os;
        os << what << ": shape " << a.rows() << "x" << a.cols() << " vs " << b.rows() << "x" << b.cols();
        fail(ErrorKind::DimensionMismatch, os.str());
    }
}

}  // namespace

// ---------------------------------------------------------------- AffineExpr

AffineExpr::AffineExpr(Eigen::Index rows, Eigen::Index cols) : constant_(Matrix::Zero(rows, cols)) {}

AffineExpr::AffineExpr(const Matrix& constant) : constant_(constant) {}

AffineExpr::AffineExpr(const MatVar& v) : constant_(Matrix::Zero(v.rows, v.cols)) {
    if (v.id < 0) fail(ErrorKind::InvalidArgument, "variable '" + v.name + "' is not registered");
    terms_.push_back({v.id, Matrix::Identity(v.rows, v.rows), Matrix::Identity(v.cols, v.cols), false});
}

AffineExpr AffineExpr::zero(Eigen::Index rows, Eigen::Index cols) { return AffineExpr(rows, cols); }

AffineExpr AffineExpr::scaled(const MatVar& scalar, const Matrix& k) {
    if (!scalar.is_scalar()) fail(ErrorKind::InvalidArgument, "scaled() needs a scalar variable");
    AffineExpr e(k.rows(), k.cols());
    e.terms_.push_back({scalar.id, k, Matrix(), false});
    return e;
}

AffineExpr AffineExpr::transpose() const {
    AffineExpr out(Matrix(constant_.transpose()));
    for (const auto& t : terms_) {
        if (t.right.size() == 0) {
            out.terms_.push_back({t.var, t.left.transpose(), Matrix(), false});
        } else {
            out.terms_.push_back({t.var, t.right.transpose(), t.left.transpose(), !t.transposed});
        }
    }
    return out;
}

AffineExpr& AffineExpr::operator+=(const AffineExpr& rhs) {
    if (constant_.size() == 0 && terms_.empty()) {
        *this = rhs;
        return *this;
    }
    require_same_shape(*this, rhs, "expression sum");
    constant_ += rhs.constant_;
    terms_.insert(terms_.end(), rhs.terms_.begin(), rhs.terms_.end());
    return *this;
}

AffineExpr& AffineExpr::operator-=(const AffineExpr& rhs) {
    AffineExpr neg = rhs;
    neg *= -1.0;
    return *this += neg;
}

AffineExpr& AffineExpr::operator*=(double s) {
    constant_ *= s;
    for (auto& t : terms_) t.left *= s;
    return *this;
}

AffineExpr operator*(const Matrix& m, const AffineExpr& a) {
    if (m.cols() != a.rows()) fail(ErrorKind::DimensionMismatch, "matrix * expression");
    AffineExpr out(Matrix(m * a.constant_));
    for (const auto& t : a.terms_) out.terms_.push_back({t.var, m * t.left, t.right, t.transposed});
    return out;
}

AffineExpr operator*(const AffineExpr& a, const Matrix& m) {
    if (a.cols() != m.rows()) fail(ErrorKind::DimensionMismatch, "expression * matrix");
    AffineExpr out(Matrix(a.constant_ * m));
    for (const auto& t : a.terms_) {
        if (t.right.size() == 0) {
            out.terms_.push_back({t.var, t.left * m, Matrix(), false});
        } else {
            out.terms_.push_back({t.var, t.left, t.right * m, t.transposed});
        }
    }
    return out;
}

Matrix AffineExpr::evaluate(const std::vector<Matrix>& values) const {
    Matrix out = constant_;
    for (const auto& t : terms_) {
        const Matrix& v = values.at(static_cast<std::size_t>(t.var));
        if (t.right.size() == 0) {
            out += v(0, 0) * t.left;
        } else if (t.transposed) {
            out += t.left * v.transpose() * t.right;
        } else {
            out += t.left * v * t.right;
        }
    }
    return out;
}

// --------------------------------------------------------------- BlockMatrix

BlockMatrix::BlockMatrix(std::size_t n_blocks) : n_(n_blocks), blocks_(n_blocks * n_blocks) {}

void BlockMatrix::set(std::size_t i, std::size_t j, const AffineExpr& e) {
    if (i > j || j >= n_) fail(ErrorKind::InvalidArgument, "block matrix: set() takes upper-triangle indices");
    blocks_[i * n_ + j] = e;
}

const std::optional<AffineExpr>& BlockMatrix::at(std::size_t i, std::size_t j) const {
    return blocks_[i * n_ + j];
}

std::vector<Eigen::Index> BlockMatrix::block_sizes() const {
    std::vector<Eigen::Index> sizes(n_, -1);
    auto assign = [&](std::size_t k, Eigen::Index v) {
        if (sizes[k] < 0) {
            sizes[k] = v;
        } else if (sizes[k] != v) {
            fail(ErrorKind::DimensionMismatch, "block matrix: inconsistent block sizes in row/column " +
                                                   std::to_string(k));
        }
    };
    for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t j = i; j < n_; ++j) {
            const auto& b = at(i, j);
            if (!b) continue;
            assign(i, b->rows());
            assign(j, b->cols());
        }
    }
    for (std::size_t k = 0; k < n_; ++k) {
        if (sizes[k] < 0) fail(ErrorKind::DimensionMismatch, "block matrix: size of block " + std::to_string(k) + " undetermined");
    }
    return sizes;
}

Matrix BlockMatrix::evaluate(const std::vector<Matrix>& values) const {
    const auto sizes = block_sizes();
    std::vector<Eigen::Index> off(n_ + 1, 0);
    for (std::size_t k = 0; k < n_; ++k) off[k + 1] = off[k] + sizes[k];
    Matrix out = Matrix::Zero(off[n_], off[n_]);
    for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t j = i; j < n_; ++j) {
            const auto& b = at(i, j);
            if (!b) continue;
            const Matrix v = b->evaluate(values);
            out.block(off[i], off[j], sizes[i], sizes[j]) = v;
            if (i != j) out.block(off[j], off[i], sizes[j], sizes[i]) = v.transpose();
        }
    }
    return out;
}

// ---------------------------------------------------------------- LmiProgram

std::string to_string(LmiStatus status) {
    switch (status) {
        case LmiStatus::Optimal: return "optimal";
        case LmiStatus::Infeasible: return "infeasible";
        case LmiStatus::NumericalTrouble: return "numerical_trouble";
    }
    return "unknown";
}

const Matrix& LmiSolution::value(const std::string& name) const {
    auto it = values.find(name);
    if (it == values.end()) fail(ErrorKind::InvalidArgument, "no value for variable '" + name + "'");
    return it->second;
}

void LmiSolution::require_optimal() const {
    if (status == LmiStatus::Optimal) return;
    std::ostringstream os;
    os << "LMI solve " << to_string(status) << ": " << message << " (solver: " << solver.message
       << ", iterations " << solver.iterations << ", max violation " << max_violation << ")";
    fail(status == LmiStatus::Infeasible ? ErrorKind::Infeasible : ErrorKind::NumericalTrouble, os.str());
}

MatVar LmiProgram::add_variable(const std::string& name, Eigen::Index rows, Eigen::Index cols, bool symmetric) {
    if (rows <= 0 || cols <= 0) fail(ErrorKind::InvalidArgument, "variable '" + name + "' needs positive shape");
    if (symmetric && rows != cols) fail(ErrorKind::InvalidArgument, "symmetric variable '" + name + "' must be square");
    for (const auto& v : vars_) {
        if (v.name == name) fail(ErrorKind::InvalidArgument, "duplicate variable name '" + name + "'");
    }
    MatVar v{name, rows, cols, symmetric, static_cast<int>(vars_.size())};
    vars_.push_back(v);
    slots_.clear();
    return v;
}

void LmiProgram::add_constraint(const BlockMatrix& m, Sense sense, const std::string& label) {
    (void)m.block_sizes();
    constraints_.push_back({m, sense, label.empty() ? "constraint " + std::to_string(constraints_.size()) : label});
}

void LmiProgram::add_constraint(const AffineExpr& m, Sense sense, const std::string& label) {
    BlockMatrix bm(1);
    bm.set(0, 0, m);
    add_constraint(bm, sense, label);
}

void LmiProgram::minimize(const MatVar& scalar, double weight) {
    if (!scalar.is_scalar()) fail(ErrorKind::InvalidArgument, "objective terms must be scalar variables");
    objective_.emplace_back(scalar.id, weight);
}

void LmiProgram::build_slots() const {
    if (!slots_.empty() || vars_.empty()) return;
    slot_index_.assign(vars_.size(), {});
    for (const auto& v : vars_) {
        auto& idx = slot_index_[static_cast<std::size_t>(v.id)];
        idx.assign(static_cast<std::size_t>(v.rows * v.cols), -1);
        for (Eigen::Index r = 0; r < v.rows; ++r) {
            for (Eigen::Index c = v.symmetric ? r : 0; c < v.cols; ++c) {
                const int k = static_cast<int>(slots_.size());
                slots_.push_back({v.id, r, c});
                idx[static_cast<std::size_t>(r * v.cols + c)] = k;
                if (v.symmetric) idx[static_cast<std::size_t>(c * v.cols + r)] = k;
            }
        }
    }
}

std::size_t LmiProgram::num_scalar_unknowns() const {
    build_slots();
    return slots_.size();
}

namespace {

struct Triplet {
    Eigen::Index row;
    Eigen::Index col;
    double value;
};

// Nonzero pattern of columns of L and rows of R, for sparse outer products.
struct SparseView {
    std::vector<std::vector<std::pair<Eigen::Index, double>>> lists;
};

SparseView columns_of(const Matrix& m) {
    SparseView v;
    v.lists.resize(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            if (m(r, c) != 0.0) v.lists[static_cast<std::size_t>(c)].emplace_back(r, m(r, c));
        }
    }
    return v;
}

SparseView rows_of(const Matrix& m) {
    SparseView v;
    v.lists.resize(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (m(r, c) != 0.0) v.lists[static_cast<std::size_t>(r)].emplace_back(c, m(r, c));
        }
    }
    return v;
}

}  // namespace

ConicProblem LmiProgram::assemble(const LmiOptions& opts) const {
    build_slots();
    const std::size_t nslots = slots_.size();
    ConicProblem prob;
    prob.objective.assign(nslots, 0.0);
    prob.coeffs.assign(nslots, {});
    for (const auto& [var, w] : objective_) {
        prob.objective[static_cast<std::size_t>(slot_index_[static_cast<std::size_t>(var)][0])] += w;
    }

    for (std::size_t ci = 0; ci < constraints_.size(); ++ci) {
        const Constraint& con = constraints_[ci];
        const int block_id = static_cast<int>(ci);
        const auto sizes = con.matrix.block_sizes();
        const std::size_t nb = sizes.size();
        std::vector<Eigen::Index> off(nb + 1, 0);
        for (std::size_t k = 0; k < nb; ++k) off[k + 1] = off[k] + sizes[k];
        const Eigen::Index dim = off[nb];
        prob.block_sizes.push_back(static_cast<int>(dim));

        const bool negative = con.sense == Sense::NegativeDefinite || con.sense == Sense::NegativeSemidefinite;
        const bool strict = con.sense == Sense::NegativeDefinite || con.sense == Sense::PositiveDefinite;
        const double sign = negative ? -1.0 : 1.0;

        // Per-slot contributions in this constraint, in full coordinates.
        std::vector<std::vector<Triplet>> contrib(nslots);
        Matrix constant = Matrix::Zero(dim, dim);

        for (std::size_t bi = 0; bi < nb; ++bi) {
            for (std::size_t bj = bi; bj < nb; ++bj) {
                const auto& blk = con.matrix.at(bi, bj);
                if (!blk) continue;
                const Eigen::Index r0 = off[bi];
                const Eigen::Index c0 = off[bj];
                constant.block(r0, c0, sizes[bi], sizes[bj]) += sign * blk->constant();
                for (const auto& t : blk->terms()) {
                    const MatVar& v = vars_[static_cast<std::size_t>(t.var)];
                    const auto& idx = slot_index_[static_cast<std::size_t>(t.var)];
                    if (t.right.size() == 0) {
                        const int k = idx[0];
                        for (Eigen::Index c = 0; c < t.left.cols(); ++c) {
                            for (Eigen::Index r = 0; r < t.left.rows(); ++r) {
                                const double val = t.left(r, c);
                                if (val != 0.0) contrib[static_cast<std::size_t>(k)].push_back({r0 + r, c0 + c, sign * val});
                            }
                        }
                        continue;
                    }
                    const SparseView lc = columns_of(t.left);
                    const SparseView rr = rows_of(t.right);
                    // Unit E_ab of V maps to L e_a e_b^T R; for V^T it is L e_b e_a^T R.
                    for (Eigen::Index a = 0; a < v.rows; ++a) {
                        for (Eigen::Index b = 0; b < v.cols; ++b) {
                            const int k = idx[static_cast<std::size_t>(a * v.cols + b)];
                            const Eigen::Index li = t.transposed ? b : a;
                            const Eigen::Index ri = t.transposed ? a : b;
                            const auto& lcol = lc.lists[static_cast<std::size_t>(li)];
                            const auto& rrow = rr.lists[static_cast<std::size_t>(ri)];
                            for (const auto& [r, lv] : lcol) {
                                for (const auto& [c, rv] : rrow) {
                                    contrib[static_cast<std::size_t>(k)].push_back({r0 + r, c0 + c, sign * lv * rv});
                                }
                            }
                        }
                    }
                }
            }
        }

        // Diagonal-block symmetry of the constant.
        for (std::size_t bk = 0; bk < nb; ++bk) {
            const auto blk = constant.block(off[bk], off[bk], sizes[bk], sizes[bk]);
            const double scale = std::max(1.0, blk.cwiseAbs().maxCoeff());
            if ((blk - blk.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
                fail(ErrorKind::InvalidArgument, con.label + ": diagonal block " + std::to_string(bk) +
                                                     " is not symmetric");
            }
        }
        auto in_diag_block = [&](Eigen::Index r, Eigen::Index c) {
            const auto br = std::upper_bound(off.begin(), off.end(), r) - off.begin() - 1;
            return c >= off[static_cast<std::size_t>(br)] && c < off[static_cast<std::size_t>(br) + 1];
        };

        double block_norm = 0.0;
        std::vector<std::vector<SymEntry>> entries(nslots);
        for (std::size_t k = 0; k < nslots; ++k) {
            auto& list = contrib[k];
            if (list.empty()) continue;
            std::sort(list.begin(), list.end(), [](const Triplet& x, const Triplet& y) {
                return std::tie(x.row, x.col) < std::tie(y.row, y.col);
            });
            std::vector<Triplet> merged;
            for (const auto& t : list) {
                if (!merged.empty() && merged.back().row == t.row && merged.back().col == t.col) {
                    merged.back().value += t.value;
                } else {
                    merged.push_back(t);
                }
            }
            // Lower-triangle entries only arise inside diagonal blocks and must
            // mirror an upper entry.
            std::vector<Triplet> lower;
            double fro2 = 0.0;
            double vmax = 0.0;
            for (const auto& t : merged) vmax = std::max(vmax, std::abs(t.value));
            for (const auto& t : merged) {
                if (t.row > t.col) {
                    lower.push_back({t.col, t.row, t.value});
                    continue;
                }
                if (t.value == 0.0) continue;
                entries[k].push_back({block_id, static_cast<int>(t.row), static_cast<int>(t.col), t.value});
                fro2 += (t.row == t.col ? 1.0 : 2.0) * t.value * t.value;
            }
            std::sort(lower.begin(), lower.end(), [](const Triplet& x, const Triplet& y) {
                return std::tie(x.row, x.col) < std::tie(y.row, y.col);
            });
            // Compare mirrored lower part against the strictly-upper diagonal-block part.
            std::vector<Triplet> upper_diag;
            for (const auto& t : merged) {
                if (t.row < t.col && in_diag_block(t.row, t.col)) upper_diag.push_back(t);
            }
            auto nonzero = [&](std::vector<Triplet>& v) {
                v.erase(std::remove_if(v.begin(), v.end(),
                                       [&](const Triplet& t) { return std::abs(t.value) <= 1e-14 * vmax; }),
                        v.end());
            };
            nonzero(lower);
            nonzero(upper_diag);
            bool symmetric = lower.size() == upper_diag.size();
            for (std::size_t q = 0; symmetric && q < lower.size(); ++q) {
                symmetric = lower[q].row == upper_diag[q].row && lower[q].col == upper_diag[q].col &&
                            std::abs(lower[q].value - upper_diag[q].value) <= 1e-12 * std::max(1.0, vmax);
            }
            if (!symmetric) {
                const Slot& s = slots_[k];
                fail(ErrorKind::InvalidArgument, con.label + ": not symmetric in variable '" +
                                                     vars_[static_cast<std::size_t>(s.var)].name + "'");
            }
            block_norm = std::max(block_norm, std::sqrt(fro2));
        }

        std::vector<SymEntry> f0;
        double f0_fro2 = 0.0;
        for (Eigen::Index c = 0; c < dim; ++c) {
            for (Eigen::Index r = 0; r <= c; ++r) {
                const double val = constant(r, c);
                if (val != 0.0) f0_fro2 += (r == c ? 1.0 : 2.0) * val * val;
            }
        }
        block_norm = std::max({1.0, block_norm, std::sqrt(f0_fro2)});
        const double eps = strict ? opts.strict_margin_rel * block_norm : 0.0;
        for (Eigen::Index r = 0; r < dim; ++r) constant(r, r) -= eps;
        for (Eigen::Index r = 0; r < dim; ++r) {
            for (Eigen::Index c = r; c < dim; ++c) {
                if (constant(r, c) != 0.0) {
                    prob.constant.push_back({block_id, static_cast<int>(r), static_cast<int>(c), constant(r, c)});
                }
            }
        }
        for (std::size_t k = 0; k < nslots; ++k) {
            auto& dst = prob.coeffs[k];
            dst.insert(dst.end(), entries[k].begin(), entries[k].end());
        }
    }

    for (std::size_t k = 0; k < nslots; ++k) {
        if (prob.coeffs[k].empty()) {
            const Slot& s = slots_[k];
            std::ostringstream os;
            os << "entry (" << s.row << "," << s.col << ") of variable '"
               << vars_[static_cast<std::size_t>(s.var)].name << "' appears in no constraint";
            fail(ErrorKind::InvalidArgument, os.str());
        }
    }
    return prob;
}

std::string LmiProgram::conic_json(const LmiOptions& opts) const {
    const ConicProblem p = assemble(opts);
    using nlohmann::json;
    json j;
    j["format"] = "lmi-sdp-triplet/1";
    j["form"] = "minimize c^T y subject to F0 + sum_i y_i F_i >= 0 (blockwise PSD); entries are upper-triangle [block,row,col,value]";
    j["block_sizes"] = p.block_sizes;
    j["c"] = p.objective;
    auto triplets = [](const std::vector<SymEntry>& v) {
        json arr = json::array();
        for (const auto& e : v) arr.push_back({e.block, e.row, e.col, e.value});
        return arr;
    };
    j["F0"] = triplets(p.constant);
    json fi = json::array();
    for (const auto& list : p.coeffs) fi.push_back(triplets(list));
    j["F"] = std::move(fi);
    json names = json::array();
    build_slots();
    for (const auto& s : slots_) names.push_back({vars_[static_cast<std::size_t>(s.var)].name, s.row, s.col});
    j["unknowns"] = std::move(names);
    return j.dump();
}

std::vector<ConstraintReport> LmiProgram::check(const std::vector<Matrix>& values) const {
    std::vector<ConstraintReport> out;
    out.reserve(constraints_.size());
    for (const auto& con : constraints_) {
        const Matrix m = con.matrix.evaluate(values);
        ConstraintReport rep;
        rep.label = con.label;
        const bool negative = con.sense == Sense::NegativeDefinite || con.sense == Sense::NegativeSemidefinite;
        if (negative) {
            const double lmax = max_sym_eigenvalue(m);
            rep.margin = -lmax;
        } else {
            rep.margin = min_sym_eigenvalue(m);
        }
        rep.violation = std::max(0.0, -rep.margin);
        out.push_back(rep);
    }
    return out;
}

LmiSolution LmiProgram::solve(const LmiOptions& opts, SdpBackend* backend) const {
    const ConicProblem prob = assemble(opts);
    std::unique_ptr<SdpBackend> owned;
    if (backend == nullptr) {
        owned = make_default_backend();
        backend = owned.get();
    }
    LmiSolution sol;
    sol.solver = backend->solve(prob, opts.sdp);

    std::vector<Matrix> values;
    values.reserve(vars_.size());
    for (const auto& v : vars_) values.push_back(Matrix::Zero(v.rows, v.cols));
    if (sol.solver.y.size() == static_cast<Eigen::Index>(slots_.size())) {
        for (std::size_t k = 0; k < slots_.size(); ++k) {
            const Slot& s = slots_[k];
            Matrix& m = values[static_cast<std::size_t>(s.var)];
            m(s.row, s.col) = sol.solver.y(static_cast<Eigen::Index>(k));
            if (vars_[static_cast<std::size_t>(s.var)].symmetric) m(s.col, s.row) = m(s.row, s.col);
        }
    }
    for (std::size_t i = 0; i < vars_.size(); ++i) {
        if (vars_[i].symmetric) values[i] = symmetrize(values[i]);
        sol.values[vars_[i].name] = values[i];
    }
    sol.objective_value = 0.0;
    for (const auto& [var, w] : objective_) sol.objective_value += w * values[static_cast<std::size_t>(var)](0, 0);

    sol.constraints = check(values);
    sol.max_violation = 0.0;
    for (const auto& c : sol.constraints) sol.max_violation = std::max(sol.max_violation, c.violation);

    switch (sol.solver.status) {
        case SdpStatus::Optimal:
            if (sol.max_violation <= opts.feas_tol) {
                sol.status = LmiStatus::Optimal;
                sol.message = "solved";
            } else {
                sol.status = LmiStatus::NumericalTrouble;
                std::ostringstream os;
                os << "solver reported optimal but re-verified violation is " << sol.max_violation;
                sol.message = os.str();
            }
            break;
        case SdpStatus::Infeasible:
            sol.status = LmiStatus::Infeasible;
            sol.message = "LMI system infeasible";
            break;
        case SdpStatus::Unbounded:
            sol.status = LmiStatus::NumericalTrouble;
            sol.message = "objective unbounded below";
            break;
        case SdpStatus::NumericalTrouble:
        case SdpStatus::IterationLimit:
            sol.status = LmiStatus::NumericalTrouble;
            sol.message = "solver did not converge";
            break;
    }
    return sol;
}

}  // namespace platoon
