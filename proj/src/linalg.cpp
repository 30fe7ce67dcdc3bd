#include "platoon/linalg.hpp"

#include "platoon/error.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

namespace platoon {

Matrix block_diag(const std::vector<Matrix>& blocks) {
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    for (const auto& b : blocks) {
        rows += b.rows();
        cols += b.cols();
    }
    Matrix out = Matrix::Zero(rows, cols);
    Eigen::Index r = 0;
    Eigen::Index c = 0;
    for (const auto& b : blocks) {
        out.block(r, c, b.rows(), b.cols()) = b;
        r += b.rows();
        c += b.cols();
    }
    return out;
}

namespace {

// Row/column norm equalization with power-of-two factors.
Matrix balanced(const Matrix& a) {
    Matrix m = a;
    const Eigen::Index n = m.rows();
    bool changed = true;
    for (int sweep = 0; changed && sweep < 100; ++sweep) {
        changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double c = m.col(i).cwiseAbs().sum() - std::abs(m(i, i));
            const double r = m.row(i).cwiseAbs().sum() - std::abs(m(i, i));
            if (c == 0.0 || r == 0.0) continue;
            double f = 1.0;
            double cc = c;
            double rr = r;
            while (cc < rr / 2.0) {
                cc *= 2.0;
                rr /= 2.0;
                f *= 2.0;
            }
            while (cc >= rr * 2.0) {
                cc /= 2.0;
                rr *= 2.0;
                f /= 2.0;
            }
            if ((cc + rr) < 0.95 * (c + r)) {
                changed = true;
                m.row(i) /= f;
                m.col(i) *= f;
            }
        }
    }
    return m;
}

}  // namespace

Eigen::VectorXcd eigenvalues(const Matrix& a) {
    if (a.size() == 0) return {};
    const Matrix b = balanced(a);
    Eigen::EigenSolver<Matrix> es(b, false);
    if (es.info() == Eigen::Success) return es.eigenvalues();
    Eigen::ComplexEigenSolver<ComplexMatrix> ces(b.cast<Complex>(), false);
    if (ces.info() == Eigen::Success) return ces.eigenvalues();
    fail(ErrorKind::EigenFailure, "eigenvalue iteration did not converge");
}

double spectral_abscissa(const Matrix& a) {
    if (a.size() == 0) return -std::numeric_limits<double>::infinity();
    return eigenvalues(a).real().maxCoeff();
}

double max_sym_eigenvalue(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

double min_sym_eigenvalue(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

}  // namespace platoon
