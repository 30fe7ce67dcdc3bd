#pragma once

#include <Eigen/Dense>

#include <complex>
#include <vector>

namespace platoon {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using Complex = std::complex<double>;

// Block-diagonal concatenation; empty inputs are skipped.
Matrix block_diag(const std::vector<Matrix>& blocks);

// Eigenvalues of a general real matrix. The matrix is balanced by a diagonal
// power-of-two similarity first; if the real Schur iteration still fails, a
// complex Schur form is tried. Throws EigenFailure when both fail.
Eigen::VectorXcd eigenvalues(const Matrix& a);

// Largest real part of the spectrum.
double spectral_abscissa(const Matrix& a);

// Extreme eigenvalues of the symmetric part (m + m^T) / 2.
double max_sym_eigenvalue(const Matrix& m);
double min_sym_eigenvalue(const Matrix& m);

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

}  // namespace platoon
