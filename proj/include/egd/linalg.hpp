#pragma once

#include <Eigen/Dense>

namespace egd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Symmetric square root and inverse square root of an SPD matrix.
struct SpdRoots {
  Matrix half;
  Matrix inv_half;
  Vector eigenvalues;  // ascending, after clamping
};

/// (M + Mᵀ) / 2
Matrix symmetrize(const Matrix& m);

/// Eigendecomposition-based symmetric square root.
///
/// Eigenvalues below 1e-14 * lambda_max are clamped up to that floor. If the
/// clamping changes the determinant by more than 1e-8 (relative), the matrix
/// is treated as numerically singular and NumericalError is thrown.
SpdRoots spd_roots(const Matrix& m);

/// ‖a − b‖_F / ‖b‖_F
double relative_frobenius(const Matrix& a, const Matrix& b);

/// Smallest and largest eigenvalue of a symmetric matrix.
std::pair<double, double> extreme_eigenvalues(const Matrix& m);

}  // namespace egd
