#include "egd/linalg.hpp"

#include <cmath>

#include "egd/errors.hpp"

namespace egd {

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

SpdRoots spd_roots(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw NumericalError("spd_roots: matrix must be square and non-empty");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(m));
  if (eig.info() != Eigen::Success) {
    throw NumericalError("spd_roots: eigendecomposition failed");
  }
  Vector lambda = eig.eigenvalues();
  const double lmax = lambda.maxCoeff();
  if (!(lmax > 0.0) || !std::isfinite(lmax)) {
    throw NumericalError("spd_roots: matrix is not positive definite");
  }

  const double floor = 1e-14 * lmax;
  double log_det_change = 0.0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) < floor) {
      if (!(lambda(i) > 0.0)) {
        throw NumericalError("spd_roots: matrix is not positive definite");
      }
      log_det_change += std::log(floor) - std::log(lambda(i));
      lambda(i) = floor;
    }
  }
  if (std::expm1(log_det_change) > 1e-8) {
    throw NumericalError("spd_roots: matrix is numerically singular");
  }

  const Matrix& v = eig.eigenvectors();
  const Vector s = lambda.array().sqrt();
  SpdRoots out;
  out.half = symmetrize(v * s.asDiagonal() * v.transpose());
  out.inv_half = symmetrize(v * s.cwiseInverse().asDiagonal() * v.transpose());
  out.eigenvalues = lambda;
  return out;
}

double relative_frobenius(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / b.norm();
}

std::pair<double, double> extreme_eigenvalues(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("eigenvalue computation failed");
  }
  const Vector& l = eig.eigenvalues();
  return {l(0), l(l.size() - 1)};
}

}  // namespace egd
