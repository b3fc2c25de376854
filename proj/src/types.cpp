#include "egd/types.hpp"

#include <cmath>
#include <string>

#include "egd/errors.hpp"

namespace egd {

ScatterMatrix::ScatterMatrix(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw DomainError("scatter matrix must be square and non-empty");
  }
  if (!m.allFinite()) {
    throw DomainError("scatter matrix has nonfinite entries");
  }
  const double scale = m.norm();
  if ((m - m.transpose()).norm() > 1e-12 * scale) {
    throw DomainError("scatter matrix is not symmetric");
  }
  m_ = symmetrize(m);
  llt_.compute(m_);
  if (llt_.info() != Eigen::Success) {
    throw DomainError("scatter matrix is not positive definite");
  }
  const auto diag = llt_.matrixLLT().diagonal();
  if ((diag.array() <= 0.0).any()) {
    throw DomainError("scatter matrix is not positive definite");
  }
  log_det_ = 2.0 * diag.array().log().sum();
}

ScatterMatrix ScatterMatrix::identity(Eigen::Index dim) {
  return ScatterMatrix(Matrix::Identity(dim, dim));
}

double ScatterMatrix::quad_form(const Eigen::Ref<const Vector>& x) const {
  const Vector z = llt_.matrixL().solve(x);
  return z.squaredNorm();
}

EgdParams::EgdParams(ScatterMatrix s, double a, double b)
    : scatter(std::move(s)), shape_a(a), scale_b(b) {
  if (!(shape_a > 0.0) || !std::isfinite(shape_a)) {
    throw DomainError("shape a must be positive");
  }
  if (!(scale_b > 0.0) || !std::isfinite(scale_b)) {
    throw DomainError("scale b must be positive");
  }
}

Dataset::Dataset(Matrix samples)
    : Dataset(samples, Vector::Ones(samples.rows())) {}

Dataset::Dataset(Matrix samples, Vector weights)
    : x_(std::move(samples)), w_(std::move(weights)) {
  if (x_.rows() == 0 || x_.cols() == 0) {
    throw DataError("dataset is empty");
  }
  if (w_.size() != x_.rows()) {
    throw DataError("weight count does not match sample count");
  }
  for (Eigen::Index i = 0; i < x_.rows(); ++i) {
    if (!x_.row(i).allFinite()) {
      throw DataError("sample " + std::to_string(i) + " has nonfinite entries");
    }
    if ((x_.row(i).array() == 0.0).all()) {
      throw DataError("sample " + std::to_string(i) + " is the zero vector");
    }
    if (!(w_(i) >= 0.0) || !std::isfinite(w_(i))) {
      throw DataError("weight " + std::to_string(i) + " is negative or nonfinite");
    }
  }
  if (!(w_.sum() > 0.0)) {
    throw DataError("weights must have a positive sum");
  }
}

Dataset Dataset::with_weights(Vector weights) const {
  return Dataset(x_, std::move(weights));
}

Matrix Dataset::second_moment() const {
  return symmetrize(x_.transpose() * w_.asDiagonal() * x_ / w_.sum());
}

MixtureModel::MixtureModel(std::vector<EgdParams> comps, Vector probs)
    : components(std::move(comps)), mix_probs(std::move(probs)) {
  if (components.empty()) {
    throw DomainError("mixture needs at least one component");
  }
  if (static_cast<std::size_t>(mix_probs.size()) != components.size()) {
    throw DomainError("mixing probability count does not match component count");
  }
  for (const auto& c : components) {
    if (c.dim() != components.front().dim()) {
      throw DomainError("mixture components differ in dimension");
    }
  }
  if ((mix_probs.array() < 0.0).any() || !mix_probs.allFinite()) {
    throw DomainError("mixing probabilities must be nonnegative");
  }
  if (std::abs(mix_probs.sum() - 1.0) > 1e-12) {
    throw DomainError("mixing probabilities must sum to 1");
  }
}

}  // namespace egd
