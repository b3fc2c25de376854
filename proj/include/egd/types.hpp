#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "egd/linalg.hpp"

namespace egd {

/// Symmetric positive-definite scatter matrix with a cached Cholesky factor.
///
/// Construction rejects matrices that are asymmetric beyond 1e-12 (relative
/// Frobenius) or not positive definite. The stored matrix is exactly
/// symmetric.
class ScatterMatrix {
 public:
  explicit ScatterMatrix(const Matrix& m);

  static ScatterMatrix identity(Eigen::Index dim);

  Eigen::Index dim() const { return m_.rows(); }
  const Matrix& matrix() const { return m_; }
  const Eigen::LLT<Matrix>& cholesky() const { return llt_; }
  double log_det() const { return log_det_; }

  /// xᵀ Σ⁻¹ x via the triangular solve L z = x.
  double quad_form(const Eigen::Ref<const Vector>& x) const;

 private:
  Matrix m_;
  Eigen::LLT<Matrix> llt_;
  double log_det_ = 0.0;
};

struct EgdParams {
  EgdParams(ScatterMatrix scatter, double shape_a, double scale_b);

  ScatterMatrix scatter;
  double shape_a;
  double scale_b;

  Eigen::Index dim() const { return scatter.dim(); }
  /// a >= q/2: the log-likelihood is concave in Σ⁻¹.
  bool concave() const { return shape_a >= 0.5 * static_cast<double>(dim()); }
};

/// n samples in R^q (one per row) with nonnegative weights.
class Dataset {
 public:
  /// Rejects exact-zero rows, nonfinite entries and empty input.
  explicit Dataset(Matrix samples);
  Dataset(Matrix samples, Vector weights);

  Eigen::Index size() const { return x_.rows(); }
  Eigen::Index dim() const { return x_.cols(); }
  const Matrix& samples() const { return x_; }
  const Vector& weights() const { return w_; }
  auto sample(Eigen::Index i) const { return x_.row(i).transpose(); }
  double total_weight() const { return w_.sum(); }

  /// Same samples with replaced weights.
  Dataset with_weights(Vector weights) const;

  /// Weighted second moment (1/Σw) Σ w_i x_i x_iᵀ.
  Matrix second_moment() const;

 private:
  Matrix x_;
  Vector w_;
};

struct MixtureModel {
  MixtureModel(std::vector<EgdParams> components, Vector mix_probs);

  std::vector<EgdParams> components;
  Vector mix_probs;

  std::size_t size() const { return components.size(); }
  Eigen::Index dim() const { return components.front().dim(); }
};

}  // namespace egd
