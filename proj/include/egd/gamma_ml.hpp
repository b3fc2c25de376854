#pragma once

#include "egd/linalg.hpp"

namespace egd {

/// Ψ(x) for x > 0: upward recurrence to x >= 10, then the asymptotic series.
double digamma(double x);

/// Ψ'(x) for x > 0, same scheme.
double trigamma(double x);

/// Positive values with nonnegative weights (υ_ki, t_ki of the shape stage).
struct WeightedSample {
  WeightedSample(Vector values, Vector weights);
  explicit WeightedSample(Vector values);

  Vector values;
  Vector weights;

  double mean() const;      // Σ t υ / Σ t
  double mean_log() const;  // Σ t log υ / Σ t
};

struct GammaFit {
  double shape_a = 0.0;
  double scale_b = 0.0;
  int iterations = 0;
  bool converged = false;
  bool used_bisection = false;
};

/// One generalized-Newton step for the weighted gamma shape:
///   1/a' = 1/a + (mean_log − log mean + log a − Ψ(a)) / (a² (1/a − Ψ'(a))).
/// Returns 1/a' (may be nonpositive, in which case the caller must fall back).
double gamma_newton_inverse_step(double a, double mean_log_minus_log_mean);

/// Weighted ML estimate of (shape, scale).
///
/// Starts at a₀ = 0.5 / (log ῡ − \overline{log υ}), iterates the Newton step
/// until |Δa|/a < tol, then b = ῡ/a. If a step leaves (0, ∞) the solver
/// switches to bisection on log a − Ψ(a) = log ῡ − \overline{log υ}.
/// Throws DataError when all positively weighted values are equal.
GammaFit fit_gamma_weighted(const WeightedSample& data, double tol = 1e-10,
                            int max_iter = 100);

}  // namespace egd
