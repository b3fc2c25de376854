#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "egd/types.hpp"

namespace egd {

struct Constants {
  double c;
  double d;
};

/// c = −2(a − q/2)/n_eff, d = 2/(b n_eff).
Constants compute_constants(double a, double b, Eigen::Index q, double n_eff);

/// Data mapped into coordinates where the d-term of the stationarity
/// equation is the identity: B = d Σ w_i x_i x_iᵀ, y_i = B^{-1/2} x_i.
struct WhitenedProblem {
  Matrix B;
  Matrix B_half;
  Matrix B_half_inv;
  Matrix Y;  // n × q, row i is y_iᵀ
  Vector weights;
  double c = 0.0;
  double d = 0.0;
  double shape_a = 0.0;
  double scale_b = 0.0;
  double n_eff = 0.0;
  double log_det_B = 0.0;
  Matrix X;  // original samples, kept for post-hoc residuals

  Eigen::Index dim() const { return B.rows(); }
  Eigen::Index size() const { return Y.rows(); }
};

/// Throws DataError("data does not span R^q") when B is rank deficient.
WhitenedProblem whiten(const Dataset& data, double a, double b);

enum class InitKind { identity, sample_covariance, user };
enum class AlphaRule { eigen, trace };

struct FixedPointConfig {
  InitKind init = InitKind::sample_covariance;
  std::optional<Matrix> user_init;  // Σ₀ in data coordinates, for InitKind::user
  double tol = 1e-6;                // on |Δ average log-likelihood|
  int max_iter = 1000;
  AlphaRule alpha_rule = AlphaRule::eigen;
  bool residual_check = true;       // fill FitReport::final_residual

  void validate() const;
};

enum class Algorithm { concave, nonconcave, kent_tyler };
std::string to_string(Algorithm algo);

struct FitReport {
  explicit FitReport(ScatterMatrix s) : sigma_hat(std::move(s)) {}

  ScatterMatrix sigma_hat;
  Algorithm algorithm = Algorithm::concave;
  int iterations = 0;
  bool converged = false;
  bool near_singular = false;
  std::string message;
  double initial_avg_loglik = 0.0;
  double final_avg_loglik = 0.0;
  double final_residual = std::numeric_limits<double>::quiet_NaN();

  // One entry per iteration; entry p describes the update Γ_p -> Γ_{p+1}.
  std::vector<double> loglik_trace;      // average log-likelihood at Γ_{p+1}
  std::vector<double> alpha_trace;       // nonconcave only
  std::vector<int> alpha_case;           // nonconcave only, 1|2|3
  std::vector<double> lambda_max_trace;  // nonconcave only, of N_p
  std::vector<double> lambda_min_trace;  // nonconcave only, of N_p
  std::vector<double> iterate_max_eig;   // of Γ_{p+1} (Σ_{p+1} for Kent–Tyler)
  std::vector<double> iterate_min_eig;
  std::vector<double> elapsed_ms;        // wall time since fit start
};

/// Average (per unit weight) log-likelihood of Σ = B^{1/2} Γ B^{1/2}.
double whitened_avg_loglik(const WhitenedProblem& problem, const Matrix& gamma);

/// ‖M(Σ, c, d) − I‖_F with weighted sums.
double stationarity_residual(const ScatterMatrix& sigma, const Dataset& data,
                             double c, double d);

/// Positivity-preserving iteration Γ ← (I − c Σ w Γ^{-1/2} y yᵀ Γ^{-1/2} / yᵀΓ⁻¹y)⁻¹
/// for c <= 0.
FitReport fit_concave(const WhitenedProblem& problem, const FixedPointConfig& config);

/// Γ ← α Γ^{1/2} N Γ^{1/2} for c > 0, with α from select_alpha.
FitReport fit_nonconcave(const WhitenedProblem& problem, const FixedPointConfig& config);

struct AlphaChoice {
  double alpha = 1.0;
  int case_id = 1;
  double lambda_max = 0.0;  // of N' (the next N for α = 1)
  double lambda_min = 0.0;
};

/// Scale for the nonconcave step given Γ' = Γ^{1/2} N Γ^{1/2}.
///
/// eigen: α = 1 if the spectrum of N' straddles 1; otherwise 1/α is the
/// smallest (spectrum below 1) or largest (spectrum above 1) eigenvalue of
/// Γ' − c Σ w y yᵀ / (yᵀΓ'⁻¹y), which puts the extreme eigenvalue of the next
/// N exactly at 1.
/// trace: α = tr(Γ'⁻¹) / (q − c n_eff), which makes tr(N_{p+1}) = q.
AlphaChoice select_alpha(const Matrix& gamma_prime, double c, const Matrix& Y,
                         const Vector& weights, AlphaRule rule);

/// Kent–Tyler iteration Σ ← (1/n_eff) Σ w u(t) x xᵀ, u(t) = (q − 2a)/t + 2/b,
/// for a < q/2.
FitReport fit_kent_tyler(const Dataset& data, double a, double b,
                         const FixedPointConfig& config);

/// Σ = B^{1/2} Γ B^{1/2}, symmetrized.
ScatterMatrix recover_sigma(const Matrix& gamma_star, const WhitenedProblem& problem);

/// Whitens and dispatches to fit_concave / fit_nonconcave by the sign of c.
FitReport fit_scatter(const Dataset& data, double a, double b,
                      const FixedPointConfig& config);

}  // namespace egd
