#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "egd/scatter_ml.hpp"
#include "egd/types.hpp"

namespace egd {

/// K × n posterior membership probabilities; each column sums to 1.
using Responsibilities = Matrix;

struct EStepResult {
  Responsibilities resp;
  double total_loglik = 0.0;  // Σ_i w_i log Σ_k p_k p_eg(x_i; θ_k)
};

/// Responsibilities via a per-sample max-shifted log-sum-exp.
EStepResult e_step(const MixtureModel& model, const Dataset& data);

struct MStepResult {
  MixtureModel model;
  std::vector<bool> degenerate;  // component skipped this sweep
};

/// Refits every Σ_k by the weighted fixed point for its regime, holding
/// (a_k, b_k) fixed, then updates p_k. A component with effective weight
/// below q is left unchanged. A refit that lowers the component's weighted
/// log-likelihood is discarded.
MStepResult m_step_scatter(const Dataset& data, const Responsibilities& resp,
                           const MixtureModel& model, const FixedPointConfig& cfg);

/// Refits (a_k, b_k) by weighted gamma ML on υ_ki = x_iᵀ Σ_k⁻¹ x_i, holding
/// Σ_k fixed, then updates p_k.
MStepResult m_step_shape(const Dataset& data, const Responsibilities& resp,
                         const MixtureModel& model);

/// p_k = Σ_i w_i t_ki / Σ_i w_i
Vector update_mix_probs(const Dataset& data, const Responsibilities& resp);

enum class EmInit { random_assignment, kmeans_on_radii, user_model };

struct EmConfig {
  std::size_t K = 1;
  int stage1_sweeps = 1;
  int stage2_sweeps = 50;  // cap on repeated shape sweeps per round
  int outer_rounds = 100;
  FixedPointConfig scatter_fit = [] {
    FixedPointConfig c;
    c.tol = 1e-10;
    c.residual_check = false;
    return c;
  }();
  double tol = 1e-7;  // on average log-likelihood change
  std::uint64_t seed = 0;
  EmInit init = EmInit::random_assignment;
  std::optional<MixtureModel> user_model;
};

struct EmTraceEntry {
  int round = 0;
  int stage = 0;  // 0 = initial model, 1 = scatter sweep, 2 = shape sweep
  double total_loglik = 0.0;
  double avg_loglik = 0.0;
  double elapsed_ms = 0.0;
};

struct EmReport {
  explicit EmReport(MixtureModel m) : model(std::move(m)) {}

  MixtureModel model;
  std::vector<EmTraceEntry> trace;
  Responsibilities responsibilities;
  bool converged = false;
  int rounds = 0;
  std::vector<std::string> warnings;
  double final_avg_loglik = 0.0;

  std::vector<double> loglik_trace() const;
};

/// Initial mixture: hard assignment (random or 1-D k-means on log radii),
/// per-group second moment for Σ_k, a_k = q/2, b_k = 2.
MixtureModel initial_mixture(const Dataset& data, const EmConfig& cfg);

/// Block-coordinate EM: stage-1 sweeps (E-step + scatter M-step), then
/// repeated stage-2 sweeps (E-step + shape M-step) per outer round.
EmReport fit_mixture(const Dataset& data, const EmConfig& cfg);

/// Plug-in differential entropy (nats) of all entries pooled, from an
/// equal-width histogram with ⌈N^{1/3}⌉ bins, N the number of entries.
double pooled_marginal_entropy(const Matrix& values);

/// (H(X₀) + avg_loglik/(q − 1)) / log 2, H(X₀) from pooled_marginal_entropy.
double mi_rate(double avg_loglik_per_patch, const Dataset& pixels, Eigen::Index q);
double mi_rate_from_entropy(double avg_loglik_per_patch, double entropy_nats,
                            Eigen::Index q);

/// Entrywise log followed by white Gaussian noise whose variance is
/// noise_fraction times the pooled variance of the log values.
Matrix preprocess_patches(const Matrix& raw, double noise_fraction, std::uint64_t seed);

}  // namespace egd
