#pragma once

#include <cstdint>
#include <vector>

#include "egd/types.hpp"

namespace egd {

/// log p_eg(x; Σ, a, b), all normalizing constants included.
///
/// At x = 0 the elliptical factor (xᵀΣ⁻¹x)^(a − q/2) is 1 when a = q/2 and
/// singular/zero otherwise; the latter throws DomainError.
double log_density(const EgdParams& params, const Eigen::Ref<const Vector>& x);

/// log of the Gamma(a, b) density (shape a, scale b) at v > 0.
double gamma_log_density(double v, double a, double b);

/// xᵀΣ⁻¹x through the Cholesky factor of Σ.
double squared_radius(const ScatterMatrix& scatter,
                      const Eigen::Ref<const Vector>& x);

/// log p_eg(x_i) for every sample (weights ignored).
Vector log_densities(const EgdParams& params, const Dataset& data);

/// Σ_i w_i log p_eg(x_i).
double log_likelihood(const EgdParams& params, const Dataset& data);

/// Draws x = Σ^{1/2} (√υ u), υ ~ Gamma(a, b), u uniform on the unit sphere.
Dataset sample(const EgdParams& params, std::size_t n, std::uint64_t seed);

struct MixtureSample {
  Dataset data;
  std::vector<std::size_t> labels;
};

/// Component label ~ Categorical(p), then an EGD draw from that component.
MixtureSample sample_mixture(const MixtureModel& model, std::size_t n,
                             std::uint64_t seed);

/// Monte-Carlo estimate of p_eg(x; Σ, a, 2) from the Gaussian scale-mixture
/// representation
///   p_eg(x; Σ, a, 2) = ∫₀¹ Beta(u; a, q/2 − a) N(x; 0, uΣ) du,
/// valid only for 0 < a < q/2. Beta(u; α, β) ∝ u^(α−1) (1−u)^(β−1).
double gsm_density_mc(const ScatterMatrix& scatter, double a,
                      const Eigen::Ref<const Vector>& x, std::size_t num_mc,
                      std::uint64_t seed);

/// Random SPD scatter A Aᵀ + 0.1 I with A standard normal, used by benchmarks.
ScatterMatrix random_scatter(Eigen::Index dim, std::uint64_t seed);

}  // namespace egd
