#include "egd/density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "egd/errors.hpp"

namespace egd {

namespace {

double log_normalizer(double q, double a, double b, double log_det) {
  return std::lgamma(0.5 * q) - 0.5 * q * std::log(std::numbers::pi) -
         std::lgamma(a) - a * std::log(b) - 0.5 * log_det;
}

}  // namespace

double squared_radius(const ScatterMatrix& scatter,
                      const Eigen::Ref<const Vector>& x) {
  return scatter.quad_form(x);
}

double log_density(const EgdParams& params, const Eigen::Ref<const Vector>& x) {
  if (x.size() != params.dim()) {
    throw DomainError("log_density: dimension mismatch");
  }
  const double q = static_cast<double>(params.dim());
  const double a = params.shape_a;
  const double b = params.scale_b;
  const double t = squared_radius(params.scatter, x);
  const double base = log_normalizer(q, a, b, params.scatter.log_det());
  const double power = a - 0.5 * q;
  if (t == 0.0) {
    if (power != 0.0) {
      throw DomainError("log_density: density singular/zero at origin");
    }
    return base;
  }
  double lp = base - t / b;
  if (power != 0.0) {
    lp += power * std::log(t);
  }
  return lp;
}

double gamma_log_density(double v, double a, double b) {
  if (!(v > 0.0)) {
    throw DomainError("gamma_log_density: v must be positive");
  }
  if (!(a > 0.0) || !(b > 0.0)) {
    throw DomainError("gamma_log_density: a and b must be positive");
  }
  return (a - 1.0) * std::log(v) - std::lgamma(a) - a * std::log(b) - v / b;
}

Vector log_densities(const EgdParams& params, const Dataset& data) {
  if (data.dim() != params.dim()) {
    throw DomainError("log_densities: dimension mismatch");
  }
  const double q = static_cast<double>(params.dim());
  const double a = params.shape_a;
  const double b = params.scale_b;
  const double base = log_normalizer(q, a, b, params.scatter.log_det());
  const double power = a - 0.5 * q;
  const Matrix z = params.scatter.cholesky().matrixL().solve(data.samples().transpose());
  Vector out(data.size());
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const double t = z.col(i).squaredNorm();
    double lp = base - t / b;
    if (power != 0.0) lp += power * std::log(t);
    out(i) = lp;
  }
  return out;
}

double log_likelihood(const EgdParams& params, const Dataset& data) {
  const Vector lp = log_densities(params, data);
  const auto& w = data.weights();
  // Fixed sample-order reduction.
  double total = 0.0;
  for (Eigen::Index i = 0; i < lp.size(); ++i) total += w(i) * lp(i);
  return total;
}

namespace {

Vector unit_vector(std::mt19937_64& rng, Eigen::Index q) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector u(q);
  double norm2 = 0.0;
  do {
    for (Eigen::Index j = 0; j < q; ++j) u(j) = normal(rng);
    norm2 = u.squaredNorm();
  } while (norm2 == 0.0);
  return u / std::sqrt(norm2);
}

}  // namespace

Dataset sample(const EgdParams& params, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw DomainError("sample: n must be at least 1");
  const Eigen::Index q = params.dim();
  const Matrix root = spd_roots(params.scatter.matrix()).half;
  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> radial(params.shape_a, params.scale_b);

  Matrix x(static_cast<Eigen::Index>(n), q);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    // Gamma draws can underflow to 0 for tiny a; redraw rather than emit 0.
    double v = 0.0;
    do {
      v = radial(rng);
    } while (!(v > 0.0));
    const Vector u = unit_vector(rng, q);
    x.row(i) = (root * (std::sqrt(v) * u)).transpose();
  }
  return Dataset(std::move(x));
}

MixtureSample sample_mixture(const MixtureModel& model, std::size_t n,
                             std::uint64_t seed) {
  if (n == 0) throw DomainError("sample_mixture: n must be at least 1");
  const Eigen::Index q = model.dim();
  std::vector<Matrix> roots;
  std::vector<std::gamma_distribution<double>> radial;
  for (const auto& c : model.components) {
    roots.push_back(spd_roots(c.scatter.matrix()).half);
    radial.emplace_back(c.shape_a, c.scale_b);
  }
  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> pick(model.mix_probs.data(),
                                               model.mix_probs.data() + model.mix_probs.size());

  Matrix x(static_cast<Eigen::Index>(n), q);
  std::vector<std::size_t> labels(n);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const std::size_t k = pick(rng);
    labels[static_cast<std::size_t>(i)] = k;
    double v = 0.0;
    do {
      v = radial[k](rng);
    } while (!(v > 0.0));
    const Vector u = unit_vector(rng, q);
    x.row(i) = (roots[k] * (std::sqrt(v) * u)).transpose();
  }
  return {Dataset(std::move(x)), std::move(labels)};
}

double gsm_density_mc(const ScatterMatrix& scatter, double a,
                      const Eigen::Ref<const Vector>& x, std::size_t num_mc,
                      std::uint64_t seed) {
  const double q = static_cast<double>(scatter.dim());
  if (!(a > 0.0) || !(a < 0.5 * q)) {
    throw DomainError("gsm_density_mc: requires 0 < a < q/2");
  }
  if (num_mc == 0) throw DomainError("gsm_density_mc: num_mc must be positive");
  if (x.size() != scatter.dim()) throw DomainError("gsm_density_mc: dimension mismatch");

  const double t = scatter.quad_form(x);
  const double base = -0.5 * q * std::log(2.0 * std::numbers::pi) - 0.5 * scatter.log_det();

  // u = G_a / (G_a + G_{q/2-a}) ~ Beta(a, q/2 - a).
  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> ga(a, 1.0);
  std::gamma_distribution<double> gb(0.5 * q - a, 1.0);
  std::vector<double> logs(num_mc);
  double max_log = -std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < num_mc; ++m) {
    double u = 0.0;
    do {
      const double g1 = ga(rng);
      const double g2 = gb(rng);
      u = g1 / (g1 + g2);
    } while (!(u > 0.0));
    logs[m] = base - 0.5 * q * std::log(u) - 0.5 * t / u;
    max_log = std::max(max_log, logs[m]);
  }
  double acc = 0.0;
  for (double l : logs) acc += std::exp(l - max_log);
  return std::exp(max_log) * acc / static_cast<double>(num_mc);
}

ScatterMatrix random_scatter(Eigen::Index dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix a(dim, dim);
  for (Eigen::Index j = 0; j < dim; ++j)
    for (Eigen::Index i = 0; i < dim; ++i) a(i, j) = normal(rng);
  return ScatterMatrix(symmetrize(a * a.transpose()) +
                       0.1 * Matrix::Identity(dim, dim));
}

}  // namespace egd
