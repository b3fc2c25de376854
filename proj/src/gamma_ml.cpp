#include "egd/gamma_ml.hpp"

#include <cmath>

#include "egd/errors.hpp"

namespace egd {

double digamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DomainError("digamma: x must be positive and finite");
  }
  double shift = 0.0;
  while (x < 10.0) {
    shift += 1.0 / x;
    x += 1.0;
  }
  const double r = 1.0 / (x * x);
  // Bernoulli terms B_{2k} / (2k x^{2k}), k = 1..7
  const double series =
      r * (1.0 / 12 -
           r * (1.0 / 120 -
                r * (1.0 / 252 -
                     r * (1.0 / 240 - r * (1.0 / 132 - r * (691.0 / 32760 - r / 12))))));
  return std::log(x) - 0.5 / x - series - shift;
}

double trigamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DomainError("trigamma: x must be positive and finite");
  }
  double shift = 0.0;
  while (x < 10.0) {
    shift += 1.0 / (x * x);
    x += 1.0;
  }
  const double r = 1.0 / (x * x);
  // B_{2k} / x^{2k+1}, k = 1..7
  const double series =
      r * (1.0 / 6 -
           r * (1.0 / 30 -
                r * (1.0 / 42 -
                     r * (1.0 / 30 - r * (5.0 / 66 - r * (691.0 / 2730 - r * 7.0 / 6))))));
  return 1.0 / x + 0.5 * r + series / x + shift;
}

WeightedSample::WeightedSample(Vector v, Vector w)
    : values(std::move(v)), weights(std::move(w)) {
  if (values.size() == 0) throw DataError("weighted sample is empty");
  if (values.size() != weights.size()) {
    throw DataError("weighted sample: value and weight counts differ");
  }
  if (!values.allFinite() || (values.array() <= 0.0).any()) {
    throw DataError("weighted sample: values must be positive and finite");
  }
  if (!weights.allFinite() || (weights.array() < 0.0).any() || !(weights.sum() > 0.0)) {
    throw DataError("weighted sample: weights must be nonnegative with positive sum");
  }
}

WeightedSample::WeightedSample(Vector v)
    : WeightedSample(v, Vector::Ones(v.size())) {}

double WeightedSample::mean() const { return weights.dot(values) / weights.sum(); }

double WeightedSample::mean_log() const {
  return weights.dot(values.array().log().matrix()) / weights.sum();
}

double gamma_newton_inverse_step(double a, double mean_log_minus_log_mean) {
  const double num = mean_log_minus_log_mean + std::log(a) - digamma(a);
  const double den = a * a * (1.0 / a - trigamma(a));
  // 1/a < Ψ'(a) for all a > 0, so den < 0 for any representable a.
  if (!(den < 0.0)) {
    throw NumericalError("gamma Newton step: denominator is not negative");
  }
  return 1.0 / a + num / den;
}

namespace {

// Root of log a − Ψ(a) = s (s > 0); the left side decreases from +∞ to 0.
double solve_shape_bisection(double s, double guess, double tol, int& iterations) {
  auto f = [s](double a) { return std::log(a) - digamma(a) - s; };
  double lo = guess;
  double hi = guess;
  while (f(lo) < 0.0) lo *= 0.5;
  while (f(hi) > 0.0) hi *= 2.0;
  while (hi - lo > tol * lo) {
    const double mid = std::sqrt(lo * hi);
    (f(mid) > 0.0 ? lo : hi) = mid;
    ++iterations;
  }
  return std::sqrt(lo * hi);
}

}  // namespace

GammaFit fit_gamma_weighted(const WeightedSample& data, double tol, int max_iter) {
  if (!(tol > 0.0) || max_iter < 1) {
    throw DomainError("fit_gamma_weighted: tol must be positive, max_iter >= 1");
  }
  bool all_equal = true;
  double first = 0.0;
  bool have_first = false;
  for (Eigen::Index i = 0; i < data.values.size(); ++i) {
    if (data.weights(i) <= 0.0) continue;
    if (!have_first) {
      first = data.values(i);
      have_first = true;
    } else if (data.values(i) != first) {
      all_equal = false;
      break;
    }
  }
  const double mean = data.mean();
  const double mean_log = data.mean_log();
  const double s = std::log(mean) - mean_log;
  if (all_equal || !(s > 0.0)) {
    throw DataError("degenerate sample: shape unbounded");
  }

  GammaFit fit;
  double a = 0.5 / s;
  for (int it = 0; it < max_iter; ++it) {
    const double inv = gamma_newton_inverse_step(a, -s);
    ++fit.iterations;
    if (!(inv > 0.0) || !std::isfinite(inv)) {
      fit.used_bisection = true;
      a = solve_shape_bisection(s, a, tol, fit.iterations);
      fit.converged = true;
      break;
    }
    const double next = 1.0 / inv;
    const bool done = std::abs(next - a) < tol * a;
    a = next;
    if (done) {
      fit.converged = true;
      break;
    }
  }
  fit.shape_a = a;
  fit.scale_b = mean / a;
  return fit;
}

}  // namespace egd
