#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include "egd/errors.hpp"
#include "egd/gamma_ml.hpp"

using namespace egd;
using Big = boost::multiprecision::cpp_bin_float_50;

namespace {

double rel(double got, double want) { return std::abs(got - want) / std::max(1.0, std::abs(want)); }

// Maximizes the weighted profile log-likelihood
//   a ↦ (a − 1) mean_log − lgamma(a) − a log(mean / a) − a
// by golden-section search on log a ∈ [log 1e-3, log 1e3].
double golden_section_shape(const WeightedSample& s) {
  const double ml = s.mean_log();
  const double m = s.mean();
  auto f = [&](double la) {
    const double a = std::exp(la);
    return (a - 1.0) * ml - std::lgamma(a) - a * std::log(m / a) - a;
  };
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = std::log(1e-3), hi = std::log(1e3);
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  while (hi - lo > 1e-12) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = f(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = f(x1);
    }
  }
  return std::exp(0.5 * (lo + hi));
}

}  // namespace

TEST_CASE("digamma against a 50-digit oracle") {
  for (double x : {1e-4, 0.01, 0.3, 1.0, 1.4616321449683622, 2.5, 9.99, 10.0, 10.5, 37.0, 1e3, 1e6}) {
    const double want = static_cast<double>(boost::math::digamma(Big(x)));
    CAPTURE(x);
    CHECK(std::abs(digamma(x) - want) <= 1e-12 * std::max(1.0, std::abs(want)));
  }
  CHECK(digamma(1.0) == doctest::Approx(-0.5772156649015329).epsilon(1e-14));
}

TEST_CASE("trigamma against a 50-digit oracle") {
  for (double x : {1e-4, 0.01, 0.3, 1.0, 2.5, 9.99, 10.0, 25.0, 1e3, 1e6}) {
    const double want = static_cast<double>(boost::math::trigamma(Big(x)));
    CAPTURE(x);
    CHECK(rel(trigamma(x), want) <= 1e-12);
  }
  CHECK(trigamma(1.0) == doctest::Approx(std::numbers::pi * std::numbers::pi / 6).epsilon(1e-14));
}

TEST_CASE("polygamma recurrences") {
  for (double x : {0.2, 0.9, 3.7, 8.5, 12.0, 55.5}) {
    CHECK(digamma(x + 1) - digamma(x) == doctest::Approx(1.0 / x).epsilon(1e-12));
    CHECK(trigamma(x + 1) - trigamma(x) == doctest::Approx(-1.0 / (x * x)).epsilon(1e-11));
  }
  CHECK_THROWS_AS(digamma(0.0), DomainError);
  CHECK_THROWS_AS(trigamma(-1.0), DomainError);
}

TEST_CASE("single generalized-Newton step worked example") {
  const double inv = gamma_newton_inverse_step(1.0, -0.3);
  CHECK(1.0 - inv == doctest::Approx(0.4298360).epsilon(1e-6));
  CHECK(1.0 / inv == doctest::Approx(1.7539).epsilon(1e-4));
}

TEST_CASE("gamma fit on a large unweighted sample") {
  std::mt19937_64 rng(17);
  std::gamma_distribution<double> g(3.0, 2.0);
  Vector v(100000);
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = g(rng);
  const GammaFit fit = fit_gamma_weighted(WeightedSample(v));
  CHECK(fit.converged);
  CHECK(fit.shape_a == doctest::Approx(3.0).epsilon(0.05 / 3.0));
  CHECK(fit.scale_b == doctest::Approx(2.0).epsilon(0.05 / 2.0));
  CHECK(fit.iterations <= 10);
  const WeightedSample ws(v);
  CHECK(std::log(fit.shape_a) - digamma(fit.shape_a) ==
        doctest::Approx(std::log(ws.mean()) - ws.mean_log()).epsilon(1e-8));
  CHECK(fit.shape_a * fit.scale_b == doctest::Approx(ws.mean()).epsilon(1e-15));
}

TEST_CASE("gamma fit matches golden-section oracle and is weight invariant") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> shape(0.05, 30.0), unif(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::gamma_distribution<double> g(shape(rng), 1.5);
    Vector v(300), w(300);
    for (Eigen::Index i = 0; i < 300; ++i) {
      v(i) = std::max(g(rng), 1e-300);
      w(i) = unif(rng);
    }
    const WeightedSample s(v, w);
    const GammaFit fit = fit_gamma_weighted(s);
    CHECK(fit.converged);
    CHECK(fit.iterations <= 50);
    CHECK(std::abs(fit.shape_a - golden_section_shape(s)) <= 1e-4 * std::max(1.0, fit.shape_a));

    Vector v2(600), w2(600);
    v2 << v, v;
    w2 << 0.5 * w, 0.5 * w;
    const GammaFit dup = fit_gamma_weighted(WeightedSample(v2, w2));
    CHECK(dup.shape_a == doctest::Approx(fit.shape_a).epsilon(1e-12));
    CHECK(dup.scale_b == doctest::Approx(fit.scale_b).epsilon(1e-12));
  }
}

TEST_CASE("degenerate and invalid gamma samples") {
  CHECK_THROWS_WITH_AS(fit_gamma_weighted(WeightedSample(Vector::Constant(5, 2.0))),
                       "degenerate sample: shape unbounded", DataError);
  Vector v(3);
  v << 1.0, -1.0, 2.0;
  CHECK_THROWS_AS(WeightedSample{v}, DataError);
  Vector w(3);
  w << 1.0, 1.0, 1.0;
  v << 1.0, 2.0, 3.0;
  CHECK_THROWS_AS(WeightedSample(v, Vector::Zero(3)), DataError);
  Vector w0(3);
  w0 << 1.0, 0.0, 0.0;
  CHECK_THROWS_AS(fit_gamma_weighted(WeightedSample(v, w0)), DataError);
}
