#include "egd/scatter_ml.hpp"

#include <chrono>
#include <cmath>
#include <numbers>

#include "egd/errors.hpp"

namespace egd {

namespace {

using Clock = std::chrono::steady_clock;

constexpr double kDenominatorFloor = 1e-300;
// Iterates whose condition number exceeds this are heading to a singular
// limit; the fit stops and reports near_singular.
constexpr double kSingularCondition = 1e14;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

double log_normalizer(double q, double a, double b) {
  return std::lgamma(0.5 * q) - 0.5 * q * std::log(std::numbers::pi) -
         std::lgamma(a) - a * std::log(b);
}

// Average log-likelihood from quadratic forms s_i = x_iᵀΣ⁻¹x_i and log|Σ|.
double avg_loglik(const Vector& s, const Vector& w, double n_eff, double log_det,
                  double q, double a, double b) {
  const double power = a - 0.5 * q;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    double term = -s(i) / b;
    if (power != 0.0) term += power * std::log(s(i));
    acc += w(i) * term;
  }
  return log_normalizer(q, a, b) - 0.5 * log_det + acc / n_eff;
}

// s_i = y_iᵀ G⁻¹ y_i for every row of Y, through the Cholesky factor of G.
Vector quad_forms(const Eigen::LLT<Matrix>& llt, const Matrix& Y) {
  const Matrix z = llt.matrixL().solve(Y.transpose());
  return z.colwise().squaredNorm().transpose();
}

Eigen::LLT<Matrix> checked_llt(const Matrix& m, const char* what) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) {
    throw NumericalError(std::string(what) + ": matrix lost positive definiteness");
  }
  return llt;
}

double llt_log_det(const Eigen::LLT<Matrix>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

Matrix initial_sigma(const Matrix& X, const Vector& w, const FixedPointConfig& config) {
  const Eigen::Index q = X.cols();
  switch (config.init) {
    case InitKind::identity:
      return Matrix::Identity(q, q);
    case InitKind::sample_covariance:
      return symmetrize(X.transpose() * w.asDiagonal() * X / w.sum());
    case InitKind::user:
      if (!config.user_init || config.user_init->rows() != q || config.user_init->cols() != q) {
        throw DomainError("user initialization missing or of wrong dimension");
      }
      return ScatterMatrix(*config.user_init).matrix();
  }
  return Matrix::Identity(q, q);
}

Matrix initial_gamma(const WhitenedProblem& p, const FixedPointConfig& config) {
  const Matrix sigma0 = initial_sigma(p.X, p.weights, config);
  return symmetrize(p.B_half_inv * sigma0 * p.B_half_inv);
}

// Returns true when any denominator had to be floored.
bool floor_denominators(Vector& s) {
  bool floored = false;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (!(s(i) >= kDenominatorFloor)) {
      s(i) = kDenominatorFloor;
      floored = true;
    }
  }
  return floored;
}

struct AlphaInternal {
  AlphaChoice choice;
  Vector s_prime;  // y_iᵀ Γ'⁻¹ y_i
  double log_det_prime = 0.0;
};

AlphaInternal alpha_impl(const Matrix& gamma_prime, double c, const Matrix& Y,
                         const Vector& w, AlphaRule rule) {
  const Eigen::Index q = gamma_prime.rows();
  const auto llt = checked_llt(gamma_prime, "select_alpha");
  AlphaInternal out;
  out.s_prime = quad_forms(llt, Y);
  floor_denominators(out.s_prime);
  out.log_det_prime = llt_log_det(llt);

  const Vector ratio = w.cwiseQuotient(out.s_prime);
  const Matrix c_prime = symmetrize(c * Y.transpose() * ratio.asDiagonal() * Y);

  // Spectrum of N' = Γ'^{-1/2} (C' + I) Γ'^{-1/2} as a generalized problem.
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> gen(
      c_prime + Matrix::Identity(q, q), gamma_prime, Eigen::EigenvaluesOnly);
  if (gen.info() != Eigen::Success) {
    throw NumericalError("select_alpha: eigenvalue computation failed");
  }
  const Vector& nl = gen.eigenvalues();
  AlphaChoice& ch = out.choice;
  ch.lambda_min = nl(0);
  ch.lambda_max = nl(q - 1);
  if (!std::isfinite(ch.lambda_min) || !std::isfinite(ch.lambda_max)) {
    throw NumericalError("select_alpha: nonfinite eigenvalues of N'");
  }
  if (ch.lambda_max >= 1.0 && ch.lambda_min <= 1.0) {
    ch.case_id = 1;
  } else if (ch.lambda_max < 1.0) {
    ch.case_id = 2;
  } else {
    ch.case_id = 3;
  }

  if (rule == AlphaRule::trace) {
    const double n_eff = w.sum();
    const double trace_inv = llt.solve(Matrix::Identity(q, q)).trace();
    ch.alpha = trace_inv / (static_cast<double>(q) - c * n_eff);
  } else if (ch.case_id == 1) {
    ch.alpha = 1.0;
  } else {
    const auto [lo, hi] = extreme_eigenvalues(symmetrize(gamma_prime - c_prime));
    ch.alpha = 1.0 / (ch.case_id == 2 ? lo : hi);
  }
  if (!std::isfinite(ch.alpha) || !(ch.alpha > 0.0)) {
    throw NumericalError("select_alpha: invalid step scale");
  }
  return out;
}

void finish_report(FitReport& report, const WhitenedProblem& p,
                   const FixedPointConfig& config) {
  if (config.residual_check) {
    const Constants k = compute_constants(p.shape_a, p.scale_b, p.dim(), p.n_eff);
    report.final_residual =
        stationarity_residual(report.sigma_hat, Dataset(p.X, p.weights), k.c, k.d);
  }
}

}  // namespace

Constants compute_constants(double a, double b, Eigen::Index q, double n_eff) {
  if (!(a > 0.0) || !(b > 0.0) || !(n_eff > 0.0)) {
    throw DomainError("compute_constants: a, b and n_eff must be positive");
  }
  return {-2.0 * (a - 0.5 * static_cast<double>(q)) / n_eff, 2.0 / (b * n_eff)};
}

void FixedPointConfig::validate() const {
  if (!(tol > 0.0)) throw DomainError("tolerance must be positive");
  if (max_iter < 1) throw DomainError("max_iter must be at least 1");
}

std::string to_string(Algorithm algo) {
  switch (algo) {
    case Algorithm::concave: return "fp-concave";
    case Algorithm::nonconcave: return "fp-nonconcave";
    case Algorithm::kent_tyler: return "kent-tyler";
  }
  return "unknown";
}

WhitenedProblem whiten(const Dataset& data, double a, double b) {
  WhitenedProblem p;
  p.weights = data.weights();
  p.n_eff = data.total_weight();
  p.shape_a = a;
  p.scale_b = b;
  const Constants k = compute_constants(a, b, data.dim(), p.n_eff);
  p.c = k.c;
  p.d = k.d;
  p.X = data.samples();
  p.B = symmetrize(k.d * p.X.transpose() * p.weights.asDiagonal() * p.X);

  if (data.size() < data.dim()) {
    throw DataError("data does not span R^q");
  }
  SpdRoots roots;
  try {
    roots = spd_roots(p.B);
  } catch (const NumericalError&) {
    throw DataError("data does not span R^q");
  }
  // Clamping in spd_roots tolerates tiny eigenvalues; a spanning set must
  // not need it.
  const double lmin = roots.eigenvalues(0);
  const double lmax = roots.eigenvalues(roots.eigenvalues.size() - 1);
  if (!(lmin > 1e-13 * lmax)) {
    throw DataError("data does not span R^q");
  }
  p.B_half = std::move(roots.half);
  p.B_half_inv = std::move(roots.inv_half);
  p.log_det_B = roots.eigenvalues.array().log().sum();
  p.Y = p.X * p.B_half_inv;
  return p;
}

double whitened_avg_loglik(const WhitenedProblem& p, const Matrix& gamma) {
  const auto llt = checked_llt(gamma, "whitened_avg_loglik");
  Vector s = quad_forms(llt, p.Y);
  return avg_loglik(s, p.weights, p.n_eff, p.log_det_B + llt_log_det(llt),
                    static_cast<double>(p.dim()), p.shape_a, p.scale_b);
}

double stationarity_residual(const ScatterMatrix& sigma, const Dataset& data,
                             double c, double d) {
  // ‖M − I‖_F is invariant under M -> Q M Qᵀ, so the Cholesky factor can
  // stand in for the symmetric root Σ^{1/2}.
  const Eigen::Index q = sigma.dim();
  const Matrix z = sigma.cholesky().matrixL().solve(data.samples().transpose());
  const Vector t = z.colwise().squaredNorm().transpose();
  Vector coef(t.size());
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    coef(i) = data.weights()(i) * (c / t(i) + d);
  }
  const Matrix m = z * coef.asDiagonal() * z.transpose();
  return (symmetrize(m) - Matrix::Identity(q, q)).norm();
}

ScatterMatrix recover_sigma(const Matrix& gamma_star, const WhitenedProblem& p) {
  return ScatterMatrix(symmetrize(p.B_half * gamma_star * p.B_half));
}

FitReport fit_concave(const WhitenedProblem& p, const FixedPointConfig& config) {
  config.validate();
  if (p.c > 0.0) {
    throw RegimeError("fit_concave requires c <= 0 (a >= q/2)");
  }
  const auto start = Clock::now();
  const Eigen::Index q = p.dim();
  const double qd = static_cast<double>(q);
  const Matrix id = Matrix::Identity(q, q);

  Matrix gamma = initial_gamma(p, config);
  const double ll0 = whitened_avg_loglik(p, gamma);

  // Gaussian case: the map has the constant value I.
  if (p.c == 0.0) {
    FitReport r(recover_sigma(id, p));
    r.algorithm = Algorithm::concave;
    r.iterations = 1;
    r.converged = true;
    r.initial_avg_loglik = ll0;
    r.final_avg_loglik = whitened_avg_loglik(p, id);
    r.loglik_trace = {r.final_avg_loglik};
    r.iterate_max_eig = {1.0};
    r.iterate_min_eig = {1.0};
    r.elapsed_ms = {elapsed_ms(start)};
    finish_report(r, p, config);
    return r;
  }

  Eigen::SelfAdjointEigenSolver<Matrix> eig(gamma);
  if (eig.info() != Eigen::Success || eig.eigenvalues()(0) <= 0.0) {
    throw NumericalError("fit_concave: initial iterate is not positive definite");
  }
  Matrix vecs = eig.eigenvectors();
  Vector vals = eig.eigenvalues();

  const double c_neg = -p.c;
  std::vector<double> ll_trace, max_eig, min_eig, times;
  double ll_prev = ll0;
  bool converged = false;
  bool singular = false;
  std::string message;
  int iter = 0;

  while (iter < config.max_iter) {
    // Γ^{-1/2} yᵢ and sᵢ = yᵢᵀ Γ⁻¹ yᵢ from the current eigenpairs.
    const Matrix inv_half = vecs * vals.cwiseSqrt().cwiseInverse().asDiagonal() * vecs.transpose();
    const Matrix z = inv_half * p.Y.transpose();
    Vector s = z.colwise().squaredNorm().transpose();
    floor_denominators(s);
    const Vector ratio = p.weights.cwiseQuotient(s);
    const Matrix g = symmetrize(id + c_neg * z * ratio.asDiagonal() * z.transpose());

    Eigen::SelfAdjointEigenSolver<Matrix> geig(g);
    if (geig.info() != Eigen::Success) {
      throw NumericalError("fit_concave: eigendecomposition failed");
    }
    vecs = geig.eigenvectors();
    vals = geig.eigenvalues().cwiseInverse();  // Γ_{p+1} = G⁻¹
    gamma = symmetrize(vecs * vals.asDiagonal() * vecs.transpose());
    ++iter;

    const double lo = vals.minCoeff();
    const double hi = vals.maxCoeff();
    // s under Γ_{p+1}: Γ_{p+1}⁻¹ = V diag(μ) Vᵀ.
    const Matrix zz = geig.eigenvalues().cwiseSqrt().asDiagonal() * vecs.transpose() * p.Y.transpose();
    Vector s_new = zz.colwise().squaredNorm().transpose();
    floor_denominators(s_new);
    const double ll = avg_loglik(s_new, p.weights, p.n_eff,
                                 p.log_det_B + vals.array().log().sum(), qd,
                                 p.shape_a, p.scale_b);
    ll_trace.push_back(ll);
    max_eig.push_back(hi);
    min_eig.push_back(lo);
    times.push_back(elapsed_ms(start));

    if (!std::isfinite(ll)) {
      message = "nonfinite log-likelihood";
      break;
    }
    if (!(lo > 0.0) || hi / lo > kSingularCondition) {
      singular = true;
      message = "near-singular iterate";
      break;
    }
    if (std::abs(ll - ll_prev) < config.tol) {
      converged = true;
      break;
    }
    ll_prev = ll;
  }

  FitReport r(recover_sigma(gamma, p));
  r.algorithm = Algorithm::concave;
  r.iterations = iter;
  r.converged = converged;
  r.near_singular = singular;
  r.message = converged ? "converged" : (message.empty() ? "max_iter reached" : message);
  r.initial_avg_loglik = ll0;
  r.final_avg_loglik = ll_trace.empty() ? ll0 : ll_trace.back();
  r.loglik_trace = std::move(ll_trace);
  r.iterate_max_eig = std::move(max_eig);
  r.iterate_min_eig = std::move(min_eig);
  r.elapsed_ms = std::move(times);
  finish_report(r, p, config);
  return r;
}

AlphaChoice select_alpha(const Matrix& gamma_prime, double c, const Matrix& Y,
                         const Vector& weights, AlphaRule rule) {
  if (!(c > 0.0)) {
    throw RegimeError("select_alpha requires c > 0 (a < q/2)");
  }
  return alpha_impl(gamma_prime, c, Y, weights, rule).choice;
}

FitReport fit_nonconcave(const WhitenedProblem& p, const FixedPointConfig& config) {
  config.validate();
  if (!(p.c > 0.0)) {
    throw RegimeError("fit_nonconcave requires c > 0 (a < q/2)");
  }
  const auto start = Clock::now();
  const Eigen::Index q = p.dim();
  const double qd = static_cast<double>(q);
  const Matrix id = Matrix::Identity(q, q);

  Matrix gamma = initial_gamma(p, config);
  auto llt = checked_llt(gamma, "fit_nonconcave");
  Vector s = quad_forms(llt, p.Y);
  double log_det = llt_log_det(llt);
  const double ll0 = avg_loglik(s, p.weights, p.n_eff, p.log_det_B + log_det, qd,
                                p.shape_a, p.scale_b);

  FitReport r(ScatterMatrix::identity(q));
  double ll_prev = ll0;
  bool converged = false;
  std::string message;
  int iter = 0;

  while (iter < config.max_iter) {
    floor_denominators(s);
    // Γ' = Γ^{1/2} N Γ^{1/2} = I + c Σ w y yᵀ / s.
    const Vector ratio = p.weights.cwiseQuotient(s);
    const Matrix gamma_prime = symmetrize(id + p.c * p.Y.transpose() * ratio.asDiagonal() * p.Y);

    // Spectrum of N_p = Γ^{-1/2} Γ' Γ^{-1/2}.
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> gen(gamma_prime, gamma,
                                                         Eigen::EigenvaluesOnly);
    if (gen.info() != Eigen::Success) {
      throw NumericalError("fit_nonconcave: eigenvalue computation failed");
    }
    const double n_max = gen.eigenvalues()(q - 1);
    const double n_min = gen.eigenvalues()(0);

    AlphaInternal step = alpha_impl(gamma_prime, p.c, p.Y, p.weights, config.alpha_rule);
    const double alpha = step.choice.alpha;
    gamma = alpha * gamma_prime;
    s = step.s_prime / alpha;
    log_det = qd * std::log(alpha) + step.log_det_prime;
    ++iter;

    const auto [lo, hi] = extreme_eigenvalues(gamma);
    const double ll = avg_loglik(s, p.weights, p.n_eff, p.log_det_B + log_det, qd,
                                 p.shape_a, p.scale_b);
    r.loglik_trace.push_back(ll);
    r.alpha_trace.push_back(alpha);
    r.alpha_case.push_back(step.choice.case_id);
    r.lambda_max_trace.push_back(n_max);
    r.lambda_min_trace.push_back(n_min);
    r.iterate_max_eig.push_back(hi);
    r.iterate_min_eig.push_back(lo);
    r.elapsed_ms.push_back(elapsed_ms(start));

    if (!std::isfinite(ll)) {
      message = "nonfinite log-likelihood";
      break;
    }
    if (!(lo > 0.0) || hi / lo > kSingularCondition) {
      r.near_singular = true;
      message = "near-singular iterate";
      break;
    }
    if (std::abs(ll - ll_prev) < config.tol) {
      converged = true;
      break;
    }
    ll_prev = ll;
  }

  r.sigma_hat = recover_sigma(gamma, p);
  r.algorithm = Algorithm::nonconcave;
  r.iterations = iter;
  r.converged = converged;
  r.message = converged ? "converged" : (message.empty() ? "max_iter reached" : message);
  r.initial_avg_loglik = ll0;
  r.final_avg_loglik = r.loglik_trace.empty() ? ll0 : r.loglik_trace.back();
  finish_report(r, p, config);
  return r;
}

FitReport fit_kent_tyler(const Dataset& data, double a, double b,
                         const FixedPointConfig& config) {
  config.validate();
  const Eigen::Index q = data.dim();
  const double qd = static_cast<double>(q);
  if (!(a < 0.5 * qd)) {
    throw RegimeError("Kent-Tyler iteration requires a < q/2");
  }
  if (!(b > 0.0) || !(a > 0.0)) {
    throw DomainError("fit_kent_tyler: a and b must be positive");
  }
  const auto start = Clock::now();
  const Matrix& X = data.samples();
  const Vector& w = data.weights();
  const double n_eff = data.total_weight();
  const Constants k = compute_constants(a, b, q, n_eff);

  Matrix sigma = initial_sigma(X, w, config);
  auto llt = checked_llt(sigma, "fit_kent_tyler");
  Vector t = quad_forms(llt, X);
  const double ll0 = avg_loglik(t, w, n_eff, llt_log_det(llt), qd, a, b);

  FitReport r(ScatterMatrix::identity(q));
  double ll_prev = ll0;
  bool converged = false;
  std::string message;
  int iter = 0;

  while (iter < config.max_iter) {
    floor_denominators(t);
    Vector coef(t.size());
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      coef(i) = w(i) * ((qd - 2.0 * a) / t(i) + 2.0 / b);
    }
    sigma = symmetrize(X.transpose() * coef.asDiagonal() * X / n_eff);
    ++iter;

    llt = checked_llt(sigma, "fit_kent_tyler");
    t = quad_forms(llt, X);
    const auto [lo, hi] = extreme_eigenvalues(sigma);
    const double ll = avg_loglik(t, w, n_eff, llt_log_det(llt), qd, a, b);
    r.loglik_trace.push_back(ll);
    r.iterate_max_eig.push_back(hi);
    r.iterate_min_eig.push_back(lo);
    r.elapsed_ms.push_back(elapsed_ms(start));

    if (!std::isfinite(ll)) {
      message = "nonfinite log-likelihood";
      break;
    }
    if (!(lo > 0.0) || hi / lo > kSingularCondition) {
      r.near_singular = true;
      message = "near-singular iterate";
      break;
    }
    if (std::abs(ll - ll_prev) < config.tol) {
      converged = true;
      break;
    }
    ll_prev = ll;
  }

  r.sigma_hat = ScatterMatrix(sigma);
  r.algorithm = Algorithm::kent_tyler;
  r.iterations = iter;
  r.converged = converged;
  r.message = converged ? "converged" : (message.empty() ? "max_iter reached" : message);
  r.initial_avg_loglik = ll0;
  r.final_avg_loglik = r.loglik_trace.empty() ? ll0 : r.loglik_trace.back();
  if (config.residual_check) {
    r.final_residual = stationarity_residual(r.sigma_hat, data, k.c, k.d);
  }
  return r;
}

FitReport fit_scatter(const Dataset& data, double a, double b,
                      const FixedPointConfig& config) {
  const WhitenedProblem p = whiten(data, a, b);
  return p.c > 0.0 ? fit_nonconcave(p, config) : fit_concave(p, config);
}

}  // namespace egd
