#include "egd/mixture.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "egd/density.hpp"
#include "egd/errors.hpp"
#include "egd/gamma_ml.hpp"
#include "egd/seed.hpp"

namespace egd {

namespace {

using Clock = std::chrono::steady_clock;

Vector component_weights(const Dataset& data, const Responsibilities& resp, Eigen::Index k) {
  return data.weights().cwiseProduct(resp.row(k).transpose());
}

void check_resp(const Dataset& data, const Responsibilities& resp, std::size_t K) {
  if (resp.cols() != data.size() || static_cast<std::size_t>(resp.rows()) != K) {
    throw DomainError("responsibilities do not match model and data");
  }
}

}  // namespace

std::vector<double> EmReport::loglik_trace() const {
  std::vector<double> out;
  out.reserve(trace.size());
  for (const auto& e : trace) out.push_back(e.total_loglik);
  return out;
}

EStepResult e_step(const MixtureModel& model, const Dataset& data) {
  if (model.dim() != data.dim()) {
    throw DomainError("e_step: model and data dimensions differ");
  }
  const auto K = static_cast<Eigen::Index>(model.size());
  const Eigen::Index n = data.size();
  Matrix logp(K, n);
  for (Eigen::Index k = 0; k < K; ++k) {
    const double lp = std::log(model.mix_probs(k));
    logp.row(k) = (log_densities(model.components[static_cast<std::size_t>(k)], data).array() + lp)
                      .transpose();
  }
  EStepResult out;
  out.resp.resize(K, n);
  const Vector& w = data.weights();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = logp.col(i).maxCoeff();
    if (!std::isfinite(m)) {
      throw NumericalError("e_step: sample " + std::to_string(i) +
                           " has zero density under every component");
    }
    const auto shifted = (logp.col(i).array() - m).exp();
    const double sum = shifted.sum();
    out.resp.col(i) = shifted / sum;
    total += w(i) * (m + std::log(sum));
  }
  out.total_loglik = total;
  return out;
}

Vector update_mix_probs(const Dataset& data, const Responsibilities& resp) {
  Vector p = resp * data.weights() / data.total_weight();
  return p / p.sum();
}

MStepResult m_step_scatter(const Dataset& data, const Responsibilities& resp,
                           const MixtureModel& model, const FixedPointConfig& cfg) {
  check_resp(data, resp, model.size());
  const double q = static_cast<double>(data.dim());
  std::vector<EgdParams> comps = model.components;
  std::vector<bool> degenerate(comps.size(), false);

  for (std::size_t k = 0; k < comps.size(); ++k) {
    const Vector wk = component_weights(data, resp, static_cast<Eigen::Index>(k));
    if (!(wk.sum() >= q)) {
      degenerate[k] = true;
      continue;
    }
    const Dataset weighted = data.with_weights(wk);
    FixedPointConfig c = cfg;
    c.init = InitKind::user;
    c.user_init = comps[k].scatter.matrix();
    try {
      const FitReport fit = fit_scatter(weighted, comps[k].shape_a, comps[k].scale_b, c);
      EgdParams candidate(fit.sigma_hat, comps[k].shape_a, comps[k].scale_b);
      if (log_likelihood(candidate, weighted) >= log_likelihood(comps[k], weighted)) {
        comps[k] = std::move(candidate);
      }
    } catch (const DataError&) {
      degenerate[k] = true;
    } catch (const NumericalError&) {
      degenerate[k] = true;
    }
  }
  return {MixtureModel(std::move(comps), update_mix_probs(data, resp)), std::move(degenerate)};
}

MStepResult m_step_shape(const Dataset& data, const Responsibilities& resp,
                         const MixtureModel& model) {
  check_resp(data, resp, model.size());
  std::vector<EgdParams> comps = model.components;
  std::vector<bool> degenerate(comps.size(), false);

  for (std::size_t k = 0; k < comps.size(); ++k) {
    const Vector wk = component_weights(data, resp, static_cast<Eigen::Index>(k));
    if (!(wk.sum() > 0.0)) {
      degenerate[k] = true;
      continue;
    }
    const Matrix z =
        comps[k].scatter.cholesky().matrixL().solve(data.samples().transpose());
    Vector v = z.colwise().squaredNorm().transpose();
    try {
      const GammaFit g = fit_gamma_weighted(WeightedSample(std::move(v), wk));
      EgdParams candidate(comps[k].scatter, g.shape_a, g.scale_b);
      const Dataset weighted = data.with_weights(wk);
      if (log_likelihood(candidate, weighted) >= log_likelihood(comps[k], weighted)) {
        comps[k] = std::move(candidate);
      }
    } catch (const DataError&) {
      degenerate[k] = true;
    }
  }
  return {MixtureModel(std::move(comps), update_mix_probs(data, resp)), std::move(degenerate)};
}

namespace {

std::vector<std::size_t> kmeans_log_radii(const Dataset& data, std::size_t K) {
  const Eigen::Index n = data.size();
  std::vector<double> r(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    r[static_cast<std::size_t>(i)] = std::log(data.samples().row(i).squaredNorm());
  }
  std::vector<double> sorted = r;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> centers(K);
  for (std::size_t k = 0; k < K; ++k) {
    const auto idx = static_cast<std::size_t>((static_cast<double>(k) + 0.5) /
                                              static_cast<double>(K) * static_cast<double>(n));
    centers[k] = sorted[std::min(idx, sorted.size() - 1)];
  }
  std::vector<std::size_t> label(r.size(), 0);
  for (int it = 0; it < 200; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < r.size(); ++i) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < K; ++k) {
        if (std::abs(r[i] - centers[k]) < std::abs(r[i] - centers[best])) best = k;
      }
      if (best != label[i]) {
        label[i] = best;
        changed = true;
      }
    }
    std::vector<double> sum(K, 0.0);
    std::vector<double> count(K, 0.0);
    for (std::size_t i = 0; i < r.size(); ++i) {
      sum[label[i]] += r[i];
      count[label[i]] += 1.0;
    }
    for (std::size_t k = 0; k < K; ++k) {
      if (count[k] > 0.0) centers[k] = sum[k] / count[k];
    }
    if (!changed && it > 0) break;
  }
  return label;
}

}  // namespace

MixtureModel initial_mixture(const Dataset& data, const EmConfig& cfg) {
  if (cfg.init == EmInit::user_model) {
    if (!cfg.user_model) throw DomainError("EM: user_model init without a model");
    if (cfg.user_model->dim() != data.dim()) {
      throw DomainError("EM: user model dimension does not match data");
    }
    return *cfg.user_model;
  }
  const std::size_t K = cfg.K;
  const Eigen::Index n = data.size();
  const Eigen::Index q = data.dim();
  std::vector<std::size_t> label;
  if (cfg.init == EmInit::kmeans_on_radii) {
    label = kmeans_log_radii(data, K);
  } else {
    std::mt19937_64 rng(derive_seed(cfg.seed, "em-init"));
    std::uniform_int_distribution<std::size_t> pick(0, K - 1);
    label.resize(static_cast<std::size_t>(n));
    for (auto& l : label) l = pick(rng);
  }

  const Matrix& X = data.samples();
  const Vector& w = data.weights();
  std::vector<Matrix> moment(K, Matrix::Zero(q, q));
  std::vector<double> mass(K, 0.0);
  std::vector<Eigen::Index> count(K, 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t k = label[static_cast<std::size_t>(i)];
    moment[k].noalias() += w(i) * X.row(i).transpose() * X.row(i);
    mass[k] += w(i);
    ++count[k];
  }
  const Matrix overall = data.second_moment();
  std::vector<EgdParams> comps;
  Vector p(static_cast<Eigen::Index>(K));
  for (std::size_t k = 0; k < K; ++k) {
    Matrix s = overall;
    if (count[k] >= q && mass[k] > 0.0) {
      s = symmetrize(moment[k] / mass[k]);
      Eigen::LLT<Matrix> llt(s);
      if (llt.info() != Eigen::Success) s = overall;
    }
    comps.emplace_back(ScatterMatrix(s), 0.5 * static_cast<double>(q), 2.0);
    p(static_cast<Eigen::Index>(k)) = std::max(mass[k], 1e-12);
  }
  return MixtureModel(std::move(comps), p / p.sum());
}

namespace {

// Drops components whose mixing probability is exactly zero.
bool prune_empty(MixtureModel& model, std::vector<std::string>& warnings) {
  if (model.size() == 1) return false;
  std::vector<EgdParams> kept;
  std::vector<double> probs;
  for (std::size_t k = 0; k < model.size(); ++k) {
    if (model.mix_probs(static_cast<Eigen::Index>(k)) > 0.0) {
      kept.push_back(model.components[k]);
      probs.push_back(model.mix_probs(static_cast<Eigen::Index>(k)));
    } else {
      warnings.push_back("component " + std::to_string(k) + " has zero weight; removed");
    }
  }
  if (kept.size() == model.size() || kept.empty()) return false;
  Vector p = Eigen::Map<Vector>(probs.data(), static_cast<Eigen::Index>(probs.size()));
  model = MixtureModel(std::move(kept), p / p.sum());
  return true;
}

}  // namespace

EmReport fit_mixture(const Dataset& data, const EmConfig& cfg) {
  if (cfg.K < 1) throw DomainError("EM: K must be at least 1");
  if (data.size() < static_cast<Eigen::Index>(cfg.K) * data.dim()) {
    throw DataError("EM: need at least K*q samples");
  }
  const auto start = Clock::now();
  auto ms = [&] {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  };
  const double n_eff = data.total_weight();

  EmReport report(initial_mixture(data, cfg));
  EStepResult e = e_step(report.model, data);
  report.trace.push_back({0, 0, e.total_loglik, e.total_loglik / n_eff, ms()});

  auto record = [&](int round, int stage) {
    report.trace.push_back({round, stage, e.total_loglik, e.total_loglik / n_eff, ms()});
  };
  auto note_degenerate = [&](const std::vector<bool>& flags, int round, const char* stage) {
    for (std::size_t k = 0; k < flags.size(); ++k) {
      if (flags[k]) {
        report.warnings.push_back("round " + std::to_string(round) + " " + stage +
                                  ": component " + std::to_string(k) +
                                  " degenerate, left unchanged");
      }
    }
  };

  for (int round = 1; round <= cfg.outer_rounds; ++round) {
    const double round_start = e.total_loglik / n_eff;

    for (int s = 0; s < cfg.stage1_sweeps; ++s) {
      MStepResult m = m_step_scatter(data, e.resp, report.model, cfg.scatter_fit);
      note_degenerate(m.degenerate, round, "scatter");
      report.model = std::move(m.model);
      // Dropped components carry zero probability, so the likelihood is unchanged.
      prune_empty(report.model, report.warnings);
      e = e_step(report.model, data);
      record(round, 1);
    }

    for (int s = 0; s < cfg.stage2_sweeps; ++s) {
      const double before = e.total_loglik / n_eff;
      MStepResult m = m_step_shape(data, e.resp, report.model);
      note_degenerate(m.degenerate, round, "shape");
      report.model = std::move(m.model);
      prune_empty(report.model, report.warnings);
      e = e_step(report.model, data);
      record(round, 2);
      if (std::abs(e.total_loglik / n_eff - before) < cfg.tol) break;
    }

    report.rounds = round;
    if (std::abs(e.total_loglik / n_eff - round_start) < cfg.tol) {
      report.converged = true;
      break;
    }
  }
  report.responsibilities = std::move(e.resp);
  report.final_avg_loglik = e.total_loglik / n_eff;
  return report;
}

double pooled_marginal_entropy(const Matrix& values) {
  const auto N = static_cast<double>(values.size());
  if (values.size() < 2) throw DataError("entropy: need at least two values");
  const double lo = values.minCoeff();
  const double hi = values.maxCoeff();
  if (!(hi > lo)) throw DataError("entropy: all values are equal");
  const auto bins = static_cast<Eigen::Index>(std::ceil(std::cbrt(N)));
  const double width = (hi - lo) / static_cast<double>(bins);
  std::vector<double> count(static_cast<std::size_t>(bins), 0.0);
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
      auto b = static_cast<Eigen::Index>((values(i, j) - lo) / width);
      b = std::clamp<Eigen::Index>(b, 0, bins - 1);
      count[static_cast<std::size_t>(b)] += 1.0;
    }
  }
  double h = 0.0;
  for (double c : count) {
    if (c > 0.0) {
      const double p = c / N;
      h -= p * std::log(p / width);
    }
  }
  return h;
}

double mi_rate_from_entropy(double avg_loglik_per_patch, double entropy_nats,
                            Eigen::Index q) {
  if (q < 2) throw DomainError("MI rate is undefined for q < 2");
  return (entropy_nats + avg_loglik_per_patch / static_cast<double>(q - 1)) /
         std::numbers::ln2;
}

double mi_rate(double avg_loglik_per_patch, const Dataset& pixels, Eigen::Index q) {
  if (q < 2) throw DomainError("MI rate is undefined for q < 2");
  return mi_rate_from_entropy(avg_loglik_per_patch, pooled_marginal_entropy(pixels.samples()), q);
}

Matrix preprocess_patches(const Matrix& raw, double noise_fraction, std::uint64_t seed) {
  if (!(noise_fraction >= 0.0) || !std::isfinite(noise_fraction)) {
    throw DomainError("noise fraction must be nonnegative");
  }
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    for (Eigen::Index j = 0; j < raw.cols(); ++j) {
      if (!(raw(i, j) > 0.0) || !std::isfinite(raw(i, j))) {
        throw DataError("nonpositive intensity at row " + std::to_string(i) + ", column " +
                        std::to_string(j));
      }
    }
  }
  Matrix out = raw.array().log().matrix();
  if (noise_fraction == 0.0 || out.size() < 2) return out;

  const double mean = out.mean();
  const double var = (out.array() - mean).square().sum() / static_cast<double>(out.size() - 1);
  const double sd = std::sqrt(noise_fraction * var);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sd);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) += noise(rng);
  }
  return out;
}

}  // namespace egd
