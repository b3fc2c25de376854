#include "egd/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "egd/density.hpp"
#include "egd/errors.hpp"
#include "egd/io.hpp"
#include "egd/mixture.hpp"
#include "egd/scatter_ml.hpp"
#include "egd/seed.hpp"

namespace egd::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

/// Usage problems detected after CLI11 parsing (flag combinations, ranges).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct SampleOptions {
  std::string model;
  std::optional<Eigen::Index> dim;
  std::optional<double> a;
  std::optional<double> b;
  std::string scatter;
  long long n = -1;
  std::uint64_t seed = 0;
  std::string out;
};

struct FitOptions {
  std::string data;
  double a = 0.0;
  double b = 0.0;
  std::string weights;
  std::string init = "sample-cov";
  std::string alpha_rule = "eigen";
  std::string algo = "fp";
  double tol = 1e-6;
  int max_iter = 1000;
  std::string out;
  std::string trace;
  bool no_timing = false;
};

struct FitMixtureOptions {
  std::string data;
  std::string weights;
  std::size_t k = 1;
  std::uint64_t seed = 0;
  int rounds = 100;
  int stage2_sweeps = 50;
  double tol = 1e-7;
  std::string init = "random";
  std::string out;
  std::string trace;
  bool no_timing = false;
};

struct EvalOptions {
  std::string data;
  std::string model;
  bool mi_rate = false;
  int splits = 0;
  std::uint64_t seed = 0;
};

struct BenchOptions {
  Eigen::Index dim = 0;
  double a = 0.0;
  std::optional<double> b;
  long long n = 0;
  int trials = 1;
  std::uint64_t seed = 0;
  std::vector<std::string> algos = {"fp-eigen", "fp-trace", "kent-tyler"};
  std::vector<std::string> inits = {"identity", "sample-cov"};
  double tol = 1e-6;
  int max_iter = 1000;
  std::string out_dir;
  bool no_timing = false;
};

struct PreprocessOptions {
  std::string data;
  double noise_fraction = 0.0;
  std::uint64_t seed = 0;
  std::string out;
};

Vector read_weights(const std::string& path, Eigen::Index n) {
  const Matrix w = io::read_matrix(path);
  if (w.size() != n || (w.rows() != 1 && w.cols() != 1)) {
    throw DataError("weights file must hold a single row or column of " + std::to_string(n) +
                    " values");
  }
  return Eigen::Map<const Vector>(w.data(), n);
}

Dataset load_dataset(const std::string& data_path, const std::string& weights_path) {
  Matrix x = io::read_matrix(data_path);
  if (weights_path.empty()) return Dataset(std::move(x));
  Vector w = read_weights(weights_path, x.rows());
  return Dataset(std::move(x), std::move(w));
}

MixtureModel single_component(const EgdParams& p) {
  return MixtureModel({p}, Vector::Ones(1));
}

// ---------------------------------------------------------------- sample

int cmd_sample(const SampleOptions& o, std::ostream&, std::ostream& err) {
  const bool explicit_params = o.dim || o.a || o.b || !o.scatter.empty();
  if (!o.model.empty() && explicit_params) {
    throw UsageError("--model conflicts with --dim/--a/--b/--scatter");
  }
  if (o.model.empty() && !(o.a && o.b && (o.dim || !o.scatter.empty()))) {
    throw UsageError("give either --model or --a, --b and one of --dim/--scatter");
  }
  if (o.n <= 0) throw UsageError("--n must be positive");

  std::optional<MixtureModel> model;
  if (!o.model.empty()) {
    model = io::read_model(o.model).model;
  } else {
    Matrix s;
    if (!o.scatter.empty()) {
      s = io::read_matrix(o.scatter);
      if (o.dim && *o.dim != s.rows()) throw UsageError("--dim disagrees with --scatter");
    } else {
      if (*o.dim < 1) throw UsageError("--dim must be positive");
      s = Matrix::Identity(*o.dim, *o.dim);
    }
    ScatterMatrix scatter = [&] {
      try {
        return ScatterMatrix(s);
      } catch (const DomainError& e) {
        throw DataError(std::string("scatter: ") + e.what());
      }
    }();
    model = single_component(EgdParams(std::move(scatter), *o.a, *o.b));
  }

  const auto n = static_cast<std::size_t>(o.n);
  const std::uint64_t stream = derive_seed(o.seed, "sample");
  Matrix x = model->size() == 1 ? egd::sample(model->components.front(), n, stream).samples()
                                : sample_mixture(*model, n, stream).data.samples();

  err << "sample: seed=" << o.seed << " n=" << n << " dim=" << model->dim()
      << " components=" << model->size() << '\n';
  for (std::size_t k = 0; k < model->size(); ++k) {
    const auto& c = model->components[k];
    err << "  component " << k << ": weight=" << io::format_double(model->mix_probs(static_cast<Eigen::Index>(k)))
        << " a=" << io::format_double(c.shape_a) << " b=" << io::format_double(c.scale_b) << '\n';
  }
  io::write_matrix(o.out, x, io::format_for_path(o.out));
  return kExitOk;
}

// ---------------------------------------------------------------- fit

FixedPointConfig fit_config(const std::string& init, const std::string& alpha_rule, double tol,
                            int max_iter) {
  FixedPointConfig cfg;
  if (init == "identity") {
    cfg.init = InitKind::identity;
  } else if (init == "sample-cov") {
    cfg.init = InitKind::sample_covariance;
  } else {
    cfg.init = InitKind::user;
    cfg.user_init = io::read_matrix(init);
  }
  if (alpha_rule == "eigen") {
    cfg.alpha_rule = AlphaRule::eigen;
  } else if (alpha_rule == "trace") {
    cfg.alpha_rule = AlphaRule::trace;
  } else {
    throw UsageError("--alpha-rule must be eigen or trace");
  }
  cfg.tol = tol;
  cfg.max_iter = max_iter;
  try {
    cfg.validate();
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

json fit_info_json(const FitReport& r, const FixedPointConfig& cfg, const std::string& init,
                   const std::string& alpha_rule) {
  json info;
  info["algorithm"] = to_string(r.algorithm);
  info["iterations"] = r.iterations;
  info["converged"] = r.converged;
  info["near_singular"] = r.near_singular;
  info["tol"] = cfg.tol;
  info["max_iter"] = cfg.max_iter;
  info["init"] = init;
  info["alpha_rule"] = alpha_rule;
  info["initial_avg_loglik"] = r.initial_avg_loglik;
  info["final_avg_loglik"] = r.final_avg_loglik;
  if (std::isfinite(r.final_residual)) info["final_residual"] = r.final_residual;
  if (!r.message.empty()) info["message"] = r.message;
  return info;
}

int cmd_fit(const FitOptions& o, std::ostream& out, std::ostream& err) {
  if (o.algo != "fp" && o.algo != "kent-tyler") throw UsageError("--algo must be fp or kent-tyler");
  const FixedPointConfig cfg = fit_config(o.init, o.alpha_rule, o.tol, o.max_iter);
  const Dataset data = load_dataset(o.data, o.weights);

  std::optional<FitReport> report;
  try {
    report = o.algo == "fp" ? fit_scatter(data, o.a, o.b, cfg)
                            : fit_kent_tyler(data, o.a, o.b, cfg);
  } catch (const RegimeError& e) {
    throw UsageError(e.what());
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }

  const EgdParams params(report->sigma_hat, o.a, o.b);
  io::write_model(o.out, single_component(params), fit_info_json(*report, cfg, o.init, o.alpha_rule));
  if (!o.trace.empty()) io::write_fit_trace(fs::path(o.trace), *report, !o.no_timing);

  out << "algorithm " << to_string(report->algorithm) << '\n'
      << "iterations " << report->iterations << '\n'
      << "converged " << (report->converged ? "true" : "false") << '\n'
      << "avg_loglik " << io::format_double(report->final_avg_loglik) << '\n';
  if (report->near_singular) err << "warning: iterate became nearly singular\n";
  if (!report->converged && !report->message.empty()) err << report->message << '\n';
  if (!report->converged) {
    err << "fit: no convergence after " << report->iterations << " iterations; model written\n";
    return kExitNotConverged;
  }
  return kExitOk;
}

// ---------------------------------------------------------------- fit-mixture

int cmd_fit_mixture(const FitMixtureOptions& o, std::ostream& out, std::ostream& err) {
  if (o.k < 1) throw UsageError("--k must be at least 1");
  if (o.rounds < 1) throw UsageError("--rounds must be at least 1");
  if (!(o.tol > 0.0)) throw UsageError("--tol must be positive");

  EmConfig cfg;
  cfg.K = o.k;
  cfg.seed = o.seed;
  cfg.outer_rounds = o.rounds;
  cfg.stage2_sweeps = o.stage2_sweeps;
  cfg.tol = o.tol;
  if (o.init == "random") {
    cfg.init = EmInit::random_assignment;
  } else if (o.init == "kmeans") {
    cfg.init = EmInit::kmeans_on_radii;
  } else {
    cfg.init = EmInit::user_model;
    cfg.user_model = io::read_model(o.init).model;
  }

  const Dataset data = load_dataset(o.data, o.weights);
  const EmReport report = fit_mixture(data, cfg);

  json info;
  info["method"] = "em";
  info["k_requested"] = o.k;
  info["k_final"] = report.model.size();
  info["rounds"] = report.rounds;
  info["converged"] = report.converged;
  info["tol"] = o.tol;
  info["max_rounds"] = o.rounds;
  info["stage2_sweeps"] = o.stage2_sweeps;
  info["scatter_tol"] = cfg.scatter_fit.tol;
  info["seed"] = o.seed;
  info["init"] = o.init;
  info["final_avg_loglik"] = report.final_avg_loglik;
  info["warnings"] = report.warnings;
  io::write_model(o.out, report.model, info);
  if (!o.trace.empty()) io::write_em_trace(fs::path(o.trace), report, !o.no_timing);

  for (const auto& w : report.warnings) err << "warning: " << w << '\n';
  out << "components " << report.model.size() << '\n'
      << "rounds " << report.rounds << '\n'
      << "converged " << (report.converged ? "true" : "false") << '\n'
      << "avg_loglik " << io::format_double(report.final_avg_loglik) << '\n';
  if (!report.converged) {
    err << "fit-mixture: no convergence after " << report.rounds << " rounds; model written\n";
    return kExitNotConverged;
  }
  return kExitOk;
}

// ---------------------------------------------------------------- eval

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

int cmd_eval(const EvalOptions& o, std::ostream& out, std::ostream&) {
  const io::ModelFile mf = io::read_model(o.model);
  const Matrix x = io::read_matrix(o.data);
  const Eigen::Index q = mf.model.dim();
  if (x.cols() != q) {
    throw DataError("data has " + std::to_string(x.cols()) + " columns, model expects " +
                    std::to_string(q));
  }
  if (o.splits < 0) throw UsageError("--splits must be nonnegative");
  if (o.mi_rate && q < 2) throw UsageError("--mi-rate needs dim >= 2");

  const Dataset data(x);
  const double total = e_step(mf.model, data).total_loglik;
  const double avg = total / data.total_weight();
  out << "n " << data.size() << '\n'
      << "total_loglik " << io::format_double(total) << '\n'
      << "avg_loglik " << io::format_double(avg) << '\n';
  if (o.mi_rate) out << "mi_rate_bits_per_pixel " << fixed4(mi_rate(avg, data, q)) << '\n';

  if (o.splits > 0) {
    const auto S = static_cast<Eigen::Index>(o.splits);
    if (data.size() < S) throw DataError("fewer samples than --splits");
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(data.size()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::mt19937_64 rng(derive_seed(o.seed, "eval-splits"));
    std::shuffle(idx.begin(), idx.end(), rng);

    std::vector<double> avgs;
    std::vector<double> rates;
    for (Eigen::Index s = 0; s < S; ++s) {
      const Eigen::Index lo = s * data.size() / S;
      const Eigen::Index hi = (s + 1) * data.size() / S;
      Matrix part(hi - lo, q);
      for (Eigen::Index i = lo; i < hi; ++i) part.row(i - lo) = x.row(idx[static_cast<std::size_t>(i)]);
      const Dataset split(std::move(part));
      const double a = e_step(mf.model, split).total_loglik / split.total_weight();
      avgs.push_back(a);
      if (o.mi_rate) rates.push_back(mi_rate(a, split, q));
    }
    auto mean_std = [](const std::vector<double>& v) {
      const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      double ss = 0.0;
      for (double e : v) ss += (e - m) * (e - m);
      const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
      return std::pair{m, sd};
    };
    const auto [am, as] = mean_std(avgs);
    out << "splits " << S << '\n'
        << "split_avg_loglik_mean " << fixed4(am) << '\n'
        << "split_avg_loglik_std " << fixed4(as) << '\n';
    if (o.mi_rate) {
      const auto [rm, rs] = mean_std(rates);
      out << "split_mi_rate_mean " << fixed4(rm) << '\n'
          << "split_mi_rate_std " << fixed4(rs) << '\n';
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------- bench

struct BenchRun {
  int trial = 0;
  std::string algo;
  std::string init;
  int iterations = 0;
  bool converged = false;
  double final_avg_loglik = 0.0;
  double elapsed_ms = 0.0;
};

struct BenchAlgo {
  bool kent_tyler = false;
  AlphaRule rule = AlphaRule::eigen;
};

BenchAlgo parse_algo(const std::string& name) {
  if (name == "fp" || name == "fp-eigen") return {false, AlphaRule::eigen};
  if (name == "fp-trace") return {false, AlphaRule::trace};
  if (name == "kent-tyler") return {true, AlphaRule::eigen};
  throw UsageError("unknown algorithm '" + name + "' (expected fp-eigen, fp-trace, kent-tyler)");
}

unsigned bench_threads(int trials) {
  unsigned threads = 1;
  if (const char* env = std::getenv("EGD_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) threads = static_cast<unsigned>(v);
  }
  return std::min<unsigned>(threads, static_cast<unsigned>(std::max(trials, 1)));
}

std::string trace_name(int trial, const std::string& algo, const std::string& init) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "trial_%04d", trial);
  return std::string(buf) + "_" + algo + "_" + init + ".csv";
}

std::vector<BenchRun> bench_trial(const BenchOptions& o, double b, int trial,
                                  const fs::path& dir) {
  const ScatterMatrix sigma = random_scatter(o.dim, derive_seed(o.seed, "bench-scatter",
                                                                static_cast<std::uint64_t>(trial)));
  const EgdParams params(sigma, o.a, b);
  const Dataset data = egd::sample(params, static_cast<std::size_t>(o.n),
                                   derive_seed(o.seed, "bench-data", static_cast<std::uint64_t>(trial)));
  std::vector<BenchRun> runs;
  for (const auto& name : o.algos) {
    const BenchAlgo algo = parse_algo(name);
    for (const auto& init : o.inits) {
      FixedPointConfig cfg;
      cfg.init = init == "identity" ? InitKind::identity : InitKind::sample_covariance;
      cfg.alpha_rule = algo.rule;
      cfg.tol = o.tol;
      cfg.max_iter = o.max_iter;
      cfg.residual_check = false;
      const FitReport r = algo.kent_tyler ? fit_kent_tyler(data, o.a, b, cfg)
                                          : fit_scatter(data, o.a, b, cfg);
      io::write_fit_trace(dir / trace_name(trial, name, init), r, !o.no_timing);
      runs.push_back({trial, name, init, r.iterations, r.converged, r.final_avg_loglik,
                      r.elapsed_ms.empty() ? 0.0 : r.elapsed_ms.back()});
    }
  }
  return runs;
}

int cmd_bench(const BenchOptions& o, std::ostream& out, std::ostream& err) {
  if (o.dim < 1) throw UsageError("--dim must be positive");
  if (o.n < 1) throw UsageError("--n must be positive");
  if (o.trials < 1) throw UsageError("--trials must be positive");
  if (!(o.a > 0.0)) throw UsageError("--a must be positive");
  const double b = o.b.value_or(static_cast<double>(o.dim) / o.a);
  if (!(b > 0.0)) throw UsageError("--b must be positive");
  for (const auto& name : o.algos) {
    if (parse_algo(name).kent_tyler && o.a >= 0.5 * static_cast<double>(o.dim)) {
      throw UsageError("kent-tyler requires a < dim/2");
    }
  }
  for (const auto& init : o.inits) {
    if (init != "identity" && init != "sample-cov") {
      throw UsageError("unknown init '" + init + "' (expected identity, sample-cov)");
    }
  }

  const fs::path dir(o.out_dir);
  fs::create_directories(dir);

  std::vector<std::vector<BenchRun>> per_trial(static_cast<std::size_t>(o.trials));
  std::vector<std::string> failures(static_cast<std::size_t>(o.trials));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int t = next++; t < o.trials; t = next++) {
      try {
        per_trial[static_cast<std::size_t>(t)] = bench_trial(o, b, t, dir);
      } catch (const std::exception& e) {
        failures[static_cast<std::size_t>(t)] = e.what();
      }
    }
  };
  const unsigned threads = bench_threads(o.trials);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (std::size_t t = 0; t < failures.size(); ++t) {
    if (!failures[t].empty()) throw DataError("trial " + std::to_string(t) + ": " + failures[t]);
  }

  std::ofstream runs_csv(dir / "runs.csv", std::ios::binary | std::ios::trunc);
  runs_csv << "trial,algo,init,iterations,converged,final_avg_loglik,elapsed_ms\n";
  struct Agg {
    int runs = 0;
    int converged = 0;
    double iterations = 0.0;
    double loglik = 0.0;
    double elapsed = 0.0;
  };
  std::vector<std::pair<std::string, std::string>> order;
  std::map<std::pair<std::string, std::string>, Agg> agg;
  double max_spread = 0.0;
  bool any_unconverged = false;
  for (const auto& trial : per_trial) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& r : trial) {
      runs_csv << r.trial << ',' << r.algo << ',' << r.init << ',' << r.iterations << ','
               << (r.converged ? 1 : 0) << ',' << io::format_double(r.final_avg_loglik) << ',';
      if (!o.no_timing) runs_csv << io::format_double(r.elapsed_ms);
      runs_csv << '\n';
      const auto key = std::pair{r.algo, r.init};
      if (!agg.count(key)) order.push_back(key);
      auto& g = agg[key];
      ++g.runs;
      g.converged += r.converged ? 1 : 0;
      g.iterations += r.iterations;
      g.loglik += r.final_avg_loglik;
      g.elapsed += r.elapsed_ms;
      lo = std::min(lo, r.final_avg_loglik);
      hi = std::max(hi, r.final_avg_loglik);
      any_unconverged = any_unconverged || !r.converged;
    }
    if (!trial.empty()) max_spread = std::max(max_spread, hi - lo);
  }

  std::ofstream summary(dir / "summary.csv", std::ios::binary | std::ios::trunc);
  summary << "algo,init,runs,converged,mean_iterations,mean_final_avg_loglik,mean_elapsed_ms\n";
  for (const auto& key : order) {
    const Agg& g = agg[key];
    summary << key.first << ',' << key.second << ',' << g.runs << ',' << g.converged << ','
            << io::format_double(g.iterations / g.runs) << ','
            << io::format_double(g.loglik / g.runs) << ',';
    if (!o.no_timing) summary << io::format_double(g.elapsed / g.runs);
    summary << '\n';
  }
  if (!runs_csv || !summary) throw DataError("failed writing bench output in " + dir.string());

  out << "trials " << o.trials << '\n'
      << "max_loglik_spread " << io::format_double(max_spread) << '\n';
  if (any_unconverged) err << "bench: some runs hit --max-iter\n";
  return kExitOk;
}

// ---------------------------------------------------------------- preprocess

int cmd_preprocess(const PreprocessOptions& o, std::ostream&, std::ostream& err) {
  if (!(o.noise_fraction >= 0.0)) throw UsageError("--noise-fraction must be nonnegative");
  const Matrix raw = io::read_matrix(o.data);
  const Matrix y = preprocess_patches(raw, o.noise_fraction, derive_seed(o.seed, "preprocess"));
  io::write_matrix(o.out, y, io::format_for_path(o.out));
  err << "preprocess: seed=" << o.seed << " noise_fraction=" << io::format_double(o.noise_fraction)
      << " rows=" << y.rows() << " cols=" << y.cols() << '\n';
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Elliptical gamma distribution fitting, sampling and evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "egd 0.1.0");

  SampleOptions so;
  auto* sample_cmd = app.add_subcommand("sample", "Draw samples from an EGD or EGD mixture");
  sample_cmd->add_option("--model", so.model, "Model file (JSON)");
  sample_cmd->add_option("--dim", so.dim, "Dimension (identity scatter unless --scatter)");
  sample_cmd->add_option("--a", so.a, "Shape parameter a");
  sample_cmd->add_option("--b", so.b, "Scale parameter b");
  sample_cmd->add_option("--scatter", so.scatter, "Scatter matrix file");
  sample_cmd->add_option("--n", so.n, "Number of samples")->required();
  sample_cmd->add_option("--seed", so.seed, "Master seed");
  sample_cmd->add_option("--out", so.out, "Output matrix file (.csv or binary)")->required();

  FitOptions fo;
  auto* fit_cmd = app.add_subcommand("fit", "Maximum-likelihood scatter for fixed (a, b)");
  fit_cmd->add_option("--data", fo.data, "Data matrix file")->required();
  fit_cmd->add_option("--a", fo.a, "Shape parameter a")->required();
  fit_cmd->add_option("--b", fo.b, "Scale parameter b")->required();
  fit_cmd->add_option("--weights", fo.weights, "Per-sample weights file");
  fit_cmd->add_option("--init", fo.init, "identity, sample-cov or a scatter matrix file");
  fit_cmd->add_option("--alpha-rule", fo.alpha_rule, "eigen or trace");
  fit_cmd->add_option("--algo", fo.algo, "fp or kent-tyler");
  fit_cmd->add_option("--tol", fo.tol, "Stop when |Δ avg log-likelihood| < tol");
  fit_cmd->add_option("--max-iter", fo.max_iter, "Iteration cap");
  fit_cmd->add_option("--out", fo.out, "Output model file")->required();
  fit_cmd->add_option("--trace", fo.trace, "Per-iteration trace CSV");
  fit_cmd->add_flag("--no-timing", fo.no_timing, "Leave elapsed_ms empty in the trace");

  FitMixtureOptions mo;
  auto* mix_cmd = app.add_subcommand("fit-mixture", "EM fit of a K-component EGD mixture");
  mix_cmd->add_option("--data", mo.data, "Data matrix file")->required();
  mix_cmd->add_option("--weights", mo.weights, "Per-sample weights file");
  mix_cmd->add_option("--k", mo.k, "Number of components")->required();
  mix_cmd->add_option("--seed", mo.seed, "Master seed");
  mix_cmd->add_option("--rounds", mo.rounds, "Maximum outer rounds");
  mix_cmd->add_option("--stage2-sweeps", mo.stage2_sweeps, "Maximum shape sweeps per round");
  mix_cmd->add_option("--tol", mo.tol, "Stop when |Δ avg log-likelihood| per round < tol");
  mix_cmd->add_option("--init", mo.init, "random, kmeans or a model file");
  mix_cmd->add_option("--out", mo.out, "Output model file")->required();
  mix_cmd->add_option("--trace", mo.trace, "Per-sweep trace CSV");
  mix_cmd->add_flag("--no-timing", mo.no_timing, "Leave elapsed_ms empty in the trace");

  EvalOptions eo;
  auto* eval_cmd = app.add_subcommand("eval", "Log-likelihood and MI rate of data under a model");
  eval_cmd->add_option("--data", eo.data, "Data matrix file")->required();
  eval_cmd->add_option("--model", eo.model, "Model file")->required();
  eval_cmd->add_flag("--mi-rate", eo.mi_rate, "Also report the MI rate in bits/pixel");
  eval_cmd->add_option("--splits", eo.splits, "Report mean and std over this many random splits");
  eval_cmd->add_option("--seed", eo.seed, "Seed for the split permutation");

  BenchOptions bo;
  auto* bench_cmd = app.add_subcommand("bench", "Compare fixed-point algorithms on synthetic data");
  bench_cmd->add_option("--dim", bo.dim, "Dimension q")->required();
  bench_cmd->add_option("--a", bo.a, "Shape parameter a")->required();
  bench_cmd->add_option("--b", bo.b, "Scale parameter b (default q/a)");
  bench_cmd->add_option("--n", bo.n, "Samples per trial")->required();
  bench_cmd->add_option("--trials", bo.trials, "Number of trials");
  bench_cmd->add_option("--seed", bo.seed, "Master seed");
  bench_cmd->add_option("--algos", bo.algos, "Comma-separated: fp-eigen, fp-trace, kent-tyler")
      ->delimiter(',');
  bench_cmd->add_option("--inits", bo.inits, "Comma-separated: identity, sample-cov")
      ->delimiter(',');
  bench_cmd->add_option("--tol", bo.tol, "Stop when |Δ avg log-likelihood| < tol");
  bench_cmd->add_option("--max-iter", bo.max_iter, "Iteration cap");
  bench_cmd->add_option("--out-dir", bo.out_dir, "Output directory")->required();
  bench_cmd->add_flag("--no-timing", bo.no_timing, "Leave timing columns empty");

  PreprocessOptions po;
  auto* pre_cmd = app.add_subcommand("preprocess", "Log-transform patches and add noise");
  pre_cmd->add_option("--data", po.data, "Raw patch matrix file")->required();
  pre_cmd->add_option("--noise-fraction", po.noise_fraction, "Noise variance / pooled variance")
      ->required();
  pre_cmd->add_option("--seed", po.seed, "Master seed");
  pre_cmd->add_option("--out", po.out, "Output matrix file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (sample_cmd->parsed()) return cmd_sample(so, out, err);
    if (fit_cmd->parsed()) return cmd_fit(fo, out, err);
    if (mix_cmd->parsed()) return cmd_fit_mixture(mo, out, err);
    if (eval_cmd->parsed()) return cmd_eval(eo, out, err);
    if (bench_cmd->parsed()) return cmd_bench(bo, out, err);
    if (pre_cmd->parsed()) return cmd_preprocess(po, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const DomainError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const RegimeError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitUsage;
}

}  // namespace egd::cli
