#include "surme/simulate.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <thread>

#include <Eigen/QR>

#include "surme/gibbs.hpp"
#include "surme/summary.hpp"

namespace surme {

double DgpConfig::sigma_u2() const { return sigma_z2 * (1.0 - r_z) / r_z; }

void DgpConfig::validate() const {
  std::vector<std::string> problems;
  if (n < 1) problems.emplace_back("N must be positive");
  if (m < 1) problems.emplace_back("M must be positive");
  if (beta.size() != 3 * m) problems.emplace_back("beta must have 3M entries");
  if (omega.size() != 3 * m) problems.emplace_back("omega must have 3M entries");
  if (gamma.size() != m) problems.emplace_back("gamma must have M entries");
  if (sigma_eps.rows() != m || sigma_eps.cols() != m) problems.emplace_back("Sigma_eps must be M x M");
  if (!(sigma_z2 > 0.0)) problems.emplace_back("sigma_z2 must be positive");
  if (!(r_z > 0.0 && r_z <= 1.0)) problems.emplace_back("R_z must lie in (0, 1]");
  if (!problems.empty()) throw ValidationError(std::move(problems));
}

DgpConfig DgpConfig::preset(const std::string& label) {
  DgpConfig cfg;
  if (label == "I-1") {
    cfg.sigma_z2 = 1.0;
    cfg.r_z = 0.8;
  } else if (label == "I-2") {
    cfg.sigma_z2 = 0.0625;
    cfg.r_z = 0.8;
  } else if (label == "II-1") {
    cfg.sigma_z2 = 1.0;
    cfg.r_z = 0.5714;
  } else if (label == "II-2") {
    cfg.sigma_z2 = 0.0625;
    cfg.r_z = 0.5714;
  } else {
    throw ValidationError({"unknown case '" + label + "' (expected I-1, I-2, II-1 or II-2)"});
  }
  return cfg;
}

std::vector<std::string> DgpConfig::preset_labels() { return {"I-1", "I-2", "II-1", "II-2"}; }

SurDataset generate_dataset(const DgpConfig& cfg, RngStream& rng) {
  cfg.validate();
  const Index n = cfg.n;
  const Index m = cfg.m;
  const double sd_z = std::sqrt(cfg.sigma_z2);
  const double sd_u = std::sqrt(cfg.sigma_u2());
  const PdMatrix sigma(cfg.sigma_eps, "Sigma_eps");
  const MatrixXd l = sigma.lower();

  SurDataset d;
  d.y = MatrixXd::Zero(n, m);  // n() reads the row count of y
  d.x.assign(static_cast<std::size_t>(m), MatrixXd(n, 3));
  for (Index i = 0; i < n; ++i) {
    const double common = rng.uniform(0.0, 2.0);
    for (Index eq = 0; eq < m; ++eq) {
      auto& x = d.x[static_cast<std::size_t>(eq)];
      x(i, 0) = 1.0;
      x(i, 1) = common;
      x(i, 2) = rng.uniform(0.0, 4.0);
    }
  }
  for (Index eq = 0; eq < m; ++eq) {
    d.covariate_names.push_back({"__const__", "x_common", "x_excl_" + std::to_string(eq + 1)});
  }

  const MatrixXd latent = d.apply(cfg.omega);
  MatrixXd z(n, m);
  MatrixXd w(n, m);
  MatrixXd eps(n, m);
  for (Index i = 0; i < n; ++i) {
    for (Index eq = 0; eq < m; ++eq) z(i, eq) = latent(i, eq) + sd_z * rng.normal();
    for (Index eq = 0; eq < m; ++eq) w(i, eq) = z(i, eq) + (sd_u > 0.0 ? sd_u * rng.normal() : 0.0);
    VectorXd e(m);
    for (Index eq = 0; eq < m; ++eq) e(eq) = rng.normal();
    eps.row(i) = (l * e).transpose();
  }
  d.y = d.apply(cfg.beta) + z * cfg.gamma.asDiagonal() + eps;
  d.w = w;

  GroundTruth t;
  t.z = z;
  t.beta = cfg.beta;
  t.gamma = cfg.gamma;
  t.omega = cfg.omega;
  t.sigma_eps = cfg.sigma_eps;
  t.sigma_z2 = cfg.sigma_z2;
  t.sigma_u2 = cfg.sigma_u2();
  d.truth = std::move(t);
  return d;
}

FitReport fit_sur_fgls(const SurDataset& data) {
  const Index n = data.n();
  const Index m = data.m();
  const Index k = data.k();
  if (data.w.rows() != n || data.w.cols() != m) throw ValidationError({"W must be N x M"});
  if (n <= k + m) throw ValidationError({"FGLS needs N > K + M"});

  std::vector<MatrixXd> xa;
  MatrixXd resid(n, m);
  for (Index eq = 0; eq < m; ++eq) {
    const MatrixXd& x = data.x[static_cast<std::size_t>(eq)];
    MatrixXd a(n, x.cols() + 1);
    a << x, data.w.col(eq);
    const Eigen::ColPivHouseholderQR<MatrixXd> qr(a);
    if (qr.rank() < a.cols()) {
      throw RankError("design of equation " + std::to_string(eq + 1) + " is rank deficient");
    }
    resid.col(eq) = data.y.col(eq) - a * qr.solve(data.y.col(eq));
    xa.push_back(std::move(a));
  }
  const MatrixXd stage1 = resid.transpose() * resid / static_cast<double>(n);
  const MatrixXd prec = PdMatrix(stage1, "stage-1 Sigma_hat").inverse();

  // Stacked coefficient vector is per equation [beta_m; gamma_m].
  std::vector<Index> off(static_cast<std::size_t>(m) + 1, 0);
  for (Index eq = 0; eq < m; ++eq) off[static_cast<std::size_t>(eq) + 1] = off[static_cast<std::size_t>(eq)] + xa[static_cast<std::size_t>(eq)].cols();
  const Index ka = off.back();
  MatrixXd lhs(ka, ka);
  VectorXd rhs = VectorXd::Zero(ka);
  for (Index a = 0; a < m; ++a) {
    const auto& xa_a = xa[static_cast<std::size_t>(a)];
    for (Index b = 0; b < m; ++b) {
      const auto& xa_b = xa[static_cast<std::size_t>(b)];
      lhs.block(off[static_cast<std::size_t>(a)], off[static_cast<std::size_t>(b)], xa_a.cols(), xa_b.cols()) =
          prec(a, b) * xa_a.transpose() * xa_b;
      rhs.segment(off[static_cast<std::size_t>(a)], xa_a.cols()) += prec(a, b) * xa_a.transpose() * data.y.col(b);
    }
  }
  const PdMatrix info(lhs, "GLS information");
  const VectorXd coef = info.solve(rhs);
  const MatrixXd cov = info.inverse();
  for (Index eq = 0; eq < m; ++eq) {
    const auto& a = xa[static_cast<std::size_t>(eq)];
    resid.col(eq) = data.y.col(eq) - a * coef.segment(off[static_cast<std::size_t>(eq)], a.cols());
  }
  const MatrixXd sigma_hat = resid.transpose() * resid / static_cast<double>(n);

  FitReport report;
  report.method = "fgls";
  report.interval_kind = "normal-ci";
  report.interval_prob = 0.95;
  constexpr double z = 1.959963984540054;
  auto add = [&report](const std::string& name, double mean, double sd) {
    ParamSummary p;
    p.name = name;
    p.mean = mean;
    p.sd = sd;
    p.lower = mean - z * sd;
    p.upper = mean + z * sd;
    report.params.push_back(std::move(p));
  };
  for (Index eq = 0; eq < m; ++eq) {
    const Index kb = data.k_of(eq);
    for (Index j = 0; j < kb; ++j) {
      const Index pos = off[static_cast<std::size_t>(eq)] + j;
      add("beta_" + std::to_string(eq + 1) + "_" + std::to_string(j + 1), coef(pos), std::sqrt(cov(pos, pos)));
    }
  }
  for (Index eq = 0; eq < m; ++eq) {
    const Index pos = off[static_cast<std::size_t>(eq)] + data.k_of(eq);
    add("gamma_" + std::to_string(eq + 1), coef(pos), std::sqrt(cov(pos, pos)));
  }
  for (Index a = 0; a < m; ++a) {
    for (Index b = a; b < m; ++b) add("sigma_" + std::to_string(a + 1) + "_" + std::to_string(b + 1), sigma_hat(a, b), 0.0);
  }
  report.error_correlations = error_correlations(sigma_hat);
  attach_truth(report, data);
  return report;
}

FitReport run_estimator(const std::string& estimator, const SurDataset& data, const StudyOptions& options,
                        std::uint64_t seed) {
  if (estimator == "fgls") return fit_sur_fgls(data);
  const bool known = estimator == "gibbs-surme" || estimator == "gibbs-sur" || estimator == "mfvb";
  if (!known) {
    throw ValidationError({"unknown estimator '" + estimator + "' (expected fgls, gibbs-surme, gibbs-sur or mfvb)"});
  }
  PriorSpec priors = options.priors ? *options.priors : PriorSpec::defaults(data.k_per_equation());
  const Problem problem = validate(data, std::move(priors));
  if (estimator == "mfvb") return mfvb::cavi_fit(problem, options.mfvb).report;
  McmcConfig cfg = options.mcmc;
  cfg.seed = seed;
  return estimator == "gibbs-surme" ? gibbs::gibbs_surme(problem, cfg).report : gibbs::gibbs_sur(problem, cfg).report;
}

const StudyParam& StudySummary::at(const std::string& name) const {
  for (const auto& p : params) {
    if (p.name == name) return p;
  }
  throw Error("study summary has no parameter '" + name + "'");
}

StudySummary summarize_study(const std::string& estimator, const std::vector<FitReport>& reports,
                             std::size_t failures) {
  StudySummary s;
  s.estimator = estimator;
  s.reps = reports.size() + failures;
  s.failures = failures;
  if (reports.empty()) return s;
  const double count = static_cast<double>(reports.size());
  const auto& first = reports.front();
  for (std::size_t j = 0; j < first.params.size(); ++j) {
    StudyParam sp;
    sp.name = first.params[j].name;
    sp.truth = first.params[j].truth;
    double ineff = 0.0;
    bool has_ineff = true;
    for (const auto& r : reports) {
      const auto& p = r.params.at(j);
      sp.mean += p.mean;
      sp.sd += p.sd;
      sp.lower += p.lower;
      sp.upper += p.upper;
      if (p.diag && p.diag->chain_length >= 100) {
        ineff += p.diag->inefficiency_factor;
      } else {
        has_ineff = false;
      }
    }
    sp.mean /= count;
    sp.sd /= count;
    sp.lower /= count;
    sp.upper /= count;
    if (has_ineff) sp.inefficiency_factor = ineff / count;
    if (sp.truth && *sp.truth != 0.0) sp.relative_error = sp.mean / *sp.truth - 1.0;
    s.params.push_back(std::move(sp));
  }
  if (first.reliability_ratio) {
    double acc = 0.0;
    for (const auto& r : reports) acc += r.reliability_ratio.value_or(0.0);
    s.reliability_ratio = acc / count;
  }
  if (first.score) {
    ModelScore ms;
    for (const auto& r : reports) {
      ms.dic += r.score->dic;
      ms.p_d += r.score->p_d;
      ms.mean_deviance += r.score->mean_deviance;
      ms.deviance_at_mean += r.score->deviance_at_mean;
    }
    ms.dic /= count;
    ms.p_d /= count;
    ms.mean_deviance /= count;
    ms.deviance_at_mean /= count;
    s.score = ms;
  }
  if (first.variational) {
    double cycles = 0.0;
    double elbo = 0.0;
    for (const auto& r : reports) {
      cycles += static_cast<double>(r.variational->cycles);
      elbo += r.variational->elbo;
      if (r.variational->converged) ++s.converged;
    }
    s.mean_cycles = cycles / count;
    s.mean_elbo = elbo / count;
  }
  return s;
}

namespace {

unsigned worker_count(unsigned requested, std::size_t reps) {
  unsigned threads = requested;
  if (threads == 0) {
    if (const char* env = std::getenv("SURME_THREADS")) threads = static_cast<unsigned>(std::strtoul(env, nullptr, 10));
  }
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::min<std::size_t>(threads, reps));
}

}  // namespace

StudySummary replicate_study(const DgpConfig& cfg, const std::string& estimator, std::size_t reps,
                             const RngStream& rng, const StudyOptions& options) {
  if (reps < 1) throw ValidationError({"reps must be at least 1"});
  cfg.validate();
  std::vector<std::optional<FitReport>> results(reps);
  std::vector<std::string> errors(reps);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t r = next++; r < reps; r = next++) {
      RngStream stream = rng.derive(r);
      try {
        const SurDataset data = generate_dataset(cfg, stream);
        results[r] = run_estimator(estimator, data, options, splitmix64(stream.seed() ^ 0x9e3779b97f4a7c15ULL));
      } catch (const ValidationError&) {
        throw;
      } catch (const std::exception& err) {
        errors[r] = err.what();
      }
    }
  };
  const unsigned threads = worker_count(options.threads, reps);
  std::vector<std::exception_ptr> fatal(threads);
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        work();
      } catch (...) {
        fatal[t] = std::current_exception();
        next = reps;
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& f : fatal) {
    if (f) std::rethrow_exception(f);
  }

  std::vector<FitReport> ok;
  std::size_t failures = 0;
  std::vector<std::string> messages;
  for (std::size_t r = 0; r < reps; ++r) {
    if (results[r]) {
      ok.push_back(std::move(*results[r]));
    } else {
      ++failures;
      messages.push_back("replication " + std::to_string(r) + ": " + errors[r]);
    }
  }
  StudySummary s = summarize_study(estimator, ok, failures);
  s.failure_messages = std::move(messages);
  s.seed = rng.seed();
  return s;
}

}  // namespace surme
