#include "surme/mfvb.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/distributions/inverse_gamma.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/digamma.hpp>

#include "surme/diagnostics.hpp"
#include "surme/gibbs.hpp"
#include "surme/summary.hpp"

namespace surme::mfvb {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double multivariate_lgamma(double a, Index dim) {
  double out = 0.25 * static_cast<double>(dim * (dim - 1)) * std::log(std::numbers::pi);
  for (Index j = 1; j <= dim; ++j) out += std::lgamma(a + 0.5 * static_cast<double>(1 - j));
  return out;
}

// E_q log|Sigma_eps^{-1}|.
double expected_log_det_precision(const VariationalState& s) {
  const Index m = s.B_q_Sigma.dim();
  double out = static_cast<double>(m) * std::log(2.0) + s.B_q_Sigma.log_det();
  for (Index j = 1; j <= m; ++j) out += boost::math::digamma(0.5 * (s.nu1 + 1.0 - static_cast<double>(j)));
  return out;
}

// E_q log sigma^2 under IG(shape, rate).
double expected_log_variance(double shape, double rate) { return std::log(rate) - boost::math::digamma(shape); }

double normal_entropy(const PdMatrix& cov) {
  return 0.5 * static_cast<double>(cov.dim()) * (1.0 + kLog2Pi) + 0.5 * cov.log_det();
}

double invgamma_entropy(double shape, double rate) {
  return shape + std::log(rate) + std::lgamma(shape) - (1.0 + shape) * boost::math::digamma(shape);
}

// E log N(x; m0, S0) for x ~ N(mean, cov), with prec0 = S0^{-1}.
double normal_prior_term(const VectorXd& mean, const PdMatrix& cov, const VectorXd& m0, const PdMatrix& s0,
                         const MatrixXd& prec0) {
  const VectorXd d = mean - m0;
  return -0.5 * (static_cast<double>(mean.size()) * kLog2Pi + s0.log_det() + d.dot(prec0 * d) +
                 (prec0.cwiseProduct(cov.matrix())).sum());
}

double invgamma_prior_term(double shape0, double rate0, double shape, double rate) {
  return shape0 * std::log(rate0) - std::lgamma(shape0) -
         (shape0 + 1.0) * expected_log_variance(shape, rate) - rate0 * shape / rate;
}

// sum_i X_i S X_i' for a K x K matrix S (M x M).
MatrixXd design_sandwich(const SurDataset& d, const MatrixXd& s) {
  const Index m = d.m();
  MatrixXd out(m, m);
  for (Index a = 0; a < m; ++a) {
    const MatrixXd& xa = d.x[static_cast<std::size_t>(a)];
    for (Index b = a; b < m; ++b) {
      const MatrixXd& xb = d.x[static_cast<std::size_t>(b)];
      const MatrixXd block = s.block(d.offset(a), d.offset(b), xa.cols(), xb.cols());
      out(a, b) = out(b, a) = (xa * block).cwiseProduct(xb).sum();
    }
  }
  return out;
}

// E_q sum_i r_i r_i' with r_i = y_i - X_i beta - diag(z_i) gamma.
MatrixXd expected_residual_cross(const VariationalState& s, const Problem& p) {
  const auto& d = p.data();
  const double n = static_cast<double>(d.n());
  const MatrixXd e = d.y - d.apply(s.mu_q_beta) - s.mu_q_Z * s.mu_q_gamma.asDiagonal();
  const MatrixXd gamma_second = s.Sigma_q_gamma.matrix() + s.mu_q_gamma * s.mu_q_gamma.transpose();
  return e.transpose() * e + design_sandwich(d, s.Sigma_q_beta.matrix()) +
         (s.mu_q_Z.transpose() * s.mu_q_Z).cwiseProduct(s.Sigma_q_gamma.matrix()) +
         n * s.Sigma_q_Z.matrix().cwiseProduct(gamma_second);
}

// E_q sum_i ||z_i - latent mean_i||^2.
double expected_latent_ss(const VariationalState& s, const Problem& p) {
  const auto& d = p.data();
  const double n = static_cast<double>(d.n());
  const double tr_z = n * s.Sigma_q_Z.matrix().trace();
  if (p.priors().exposure) {
    return (s.mu_q_Z - d.apply(s.mu_q_omega)).squaredNorm() + tr_z +
           p.gram().cwiseProduct(s.Sigma_q_omega.matrix()).sum();
  }
  const MatrixXd centred = s.mu_q_Z.rowwise() - s.mu_q_mu.transpose();
  return centred.squaredNorm() + tr_z + n * s.Sigma_q_mu.matrix().trace();
}

double expected_reading_ss(const VariationalState& s, const Problem& p) {
  const auto& d = p.data();
  return (d.w - s.mu_q_Z).squaredNorm() + static_cast<double>(d.n()) * s.Sigma_q_Z.matrix().trace();
}

template <typename F>
auto run_step(const char* label, F&& f) {
  try {
    return f();
  } catch (const PdFailure& err) {
    throw PdFailure(err.matrix_name(), std::string("update step (") + label + ")");
  }
}

// Covariance and mean of a Gaussian factor from its precision and linear term.
std::pair<PdMatrix, VectorXd> gaussian_factor(const MatrixXd& precision, const VectorXd& b,
                                              std::string_view name) {
  const PdMatrix prec(precision, name);
  VectorXd mean = prec.solve(b);
  return {prec.inverse_pd(name), std::move(mean)};
}

}  // namespace

VariationalState initial_state(const Problem& p) {
  const auto& d = p.data();
  const auto& pr = p.priors();
  const double nm = static_cast<double>(d.n() * d.m());
  const double v = std::max(gibbs::exposure_residual_variance(d), 1e-8);
  VariationalState s;
  s.mu_q_beta = pr.beta0;
  s.Sigma_q_beta = pr.B0;
  s.mu_q_gamma = pr.gamma0;
  s.Sigma_q_gamma = pr.G0;
  s.nu1 = pr.nu0 + static_cast<double>(d.n());
  s.B_q_Sigma = PdMatrix(pr.S0.matrix() * (pr.nu0 / s.nu1), "B_q(Sigma)");
  if (pr.exposure) {
    s.mu_q_omega = pr.omega0;
    s.Sigma_q_omega = pr.O0;
  } else {
    s.mu_q_mu = pr.mu0;
    s.Sigma_q_mu = PdMatrix::diagonal(VectorXd::Constant(d.m(), pr.sigma_mu2), "Sigma_q(mu)");
  }
  s.mu_q_Z = d.w;
  s.Sigma_q_Z = PdMatrix::diagonal(VectorXd::Constant(d.m(), 0.16 * v), "Sigma_q(Z)");
  s.delta1_star = pr.delta1 + 0.5 * nm;
  s.delta3_star = pr.delta3 + 0.5 * nm;
  s.B_q_sigmaZ2 = s.delta1_star * 0.8 * v;
  s.B_q_sigmaU2 = s.delta3_star * 0.2 * v;
  return s;
}

VariationalState cavi_cycle(const VariationalState& state, const Problem& p) {
  const auto& d = p.data();
  const auto& pr = p.priors();
  const Index m = d.m();
  const double n = static_cast<double>(d.n());
  VariationalState s = state;
  s.delta1_star = pr.delta1 + 0.5 * n * static_cast<double>(m);
  s.delta3_star = pr.delta3 + 0.5 * n * static_cast<double>(m);
  s.nu1 = pr.nu0 + n;

  // (a), (b)
  run_step("a", [&] {
    const MatrixXd prec_eps = s.precision_mean();
    const MatrixXd ystar = d.y - s.mu_q_Z * s.mu_q_gamma.asDiagonal();
    auto [cov, mean] = gaussian_factor(p.weighted_gram(prec_eps) + p.B0_inv(),
                                       d.apply_transpose(ystar * prec_eps) + p.B0_inv_beta0(), "Sigma_q(beta)");
    s.Sigma_q_beta = std::move(cov);
    s.mu_q_beta = std::move(mean);
    return 0;
  });
  // (c), (d)
  run_step("c", [&] {
    const MatrixXd prec_eps = s.precision_mean();
    const MatrixXd zz = s.mu_q_Z.transpose() * s.mu_q_Z + n * s.Sigma_q_Z.matrix();
    const MatrixXd e = d.y - d.apply(s.mu_q_beta);
    auto [cov, mean] = gaussian_factor(
        zz.cwiseProduct(prec_eps) + p.G0_inv(),
        (e * prec_eps).cwiseProduct(s.mu_q_Z).colwise().sum().transpose() + p.G0_inv_gamma0(), "Sigma_q(gamma)");
    s.Sigma_q_gamma = std::move(cov);
    s.mu_q_gamma = std::move(mean);
    return 0;
  });
  // (e)
  run_step("e", [&] {
    const PdMatrix inv(p.S0_inv() + expected_residual_cross(s, p), "B_q(Sigma)^{-1}");
    s.B_q_Sigma = inv.inverse_pd("B_q(Sigma)");
    return 0;
  });
  // (f) uses the exact expectation, including tr(sum_i X_i Sigma_q(omega) X_i').
  s.B_q_sigmaZ2 = pr.delta2 + 0.5 * expected_latent_ss(s, p);
  // (g)
  s.B_q_sigmaU2 = pr.delta4 + 0.5 * expected_reading_ss(s, p);
  // (h), (i)
  run_step("h", [&] {
    const double tau_z = s.inv_sigma_z2_mean();
    if (pr.exposure) {
      auto [cov, mean] = gaussian_factor(tau_z * p.gram() + p.O0_inv(),
                                         tau_z * d.apply_transpose(s.mu_q_Z) + p.O0_inv_omega0(), "Sigma_q(omega)");
      s.Sigma_q_omega = std::move(cov);
      s.mu_q_omega = std::move(mean);
    } else {
      const double prec = n * tau_z + 1.0 / pr.sigma_mu2;
      s.Sigma_q_mu = PdMatrix::diagonal(VectorXd::Constant(m, 1.0 / prec), "Sigma_q(mu)");
      s.mu_q_mu = (tau_z * s.mu_q_Z.colwise().sum().transpose() + pr.mu0 / pr.sigma_mu2) / prec;
    }
    return 0;
  });
  // (j), (k)
  run_step("j", [&] {
    const MatrixXd prec_eps = s.precision_mean();
    const double tau_z = s.inv_sigma_z2_mean();
    const double tau_u = s.inv_sigma_u2_mean();
    const MatrixXd gamma_second = s.Sigma_q_gamma.matrix() + s.mu_q_gamma * s.mu_q_gamma.transpose();
    const PdMatrix prec(gamma_second.cwiseProduct(prec_eps) + (tau_z + tau_u) * MatrixXd::Identity(m, m),
                        "Sigma_q(Z)^{-1}");
    s.Sigma_q_Z = prec.inverse_pd("Sigma_q(Z)");
    const MatrixXd latent = pr.exposure ? d.apply(s.mu_q_omega)
                                        : MatrixXd(MatrixXd::Ones(d.n(), 1) * s.mu_q_mu.transpose());
    const MatrixXd rhs = (d.y - d.apply(s.mu_q_beta)) * prec_eps * s.mu_q_gamma.asDiagonal() + tau_u * d.w +
                         tau_z * latent;
    s.mu_q_Z = rhs * s.Sigma_q_Z.matrix();
    return 0;
  });
  s.cycles = state.cycles + 1;
  return s;
}

double elbo(const VariationalState& s, const Problem& p) {
  const auto& d = p.data();
  const auto& pr = p.priors();
  const Index m = d.m();
  const double n = static_cast<double>(d.n());
  const double md = static_cast<double>(m);
  const double nm = n * md;

  const double log_det_p = expected_log_det_precision(s);
  const double log_sz = expected_log_variance(s.delta1_star, s.B_q_sigmaZ2);
  const double log_su = expected_log_variance(s.delta3_star, s.B_q_sigmaU2);
  const double tau_z = s.inv_sigma_z2_mean();
  const double tau_u = s.inv_sigma_u2_mean();
  const MatrixXd prec_mean = s.precision_mean();

  double out = 0.0;
  if (d.n() > 0) {
    out += -0.5 * nm * kLog2Pi + 0.5 * n * log_det_p -
           0.5 * prec_mean.cwiseProduct(expected_residual_cross(s, p)).sum();
    out += -0.5 * nm * kLog2Pi - 0.5 * nm * log_su - 0.5 * tau_u * expected_reading_ss(s, p);
    out += -0.5 * nm * kLog2Pi - 0.5 * nm * log_sz - 0.5 * tau_z * expected_latent_ss(s, p);
  }

  out += normal_prior_term(s.mu_q_beta, s.Sigma_q_beta, pr.beta0, pr.B0, p.B0_inv());
  out += normal_prior_term(s.mu_q_gamma, s.Sigma_q_gamma, pr.gamma0, pr.G0, p.G0_inv());
  if (pr.exposure) {
    out += normal_prior_term(s.mu_q_omega, s.Sigma_q_omega, pr.omega0, pr.O0, p.O0_inv());
  } else {
    const PdMatrix mu_cov = PdMatrix::diagonal(VectorXd::Constant(m, pr.sigma_mu2), "mu prior");
    out += normal_prior_term(s.mu_q_mu, s.Sigma_q_mu, pr.mu0, mu_cov, mu_cov.inverse());
  }
  out += 0.5 * (pr.nu0 - md - 1.0) * log_det_p - 0.5 * p.S0_inv().cwiseProduct(prec_mean).sum() -
         0.5 * pr.nu0 * md * std::log(2.0) - 0.5 * pr.nu0 * pr.S0.log_det() - multivariate_lgamma(0.5 * pr.nu0, m);
  out += invgamma_prior_term(pr.delta1, pr.delta2, s.delta1_star, s.B_q_sigmaZ2);
  out += invgamma_prior_term(pr.delta3, pr.delta4, s.delta3_star, s.B_q_sigmaU2);

  out += normal_entropy(s.Sigma_q_beta) + normal_entropy(s.Sigma_q_gamma);
  out += pr.exposure ? normal_entropy(s.Sigma_q_omega) : normal_entropy(s.Sigma_q_mu);
  out += n * normal_entropy(s.Sigma_q_Z);
  out += -0.5 * (s.nu1 - md - 1.0) * log_det_p + 0.5 * s.nu1 * md + 0.5 * s.nu1 * md * std::log(2.0) +
         0.5 * s.nu1 * s.B_q_Sigma.log_det() + multivariate_lgamma(0.5 * s.nu1, m);
  out += invgamma_entropy(s.delta1_star, s.B_q_sigmaZ2) + invgamma_entropy(s.delta3_star, s.B_q_sigmaU2);
  return out;
}

VectorXd gamma_sd_correction(const VectorXd& sigma_gamma, const VariationalState& state) {
  if (!(state.delta1_star > 1.0)) {
    throw DomainError("gamma_sd_correction: E_q[sigma_z2] needs delta1_star > 1");
  }
  const double e_sz = state.B_q_sigmaZ2 / (state.delta1_star - 1.0);
  const double mk = static_cast<double>(state.mu_q_gamma.size() * state.mu_q_beta.size());
  return sigma_gamma * std::sqrt(mk / e_sz);
}

namespace {

ParamSummary normal_summary(const std::string& name, double mean, double sd, double z) {
  ParamSummary s;
  s.name = name;
  s.mean = mean;
  s.sd = sd;
  s.lower = mean - z * sd;
  s.upper = mean + z * sd;
  return s;
}

ParamSummary invgamma_summary(const std::string& name, double shape, double rate, double prob) {
  ParamSummary s;
  s.name = name;
  s.mean = shape > 1.0 ? rate / (shape - 1.0) : std::numeric_limits<double>::infinity();
  s.sd = shape > 2.0 ? s.mean / std::sqrt(shape - 2.0) : std::numeric_limits<double>::infinity();
  if (shape > 1e6) {
    // Boost's series gives up at huge shapes; Wilson-Hilferty is exact to O(1/shape) there.
    const boost::math::normal_distribution<double> std_normal;
    auto gamma_quantile = [shape, &std_normal](double q) {
      const double c = 1.0 / (9.0 * shape);
      const double t = 1.0 - c + boost::math::quantile(std_normal, q) * std::sqrt(c);
      return shape * t * t * t;
    };
    s.lower = rate / gamma_quantile(0.5 * (1.0 + prob));
    s.upper = rate / gamma_quantile(0.5 * (1.0 - prob));
    return s;
  }
  const boost::math::inverse_gamma_distribution<double> dist(shape, rate);
  s.lower = boost::math::quantile(dist, 0.5 * (1.0 - prob));
  s.upper = boost::math::quantile(dist, 0.5 * (1.0 + prob));
  return s;
}

}  // namespace

FitReport make_report(const VariationalState& state, const Problem& p, bool converged, double tol) {
  const auto& d = p.data();
  const auto& pr = p.priors();
  const Index m = d.m();
  const double prob = 0.95;
  const double z = boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 * (1.0 + prob));
  const auto names = surme_parameter_names(d.k_per_equation(), pr.exposure);

  FitReport report;
  report.method = "mfvb";
  report.interval_kind = "equal-tailed";
  report.interval_prob = prob;

  // Sigma_eps = inverse of a Wishart draw; moments and quantiles by a fixed-seed
  // Monte Carlo sample of q.
  constexpr Index kSigmaDraws = 4000;
  const Index n_sigma = m * (m + 1) / 2;
  MatrixXd sigma_draws(kSigmaDraws, n_sigma);
  RngStream rng(0x5eedULL);
  for (Index r = 0; r < kSigmaDraws; ++r) {
    const MatrixXd sigma = sample_wishart(state.nu1, state.B_q_Sigma, rng).inverse();
    Index pos = 0;
    for (Index a = 0; a < m; ++a) {
      for (Index b = a; b < m; ++b) sigma_draws(r, pos++) = sigma(a, b);
    }
  }
  const double dof = state.nu1 - static_cast<double>(m) - 1.0;
  const MatrixXd sigma_mean = dof > 0.0 ? MatrixXd(state.B_q_Sigma.inverse() / dof)
                                        : MatrixXd(MatrixXd::Constant(m, m, std::numeric_limits<double>::infinity()));

  const VectorXd gamma_sd = gamma_sd_correction(state.Sigma_q_gamma.matrix().diagonal().cwiseSqrt(), state);
  Index beta_i = 0;
  Index gamma_i = 0;
  Index sigma_i = 0;
  Index omega_i = 0;
  Index mu_i = 0;
  for (const auto& name : names) {
    if (name.rfind("beta_", 0) == 0) {
      report.params.push_back(normal_summary(name, state.mu_q_beta(beta_i),
                                             std::sqrt(state.Sigma_q_beta(beta_i, beta_i)), z));
      ++beta_i;
    } else if (name.rfind("gamma_", 0) == 0) {
      report.params.push_back(normal_summary(name, state.mu_q_gamma(gamma_i), gamma_sd(gamma_i), z));
      ++gamma_i;
    } else if (name == "sigma_z2") {
      report.params.push_back(invgamma_summary(name, state.delta1_star, state.B_q_sigmaZ2, prob));
    } else if (name == "sigma_u2") {
      report.params.push_back(invgamma_summary(name, state.delta3_star, state.B_q_sigmaU2, prob));
    } else if (name.rfind("sigma_", 0) == 0) {
      const VectorXd col = sigma_draws.col(sigma_i);
      const std::span<const double> xs(col.data(), static_cast<std::size_t>(col.size()));
      ParamSummary ps;
      ps.name = name;
      Index a = 0;
      Index b = 0;
      for (Index count = sigma_i;; ++a) {
        if (count < m - a) {
          b = a + count;
          break;
        }
        count -= m - a;
      }
      ps.mean = sigma_mean(a, b);
      ps.sd = std::sqrt((col.array() - col.mean()).square().sum() / static_cast<double>(col.size() - 1));
      const auto iv = diag::equal_tailed(xs, prob);
      ps.lower = iv.lower;
      ps.upper = iv.upper;
      report.params.push_back(std::move(ps));
      ++sigma_i;
    } else if (name.rfind("omega_", 0) == 0) {
      report.params.push_back(normal_summary(name, state.mu_q_omega(omega_i),
                                             std::sqrt(state.Sigma_q_omega(omega_i, omega_i)), z));
      ++omega_i;
    } else if (name.rfind("mu_", 0) == 0) {
      report.params.push_back(normal_summary(name, state.mu_q_mu(mu_i), std::sqrt(state.Sigma_q_mu(mu_i, mu_i)), z));
      ++mu_i;
    }
  }
  report.error_correlations = error_correlations(sigma_mean);
  const double e_sz = report.at("sigma_z2").mean;
  const double e_su = report.at("sigma_u2").mean;
  if (std::isfinite(e_sz) && std::isfinite(e_su)) report.reliability_ratio = reliability_ratio(e_sz, e_su);

  VariationalInfo info;
  info.cycles = state.cycles;
  info.converged = converged;
  info.tol = tol;
  info.elbo = state.elbo_trace.empty() ? elbo(state, p) : state.elbo_trace.back();
  info.elbo_trace = state.elbo_trace;
  report.variational = info;
  attach_truth(report, d);
  return report;
}

MfvbResult cavi_fit(const Problem& p, const FitOptions& options) {
  if (!(options.tol > 0.0)) throw DomainError("cavi_fit: tol must be positive");
  if (options.max_cycles < 1) throw DomainError("cavi_fit: max_cycles must be at least 1");
  const auto start = std::chrono::steady_clock::now();
  VariationalState s = initial_state(p);
  double previous = elbo(s, p);
  bool converged = false;
  while (s.cycles < options.max_cycles) {
    s = cavi_cycle(s, p);
    const double current = elbo(s, p);
    s.elbo_trace.push_back(current);
    const double gain = (current - previous) / std::abs(previous);
    previous = current;
    if (gain < options.tol) {
      converged = true;
      break;
    }
  }
  FitReport report = make_report(s, p, converged, options.tol);
  report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(s), std::move(report), converged};
}

}  // namespace surme::mfvb
