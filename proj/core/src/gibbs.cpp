#include "surme/gibbs.hpp"

#include <algorithm>
#include <chrono>

#include <Eigen/QR>

#include "surme/summary.hpp"

namespace surme::gibbs {

namespace {

MatrixXd precision_of(const ParamState& s) { return s.sigma_eps.inverse(); }

// N x M residuals y_i - X_i beta - diag(gamma) z_i.
MatrixXd full_residual(const ParamState& s, const Problem& p) {
  const auto& d = p.data();
  return d.y - d.apply(s.beta) - s.z * s.gamma.asDiagonal();
}

NormalConditional from_canonical(const MatrixXd& precision, const VectorXd& b, std::string_view name) {
  const PdMatrix prec(precision, name);
  PdMatrix cov = prec.inverse_pd(name);
  VectorXd mean = prec.solve(b);
  return {std::move(mean), std::move(cov)};
}

InvGammaConditional inv_gamma(double shape0, double rate0, double count, double ss) {
  return {shape0 + 0.5 * count, rate0 + 0.5 * ss};
}

}  // namespace

NormalConditional beta_conditional(const ParamState& s, const Problem& p) {
  const auto& d = p.data();
  const MatrixXd prec_eps = precision_of(s);
  const MatrixXd ystar = d.y - s.z * s.gamma.asDiagonal();
  const MatrixXd precision = p.weighted_gram(prec_eps) + p.B0_inv();
  const VectorXd b = d.apply_transpose(ystar * prec_eps) + p.B0_inv_beta0();
  return from_canonical(precision, b, "beta precision");
}

NormalConditional gamma_conditional(const ParamState& s, const Problem& p) {
  const auto& d = p.data();
  const MatrixXd prec_eps = precision_of(s);
  const MatrixXd e = d.y - d.apply(s.beta);
  const MatrixXd precision = (s.z.transpose() * s.z).cwiseProduct(prec_eps) + p.G0_inv();
  const VectorXd b = (e * prec_eps).cwiseProduct(s.z).colwise().sum().transpose() + p.G0_inv_gamma0();
  return from_canonical(precision, b, "gamma precision");
}

WishartConditional sigma_eps_conditional(const ParamState& s, const Problem& p) {
  const MatrixXd r = full_residual(s, p);
  const PdMatrix inv_scale(p.S0_inv() + r.transpose() * r, "Sigma_eps scale");
  return {p.priors().nu0 + static_cast<double>(p.data().n()), inv_scale.inverse_pd("Sigma_eps scale")};
}

LatentConditional z_conditional(const ParamState& s, const Problem& p) {
  const auto& d = p.data();
  const Index m = d.m();
  const MatrixXd prec_eps = precision_of(s);
  const double tau = 1.0 / s.sigma_z2 + 1.0 / s.sigma_u2;
  const MatrixXd precision = (s.gamma * s.gamma.transpose()).cwiseProduct(prec_eps) +
                             tau * MatrixXd::Identity(m, m);
  PdMatrix cov = PdMatrix(precision, "latent precision").inverse_pd("latent covariance");
  const MatrixXd e = d.y - d.apply(s.beta);
  const MatrixXd rhs = e * prec_eps * s.gamma.asDiagonal() + d.w / s.sigma_u2 + p.latent_mean(s) / s.sigma_z2;
  MatrixXd mean = rhs * cov.matrix();
  return {std::move(mean), std::move(cov)};
}

NormalConditional omega_conditional(const ParamState& s, const Problem& p) {
  const MatrixXd precision = p.gram() / s.sigma_z2 + p.O0_inv();
  const VectorXd b = p.data().apply_transpose(s.z) / s.sigma_z2 + p.O0_inv_omega0();
  return from_canonical(precision, b, "omega precision");
}

InvGammaConditional sigma_z2_conditional(const ParamState& s, const Problem& p) {
  const auto& d = p.data();
  const double count = static_cast<double>(d.n() * d.m());
  return inv_gamma(p.priors().delta1, p.priors().delta2, count, (s.z - p.latent_mean(s)).squaredNorm());
}

InvGammaConditional sigma_u2_conditional(const ParamState& s, const Problem& p) {
  const auto& d = p.data();
  const double count = static_cast<double>(d.n() * d.m());
  return inv_gamma(p.priors().delta3, p.priors().delta4, count, (d.w - s.z).squaredNorm());
}

NormalConditional mu_conditional(const ParamState& s, const Problem& p) {
  const auto& pr = p.priors();
  const Index m = p.data().m();
  const double prec = static_cast<double>(p.data().n()) / s.sigma_z2 + 1.0 / pr.sigma_mu2;
  VectorXd mean = (s.z.colwise().sum().transpose() / s.sigma_z2 + pr.mu0 / pr.sigma_mu2) / prec;
  return {std::move(mean), PdMatrix::diagonal(VectorXd::Constant(m, 1.0 / prec), "mu covariance")};
}

VectorXd update_beta(const ParamState& s, const Problem& p, RngStream& rng) {
  const auto c = beta_conditional(s, p);
  return sample_mvn(c.mean, c.cov, rng);
}

VectorXd update_gamma(const ParamState& s, const Problem& p, RngStream& rng) {
  const auto c = gamma_conditional(s, p);
  return sample_mvn(c.mean, c.cov, rng);
}

PdMatrix update_sigma_eps(const ParamState& s, const Problem& p, RngStream& rng) {
  const auto c = sigma_eps_conditional(s, p);
  return sample_wishart(c.df, c.scale, rng).inverse_pd("Sigma_eps");
}

MatrixXd update_z(const ParamState& s, const Problem& p, RngStream& rng) {
  const auto c = z_conditional(s, p);
  const Index n = c.mean.rows();
  const Index m = c.mean.cols();
  MatrixXd noise(n, m);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) noise(i, j) = rng.normal();
  }
  return c.mean + noise * c.cov.lower().transpose();
}

VectorXd update_omega(const ParamState& s, const Problem& p, RngStream& rng) {
  const auto c = omega_conditional(s, p);
  return sample_mvn(c.mean, c.cov, rng);
}

double update_sigma_z2(const ParamState& s, const Problem& p, RngStream& rng) {
  const auto c = sigma_z2_conditional(s, p);
  return sample_invgamma(c.shape, c.rate, rng);
}

double update_sigma_u2(const ParamState& s, const Problem& p, RngStream& rng) {
  const auto c = sigma_u2_conditional(s, p);
  return sample_invgamma(c.shape, c.rate, rng);
}

VectorXd update_mu(const ParamState& s, const Problem& p, RngStream& rng) {
  const auto c = mu_conditional(s, p);
  return sample_mvn(c.mean, c.cov, rng);
}

double exposure_residual_variance(const SurDataset& data) {
  double ss = 0.0;
  Index k = 0;
  for (Index eq = 0; eq < data.m(); ++eq) {
    const MatrixXd& x = data.x[static_cast<std::size_t>(eq)];
    const VectorXd coef = x.colPivHouseholderQr().solve(data.w.col(eq));
    ss += (data.w.col(eq) - x * coef).squaredNorm();
    k += x.cols();
  }
  const double dof = static_cast<double>(data.n() * data.m() - k);
  return ss / (dof > 0.0 ? dof : static_cast<double>(data.n() * data.m()));
}

ParamState initial_state(const Problem& p) {
  const auto& pr = p.priors();
  const auto& d = p.data();
  ParamState s;
  s.beta = pr.beta0;
  s.gamma = pr.gamma0;
  s.sigma_eps = PdMatrix(pr.S0.matrix() * pr.nu0, "prior precision mean").inverse_pd("Sigma_eps");
  if (pr.exposure) {
    s.omega = pr.omega0;
  } else {
    s.mu = pr.mu0;
  }
  const double v = std::max(exposure_residual_variance(d), 1e-8);
  s.sigma_z2 = 0.8 * v;
  s.sigma_u2 = 0.2 * v;
  s.z = d.w;
  return s;
}

void sweep(ParamState& s, const Problem& p, RngStream& rng) {
  s.beta = update_beta(s, p, rng);
  s.gamma = update_gamma(s, p, rng);
  s.sigma_eps = update_sigma_eps(s, p, rng);
  s.z = update_z(s, p, rng);
  if (p.priors().exposure) {
    s.omega = update_omega(s, p, rng);
  } else {
    s.mu = update_mu(s, p, rng);
  }
  s.sigma_z2 = update_sigma_z2(s, p, rng);
  s.sigma_u2 = update_sigma_u2(s, p, rng);
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

bool keeps(std::size_t t, const McmcConfig& cfg) {
  return t >= cfg.burnin && (t - cfg.burnin + 1) % cfg.thin == 0;
}

}  // namespace

GibbsResult gibbs_surme(const Problem& p, const McmcConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const auto retained = cfg.retained();
  const auto& d = p.data();
  const bool exposure = p.priors().exposure;

  GibbsChain chain;
  chain.model = ModelKind::surme;
  chain.exposure = exposure;
  chain.k_per_equation = d.k_per_equation();
  chain.names = surme_parameter_names(chain.k_per_equation, exposure);
  chain.config = cfg;
  chain.dataset_digest = dataset_digest(d);
  chain.draws.resize(static_cast<Index>(retained), static_cast<Index>(chain.names.size()));

  RngStream rng(cfg.seed);
  ParamState s = initial_state(p);
  MatrixXd z_mean = MatrixXd::Zero(d.n(), d.m());
  MatrixXd z_m2 = MatrixXd::Zero(d.n(), d.m());
  double z_count = 0.0;
  Index row = 0;
  for (std::size_t t = 0; t < cfg.draws && row < static_cast<Index>(retained); ++t) {
    sweep(s, p, rng);
    if (t < cfg.burnin) continue;
    // Welford update of the latent moments.
    z_count += 1.0;
    const MatrixXd delta = s.z - z_mean;
    z_mean += delta / z_count;
    z_m2 += delta.cwiseProduct(s.z - z_mean);
    if (keeps(t, cfg)) {
      chain.draws.row(row++) = flatten(s, exposure).transpose();
      if (cfg.store_latent) chain.z_draws.push_back(s.z);
    }
  }
  chain.z_mean = z_mean;
  chain.z_var = z_count > 1.0 ? MatrixXd(z_m2 / (z_count - 1.0)) : MatrixXd::Zero(d.n(), d.m());

  FitReport report = summarize_chain(chain, "gibbs-surme", d);
  report.runtime_seconds = seconds_since(start);
  return {std::move(chain), std::move(report)};
}

GibbsResult gibbs_sur(const Problem& p, const McmcConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const auto retained = cfg.retained();
  const auto& d = p.data();
  const auto& pr = p.priors();
  const Index m = d.m();
  const Index k = d.k();

  // Append w_m to each equation's design; gamma_m becomes its last coefficient.
  SurDataset aug;
  aug.y = d.y;
  aug.w = d.w;
  std::vector<Index> from;  // augmented position -> index into [beta; gamma]
  for (Index eq = 0; eq < m; ++eq) {
    const MatrixXd& x = d.x[static_cast<std::size_t>(eq)];
    MatrixXd xa(d.n(), x.cols() + 1);
    xa << x, d.w.col(eq);
    aug.x.push_back(std::move(xa));
    for (Index j = 0; j < x.cols(); ++j) from.push_back(d.offset(eq) + j);
    from.push_back(k + eq);
  }
  const Index ka = k + m;
  VectorXd mean0(ka);
  MatrixXd cov0 = MatrixXd::Zero(ka, ka);
  mean0 << pr.beta0, pr.gamma0;
  cov0.topLeftCorner(k, k) = pr.B0.matrix();
  cov0.bottomRightCorner(m, m) = pr.G0.matrix();
  PriorSpec apr;
  apr.beta0.resize(ka);
  MatrixXd b0(ka, ka);
  for (Index a = 0; a < ka; ++a) {
    apr.beta0(a) = mean0(from[static_cast<std::size_t>(a)]);
    for (Index b = 0; b < ka; ++b) b0(a, b) = cov0(from[static_cast<std::size_t>(a)], from[static_cast<std::size_t>(b)]);
  }
  apr.B0 = PdMatrix(b0, "B0");
  apr.gamma0 = VectorXd::Zero(m);
  apr.G0 = PdMatrix::identity(m);
  apr.nu0 = pr.nu0;
  apr.S0 = pr.S0;
  apr.exposure = false;
  apr.mu0 = VectorXd::Zero(m);
  const Problem ap = validate(std::move(aug), std::move(apr));

  GibbsChain chain;
  chain.model = ModelKind::sur;
  chain.exposure = false;
  chain.k_per_equation = d.k_per_equation();
  chain.names = sur_parameter_names(chain.k_per_equation);
  chain.config = cfg;
  chain.dataset_digest = dataset_digest(d);
  chain.draws.resize(static_cast<Index>(retained), static_cast<Index>(chain.names.size()));

  RngStream rng(cfg.seed);
  ParamState s;
  s.beta = ap.priors().beta0;
  s.gamma = VectorXd::Zero(m);
  s.z = MatrixXd::Zero(d.n(), m);
  s.sigma_eps = PdMatrix(pr.S0.matrix() * pr.nu0, "prior precision mean").inverse_pd("Sigma_eps");
  VectorXd row_buf(static_cast<Index>(chain.names.size()));
  Index row = 0;
  for (std::size_t t = 0; t < cfg.draws && row < static_cast<Index>(retained); ++t) {
    s.beta = update_beta(s, ap, rng);
    s.sigma_eps = update_sigma_eps(s, ap, rng);
    if (!keeps(t, cfg)) continue;
    for (Index a = 0; a < ka; ++a) row_buf(from[static_cast<std::size_t>(a)]) = s.beta(a);
    Index pos = ka;
    for (Index a = 0; a < m; ++a) {
      for (Index b = a; b < m; ++b) row_buf(pos++) = s.sigma_eps(a, b);
    }
    chain.draws.row(row++) = row_buf.transpose();
  }

  FitReport report = summarize_chain(chain, "gibbs-sur", d);
  report.runtime_seconds = seconds_since(start);
  return {std::move(chain), std::move(report)};
}

}  // namespace surme::gibbs
