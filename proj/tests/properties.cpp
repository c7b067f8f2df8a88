#include "properties.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "surme/diagnostics.hpp"
#include "surme/gibbs.hpp"
#include "surme/mfvb.hpp"

namespace surme::testing {

namespace {

double moment_gap(const Moments& m, double mean, double var) {
  return std::max(std::abs(m.mean - mean) / m.se_mean(), std::abs(m.var() - var) / m.se_var());
}

double normal_score(const gibbs::NormalConditional& c, const std::function<VectorXd()>& draw, int draws) {
  const Index k = c.mean.size();
  std::vector<Moments> m(static_cast<std::size_t>(k));
  for (int r = 0; r < draws; ++r) {
    const VectorXd x = draw();
    for (Index j = 0; j < k; ++j) m[static_cast<std::size_t>(j)].add(x(j));
  }
  double worst = 0.0;
  for (Index j = 0; j < k; ++j) worst = std::max(worst, moment_gap(m[static_cast<std::size_t>(j)], c.mean(j), c.cov(j, j)));
  return worst;
}

double invgamma_score(const gibbs::InvGammaConditional& c, const std::function<double()>& draw, int draws) {
  Moments m;
  for (int r = 0; r < draws; ++r) m.add(draw());
  const double mean = c.rate / (c.shape - 1.0);
  return moment_gap(m, mean, mean * mean / (c.shape - 2.0));
}

std::vector<double> features(const ParamState& s) {
  return {s.beta(0),  s.beta(3),  s.gamma(0), s.gamma(1), s.omega(1), std::log(s.sigma_eps(0, 0)), s.sigma_eps(0, 1),
          std::log(s.sigma_eps(1, 1)), std::log(s.sigma_z2), std::log(s.sigma_u2)};
}

const char* const kFeatureNames[] = {"beta_1_1",     "beta_2_2", "gamma_1",      "gamma_2",      "omega_1_2",
                                     "log sigma_11", "sigma_12", "log sigma_22", "log sigma_z2", "log sigma_u2"};

}  // namespace

double max_grid_tv(const Toy& toy) {
  const Problem p = validate(toy.data, toy.priors);
  const ParamState base = toy.state;
  double worst = 0.0;
  auto normal_line = [&](const gibbs::NormalConditional& c, const VectorXd& at, Index j,
                         const std::function<void(ParamState&, double)>& set) {
    const auto [mu, var] = normal_coordinate(c.mean, c.cov.matrix(), at, j);
    const double sd = std::sqrt(var);
    auto f = [&](double t) { return -0.5 * (t - mu) * (t - mu) / var; };
    auto g = [&](double t) {
      ParamState s = base;
      set(s, t);
      return log_joint(s, toy.data, toy.priors);
    };
    worst = std::max(worst, grid_tv(f, g, mu - 10.0 * sd, mu + 10.0 * sd));
  };

  const auto cb = gibbs::beta_conditional(base, p);
  for (Index j = 0; j < base.beta.size(); ++j)
    normal_line(cb, base.beta, j, [j](ParamState& s, double t) { s.beta(j) = t; });
  const auto cg = gibbs::gamma_conditional(base, p);
  for (Index j = 0; j < base.gamma.size(); ++j)
    normal_line(cg, base.gamma, j, [j](ParamState& s, double t) { s.gamma(j) = t; });
  if (toy.priors.exposure) {
    const auto co = gibbs::omega_conditional(base, p);
    for (Index j = 0; j < base.omega.size(); ++j)
      normal_line(co, base.omega, j, [j](ParamState& s, double t) { s.omega(j) = t; });
  } else {
    const auto cm = gibbs::mu_conditional(base, p);
    for (Index j = 0; j < base.mu.size(); ++j)
      normal_line(cm, base.mu, j, [j](ParamState& s, double t) { s.mu(j) = t; });
  }
  const auto cz = gibbs::z_conditional(base, p);
  for (Index i = 0; i < base.z.rows(); ++i) {
    const gibbs::NormalConditional row{cz.mean.row(i).transpose(), cz.cov};
    for (Index j = 0; j < base.z.cols(); ++j)
      normal_line(row, base.z.row(i).transpose(), j, [i, j](ParamState& s, double t) { s.z(i, j) = t; });
  }

  auto ig_line = [&](const gibbs::InvGammaConditional& c, const std::function<void(ParamState&, double)>& set) {
    auto f = [&](double t) { return invgamma_logpdf(t, c.shape, c.rate); };
    auto g = [&](double t) {
      ParamState s = base;
      set(s, t);
      return log_joint(s, toy.data, toy.priors);
    };
    const auto [lo, hi] = support_window(f, 1e-6, 20.0 * c.rate / c.shape + 1.0);
    worst = std::max(worst, grid_tv(f, g, lo, hi));
  };
  ig_line(gibbs::sigma_z2_conditional(base, p), [](ParamState& s, double t) { s.sigma_z2 = t; });
  ig_line(gibbs::sigma_u2_conditional(base, p), [](ParamState& s, double t) { s.sigma_u2 = t; });

  // Precision lines through each entry (symmetric perturbation off the diagonal).
  const auto cw = gibbs::sigma_eps_conditional(base, p);
  const MatrixXd p0 = base.sigma_eps.inverse();
  const Index m = p0.rows();
  for (Index a = 0; a < m; ++a) {
    for (Index b = a; b < m; ++b) {
      MatrixXd e = MatrixXd::Zero(m, m);
      e(a, b) = e(b, a) = 1.0;
      auto f = [&](double t) { return wishart_log_kernel(p0 + t * e, cw.df, cw.scale.matrix()); };
      auto g = [&](double t) {
        const MatrixXd prec = p0 + t * e;
        if (prec.llt().info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
        return log_joint_with_precision(base, prec, toy.data, toy.priors);
      };
      const double span = 30.0 * p0.cwiseAbs().maxCoeff();
      const auto [lo, hi] = support_window(f, -span, span);
      worst = std::max(worst, grid_tv(f, g, lo, hi));
    }
  }
  return worst;
}

std::vector<MomentScore> conditional_moment_scores(int draws, std::uint64_t seed) {
  const auto toy = make_toy(6, {2, 3}, true, 26);
  const Problem p = validate(toy.data, toy.priors);
  const ParamState& s = toy.state;
  RngStream rng(seed);
  std::vector<MomentScore> out;

  out.push_back({"beta", normal_score(gibbs::beta_conditional(s, p), [&] { return gibbs::update_beta(s, p, rng); }, draws)});
  out.push_back(
      {"gamma", normal_score(gibbs::gamma_conditional(s, p), [&] { return gibbs::update_gamma(s, p, rng); }, draws)});
  out.push_back(
      {"omega", normal_score(gibbs::omega_conditional(s, p), [&] { return gibbs::update_omega(s, p, rng); }, draws)});
  out.push_back({"sigma_z2", invgamma_score(gibbs::sigma_z2_conditional(s, p),
                                            [&] { return gibbs::update_sigma_z2(s, p, rng); }, draws)});
  out.push_back({"sigma_u2", invgamma_score(gibbs::sigma_u2_conditional(s, p),
                                            [&] { return gibbs::update_sigma_u2(s, p, rng); }, draws)});

  {
    const auto c = gibbs::z_conditional(s, p);
    const Index n = s.z.rows();
    const Index m = s.z.cols();
    std::vector<Moments> mom(static_cast<std::size_t>(n * m));
    for (int r = 0; r < draws; ++r) {
      const MatrixXd z = gibbs::update_z(s, p, rng);
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < m; ++j) mom[static_cast<std::size_t>(i * m + j)].add(z(i, j));
    }
    double worst = 0.0;
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < m; ++j)
        worst = std::max(worst, moment_gap(mom[static_cast<std::size_t>(i * m + j)], c.mean(i, j), c.cov(j, j)));
    out.push_back({"z", worst});
  }

  {
    // Wishart moments: E = df S, Var(W_ab) = df (S_ab^2 + S_aa S_bb).
    const auto c = gibbs::sigma_eps_conditional(s, p);
    const MatrixXd sc = c.scale.matrix();
    const Index m = sc.rows();
    std::vector<Moments> mom(static_cast<std::size_t>(m * m));
    for (int r = 0; r < draws; ++r) {
      const MatrixXd prec = gibbs::update_sigma_eps(s, p, rng).inverse();
      for (Index a = 0; a < m; ++a)
        for (Index b = a; b < m; ++b) mom[static_cast<std::size_t>(a * m + b)].add(prec(a, b));
    }
    double worst = 0.0;
    for (Index a = 0; a < m; ++a) {
      for (Index b = a; b < m; ++b) {
        const double var = c.df * (sc(a, b) * sc(a, b) + sc(a, a) * sc(b, b));
        worst = std::max(worst, moment_gap(mom[static_cast<std::size_t>(a * m + b)], c.df * sc(a, b), var));
      }
    }
    out.push_back({"sigma_eps precision", worst});
  }

  {
    const auto t = make_toy(6, {2, 3}, false, 27);
    const Problem q = validate(t.data, t.priors);
    out.push_back(
        {"mu", normal_score(gibbs::mu_conditional(t.state, q), [&] { return gibbs::update_mu(t.state, q, rng); }, draws)});
  }
  return out;
}

ParamState prior_draw(const PriorSpec& p, const SurDataset& shape, RngStream& rng) {
  ParamState s;
  s.beta = sample_mvn(p.beta0, p.B0, rng);
  s.gamma = sample_mvn(p.gamma0, p.G0, rng);
  s.sigma_eps = sample_wishart(p.nu0, p.S0, rng).inverse_pd("sigma_eps");
  s.omega = sample_mvn(p.omega0, p.O0, rng);
  s.sigma_z2 = sample_invgamma(p.delta1, p.delta2, rng);
  s.sigma_u2 = sample_invgamma(p.delta3, p.delta4, rng);
  s.z = MatrixXd::Zero(shape.n(), shape.m());
  return s;
}

void simulate_data(ParamState& s, SurDataset& d, RngStream& rng) {
  const Index n = d.n();
  const Index m = d.m();
  const MatrixXd xo = d.apply(s.omega);
  const MatrixXd xb = d.apply(s.beta);
  const MatrixXd l = s.sigma_eps.lower();
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) {
      s.z(i, j) = xo(i, j) + std::sqrt(s.sigma_z2) * rng.normal();
      d.w(i, j) = s.z(i, j) + std::sqrt(s.sigma_u2) * rng.normal();
    }
    const VectorXd e = l * rng.normal_vector(m);
    for (Index j = 0; j < m; ++j) d.y(i, j) = xb(i, j) + s.gamma(j) * s.z(i, j) + e(j);
  }
}

double qq_discrepancy(std::vector<double> prior, std::vector<double> chain) {
  std::sort(prior.begin(), prior.end());
  std::sort(chain.begin(), chain.end());
  double worst = 0.0;
  for (int k = 1; k < 100; ++k) {
    const double p = k / 100.0;
    const double q = prior[static_cast<std::size_t>(p * static_cast<double>(prior.size() - 1))];
    const double f = static_cast<double>(std::upper_bound(chain.begin(), chain.end(), q) - chain.begin()) /
                     static_cast<double>(chain.size());
    worst = std::max(worst, std::abs(f - p));
  }
  return worst;
}

std::vector<QqScore> joint_prior_invariance(int sweeps, std::uint64_t seed) {
  Toy toy = make_toy(4, {2, 2}, true, 41);
  const PriorSpec pr = toy.priors;
  const std::size_t nf = std::size(kFeatureNames);

  RngStream rng(seed);
  std::vector<std::vector<double>> prior_f(nf), chain_f(nf);
  for (int r = 0; r < sweeps; ++r) {
    const auto f = features(prior_draw(pr, toy.data, rng));
    for (std::size_t k = 0; k < nf; ++k) prior_f[k].push_back(f[k]);
  }

  SurDataset d = toy.data;
  ParamState s = prior_draw(pr, d, rng);
  simulate_data(s, d, rng);
  for (int r = 0; r < sweeps; ++r) {
    const Problem p(d, pr);
    gibbs::sweep(s, p, rng);
    const auto f = features(s);
    for (std::size_t k = 0; k < nf; ++k) chain_f[k].push_back(f[k]);
    simulate_data(s, d, rng);
  }

  std::vector<QqScore> out;
  for (std::size_t k = 0; k < nf; ++k) out.push_back({kFeatureNames[k], qq_discrepancy(prior_f[k], chain_f[k])});
  return out;
}

McCheck integrated_loglik_mc(const Toy& toy, int draws, std::uint64_t seed) {
  const ParamState& s = toy.state;
  const auto& d = toy.data;
  const Index m = d.m();
  const MatrixXd xb = d.apply(s.beta);
  const MatrixXd xo = d.apply(s.omega);
  RngStream rng(seed);
  McCheck out;
  double var_total = 0.0;
  std::vector<double> logs(static_cast<std::size_t>(draws));
  for (Index i = 0; i < d.n(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int r = 0; r < draws; ++r) {
      VectorXd z(m);
      for (Index j = 0; j < m; ++j) z(j) = xo(i, j) + std::sqrt(s.sigma_z2) * rng.normal();
      const double l = mvn_logpdf(d.y.row(i).transpose(), xb.row(i).transpose() + z.cwiseProduct(s.gamma),
                                  s.sigma_eps.matrix()) +
                       mvn_logpdf(d.w.row(i).transpose(), z, s.sigma_u2 * MatrixXd::Identity(m, m));
      logs[static_cast<std::size_t>(r)] = l;
      mx = std::max(mx, l);
    }
    double mean = 0.0;
    double sq = 0.0;
    for (double l : logs) {
      const double e = std::exp(l - mx);
      mean += e;
      sq += e * e;
    }
    mean /= draws;
    const double var = sq / draws - mean * mean;
    out.mc += mx + std::log(mean);
    var_total += var / draws / (mean * mean);
  }
  out.se = std::sqrt(var_total);
  out.exact = diag::integrated_loglik(s, d);
  return out;
}

std::size_t elbo_decreases(const Problem& p, double rel_tol) {
  mfvb::FitOptions opt;
  opt.tol = 1e-12;
  opt.max_cycles = 3000;
  const auto res = mfvb::cavi_fit(p, opt);
  const auto& tr = res.state.elbo_trace;
  std::size_t bad = 0;
  double prev = mfvb::elbo(mfvb::initial_state(p), p);
  for (double e : tr) {
    if (e < prev - rel_tol * std::abs(prev)) ++bad;
    prev = e;
  }
  return bad;
}

double geweke_acceptance(int runs, std::size_t length, std::uint64_t seed) {
  RngStream rng(seed);
  std::vector<double> x(length);
  int accepted = 0;
  for (int r = 0; r < runs; ++r) {
    for (auto& xi : x) xi = rng.normal();
    if (std::abs(diag::geweke_cd(x).statistic) < 1.96) ++accepted;
  }
  return static_cast<double>(accepted) / runs;
}

}  // namespace surme::testing
