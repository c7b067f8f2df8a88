#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "properties.hpp"
#include "surme/diagnostics.hpp"
#include "surme/gibbs.hpp"

using namespace surme;
using namespace surme::testing;

namespace {

std::vector<double> ar1(double rho, std::size_t n, std::uint64_t seed) {
  RngStream rng(seed);
  std::vector<double> x(n);
  double v = rng.normal() / std::sqrt(1.0 - rho * rho);
  for (auto& xi : x) {
    v = rho * v + rng.normal();
    xi = v;
  }
  return x;
}

std::vector<double> iid(std::size_t n, RngStream& rng) {
  std::vector<double> x(n);
  for (auto& xi : x) xi = rng.normal();
  return x;
}

}  // namespace

TEST_SUITE("diagnostics") {

TEST_CASE("autocorrelation of white noise and of an AR(1)") {
  RngStream rng(51);
  const auto w = iid(10000, rng);
  CHECK(std::abs(diag::autocorrelation(w, 1)) < 3.0 / std::sqrt(10000.0));
  CHECK(diag::autocorrelation(w, 0) == doctest::Approx(1.0));

  const auto x = ar1(0.9, 100000, 52);
  const auto rho = diag::autocorrelations(x, 10);
  REQUIRE(rho.size() == 10);
  for (std::size_t tau = 1; tau <= 10; ++tau) {
    CHECK(std::abs(rho[tau - 1] - std::pow(0.9, static_cast<double>(tau))) < 0.02);
    CHECK(std::abs(rho[tau - 1]) <= 1.0);
  }
  CHECK_THROWS_AS(diag::autocorrelation(w, w.size()), DomainError);
}

TEST_CASE("inefficiency factor: iid and AR(1)") {
  RngStream rng(53);
  for (int r = 0; r < 20; ++r) {
    const double f = diag::inefficiency_factor(iid(5000, rng));
    CHECK(f >= 0.8);
    CHECK(f <= 1.3);
  }
  const double f = diag::inefficiency_factor(ar1(0.9, 100000, 54));
  CHECK(std::abs(f - 19.0) < 0.1 * 19.0);
  CHECK_THROWS_AS(diag::inefficiency_factor(iid(50, rng)), DomainError);
}

TEST_CASE("Geweke CD size calibration on iid chains") {
  const double rate = geweke_acceptance(10000, 1000, 55);
  INFO("acceptance rate " << rate);
  CHECK(rate >= 0.93);
  CHECK(rate <= 0.97);
}

TEST_CASE("Geweke CD detects a linear trend") {
  RngStream rng(56);
  const std::size_t n = 1000;
  auto x = iid(n, rng);
  for (std::size_t t = 0; t < n; ++t) x[t] += 3.0 * static_cast<double>(t) / static_cast<double>(n);
  const auto g = diag::geweke_cd(x);
  CHECK(std::abs(g.statistic) > 1.96);
  CHECK(g.p_value < 0.05);
  CHECK_THROWS_AS(diag::geweke_cd(iid(100, rng)), DomainError);
}

TEST_CASE("optimal thinning anchor, independence and brute force") {
  CHECK(diag::optimal_thinning(0.995, 2.71) == 86);
  CHECK(diag::optimal_thinning(0.0, 2.71) == 1);
  CHECK(diag::optimal_thinning(0.0, 100.0) == 1);

  std::size_t best = 1;
  double best_v = diag::thinning_objective(1, 0.9, 1.0);
  for (std::size_t k = 2; k <= 10000; ++k) {
    const double v = diag::thinning_objective(k, 0.9, 1.0);
    if (v < best_v) {
      best_v = v;
      best = k;
    }
  }
  CHECK(diag::optimal_thinning(0.9, 1.0) == best);
  CHECK(diag::optimal_thinning(0.9, 1.0, 10000) == best);

  for (double rho : {0.5, 0.95, 0.999}) {
    const std::size_t k = diag::optimal_thinning(rho, 2.71);
    const double v = diag::thinning_objective(k, rho, 2.71);
    for (std::size_t j = 1; j <= 20000; ++j) REQUIRE(diag::thinning_objective(j, rho, 2.71) >= v);
  }
  CHECK_THROWS_AS(diag::optimal_thinning(1.0, 1.0), DomainError);
}

TEST_CASE("HPDI: normal quantiles, tie rule, width bound") {
  RngStream rng(57);
  const auto x = iid(1000000, rng);
  const auto h = diag::hpdi(x, 0.95);
  CHECK(std::abs(h.lower + 1.959964) < 0.02);
  CHECK(std::abs(h.upper - 1.959964) < 0.02);

  // Two equal masses: both windows of ceil(0.5 n) points have zero width; the
  // lower start wins.
  std::vector<double> two(10, 0.0);
  std::fill(two.begin() + 5, two.end(), 1.0);
  const auto t = diag::hpdi(two, 0.5);
  CHECK(t.lower == 0.0);
  CHECK(t.upper == 0.0);

  std::vector<double> uni(100);
  std::iota(uni.begin(), uni.end(), 1.0);
  const auto u = diag::hpdi(uni, 0.9);
  CHECK(u.lower == 1.0);
  CHECK(u.upper == 90.0);

  RngStream rng2(58);
  for (int r = 0; r < 20; ++r) {
    std::vector<double> g(2000);
    for (auto& gi : g) gi = rng2.gamma(2.0);
    const auto hp = diag::hpdi(g, 0.9);
    const auto et = diag::equal_tailed(g, 0.9);
    CHECK(hp.upper - hp.lower <= et.upper - et.lower + 1e-12);
  }
}

TEST_CASE("KDE normalization, normal pdf and degenerate input") {
  RngStream rng(59);
  const auto x = iid(1000000, rng);
  const auto d = diag::kde_density(x, 512);
  REQUIRE(d.grid.size() == 512);
  double integral = 0.0;
  for (std::size_t k = 1; k < d.grid.size(); ++k)
    integral += 0.5 * (d.density[k] + d.density[k - 1]) * (d.grid[k] - d.grid[k - 1]);
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-3));
  // Density at zero by linear interpolation.
  const auto it = std::lower_bound(d.grid.begin(), d.grid.end(), 0.0);
  const std::size_t k = static_cast<std::size_t>(it - d.grid.begin());
  const double w = (0.0 - d.grid[k - 1]) / (d.grid[k] - d.grid[k - 1]);
  const double at0 = (1.0 - w) * d.density[k - 1] + w * d.density[k];
  CHECK(std::abs(at0 - 0.3989) < 0.01);

  const std::vector<double> same(100, 2.5);
  CHECK_THROWS_AS(diag::kde_density(same, 64), DomainError);

  const auto two = diag::kde_density(std::vector<double>{0.0, 1.0, 2.0}, 2);
  REQUIRE(two.grid.size() == 2);
  const double trap = 0.5 * (two.density[0] + two.density[1]) * (two.grid[1] - two.grid[0]);
  CHECK(trap == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("integrated likelihood: independence case and degenerate latent variance") {
  auto toy = make_toy(5, {2, 2}, true, 60);
  ParamState s = toy.state;
  s.gamma.setZero();
  const auto& d = toy.data;
  double expect = 0.0;
  const MatrixXd xb = d.apply(s.beta);
  const MatrixXd xo = d.apply(s.omega);
  for (Index i = 0; i < d.n(); ++i) {
    expect += mvn_logpdf(d.y.row(i).transpose(), xb.row(i).transpose(), s.sigma_eps.matrix());
    expect += mvn_logpdf(d.w.row(i).transpose(), xo.row(i).transpose(),
                         (s.sigma_z2 + s.sigma_u2) * MatrixXd::Identity(2, 2));
  }
  CHECK(diag::integrated_loglik(s, d) == doctest::Approx(expect).epsilon(1e-12));

  ParamState t = toy.state;
  t.sigma_z2 = 1e-8;
  double direct = 0.0;
  for (Index i = 0; i < d.n(); ++i) {
    const VectorXd zi = xo.row(i).transpose();
    direct += mvn_logpdf(d.y.row(i).transpose(), xb.row(i).transpose() + zi.cwiseProduct(t.gamma),
                         t.sigma_eps.matrix());
    direct += mvn_logpdf(d.w.row(i).transpose(), zi, t.sigma_u2 * MatrixXd::Identity(2, 2));
  }
  CHECK(diag::integrated_loglik(t, d) == doctest::Approx(direct).epsilon(1e-6));
}

TEST_CASE("integrated likelihood is invariant to observation order") {
  auto toy = make_toy(7, {2, 3}, true, 61);
  SurDataset rev = toy.data;
  const Index n = rev.n();
  for (Index i = 0; i < n; ++i) {
    rev.y.row(i) = toy.data.y.row(n - 1 - i);
    rev.w.row(i) = toy.data.w.row(n - 1 - i);
    for (std::size_t eq = 0; eq < rev.x.size(); ++eq) rev.x[eq].row(i) = toy.data.x[eq].row(n - 1 - i);
  }
  CHECK(diag::integrated_loglik(toy.state, rev) ==
        doctest::Approx(diag::integrated_loglik(toy.state, toy.data)).epsilon(1e-12));
}

TEST_CASE("integrated likelihood matches Monte Carlo integration over Z (N = 3)") {
  const auto r = integrated_loglik_mc(make_toy(3, {2, 2}, true, 62), 1000000, 620);
  INFO("exact " << r.exact << " mc " << r.mc << " se " << r.se);
  CHECK(std::abs(r.exact - r.mc) < 3.0 * r.se);
}

TEST_CASE("DIC pieces and the degenerate single-draw chain") {
  const auto toy = make_toy(40, {2, 2}, true, 63);
  const Problem p = validate(toy.data, toy.priors);
  McmcConfig cfg;
  cfg.draws = 1100;
  cfg.burnin = 100;
  cfg.thin = 10;
  const auto res = gibbs::gibbs_surme(p, cfg);
  const auto score = diag::dic(res.chain, toy.data);
  CHECK(score.dic == doctest::Approx(score.mean_deviance + score.p_d));
  CHECK(score.p_d == doctest::Approx(score.mean_deviance - score.deviance_at_mean));

  GibbsChain one = res.chain;
  one.draws = res.chain.draws.topRows(1);
  const auto s1 = diag::dic(one, toy.data);
  CHECK(s1.p_d == doctest::Approx(0.0).scale(1.0));
  CHECK(s1.dic == doctest::Approx(-2.0 * diag::integrated_loglik(one.state_at(0), toy.data)));

  GibbsChain empty = res.chain;
  empty.draws.resize(0, res.chain.draws.cols());
  CHECK_THROWS_AS(diag::dic(empty, toy.data), DomainError);
}

TEST_CASE("chain_diag fills every field") {
  const auto x = ar1(0.5, 2000, 64);
  const ChainDiag d = diag::chain_diag(x, 10, 3);
  CHECK(d.autocorrelations.size() == 10);
  CHECK(d.inefficiency_factor > 1.0);
  CHECK(d.chain_length == 2000);
  CHECK(d.thinning == 3);
  CHECK(d.geweke_p >= 0.0);
  CHECK(d.geweke_p <= 1.0);
}

}  // TEST_SUITE
