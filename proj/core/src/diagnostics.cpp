#include "surme/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

namespace surme::diag {

namespace {

double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

// Biased (1/n) autocovariance at lag.
double autocovariance(std::span<const double> x, double mean, std::size_t lag) {
  const std::size_t n = x.size();
  double acc = 0.0;
  for (std::size_t t = 0; t + lag < n; ++t) acc += (x[t] - mean) * (x[t + lag] - mean);
  return acc / static_cast<double>(n);
}

}  // namespace

double autocorrelation(std::span<const double> draws, std::size_t lag) {
  if (lag >= draws.size()) throw DomainError("autocorrelation: lag must be below the chain length");
  const double mean = mean_of(draws);
  const double c0 = autocovariance(draws, mean, 0);
  if (c0 <= 0.0) return lag == 0 ? 1.0 : 0.0;
  return autocovariance(draws, mean, lag) / c0;
}

std::vector<double> autocorrelations(std::span<const double> draws, std::size_t max_lag) {
  std::vector<double> out;
  if (draws.size() < 2) return out;
  max_lag = std::min(max_lag, draws.size() - 1);
  const double mean = mean_of(draws);
  const double c0 = autocovariance(draws, mean, 0);
  out.reserve(max_lag);
  for (std::size_t lag = 1; lag <= max_lag; ++lag) {
    out.push_back(c0 > 0.0 ? autocovariance(draws, mean, lag) / c0 : 0.0);
  }
  return out;
}

double inefficiency_factor(std::span<const double> draws) {
  const std::size_t n = draws.size();
  if (n < 100) throw DomainError("inefficiency_factor: at least 100 draws are required");
  const double mean = mean_of(draws);
  const double c0 = autocovariance(draws, mean, 0);
  if (c0 <= 0.0) return 1.0;

  auto rho = [&](std::size_t lag) { return autocovariance(draws, mean, lag) / c0; };
  double sum = 0.0;
  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    double pair = (k == 0 ? 1.0 : rho(2 * k)) + rho(2 * k + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, previous);
    sum += pair;
    previous = pair;
  }
  return std::max(0.0, -1.0 + 2.0 * sum);
}

double spectral_variance_at_zero(std::span<const double> draws, double taper_fraction) {
  const std::size_t n = draws.size();
  if (n < 2) throw DomainError("spectral_variance_at_zero: need at least two draws");
  const double mean = mean_of(draws);
  const auto window = static_cast<std::size_t>(std::floor(taper_fraction * static_cast<double>(n)));
  double s = autocovariance(draws, mean, 0);
  for (std::size_t j = 1; j <= window && j < n; ++j) {
    const double weight = 1.0 - static_cast<double>(j) / static_cast<double>(window + 1);
    s += 2.0 * weight * autocovariance(draws, mean, j);
  }
  return std::max(s, 0.0);
}

GewekeResult geweke_cd(std::span<const double> draws, double first, double last) {
  const std::size_t n = draws.size();
  if (n < 200) throw DomainError("geweke_cd: at least 200 draws are required");
  if (!(first > 0.0) || !(last > 0.0) || first + last > 1.0) {
    throw DomainError("geweke_cd: window fractions must be positive and sum to at most one");
  }
  const auto na = static_cast<std::size_t>(std::floor(first * static_cast<double>(n)));
  const auto nb = static_cast<std::size_t>(std::floor(last * static_cast<double>(n)));
  const auto a = draws.subspan(0, na);
  const auto b = draws.subspan(n - nb, nb);
  const double var = spectral_variance_at_zero(a) / static_cast<double>(na) +
                     spectral_variance_at_zero(b) / static_cast<double>(nb);
  GewekeResult out;
  if (var <= 0.0) return out;
  out.statistic = (mean_of(a) - mean_of(b)) / std::sqrt(var);
  const boost::math::normal_distribution<double> std_normal;
  out.p_value = 2.0 * boost::math::cdf(boost::math::complement(std_normal, std::abs(out.statistic)));
  return out;
}

double thinning_objective(std::size_t k, double rho1, double cost_ratio) {
  const double rk = std::pow(rho1, static_cast<double>(k));
  return (static_cast<double>(k) + cost_ratio) * (1.0 + rk) / (1.0 - rk);
}

std::size_t optimal_thinning(double rho1, double cost_ratio, std::size_t k_max) {
  if (!(rho1 >= 0.0) || !(rho1 < 1.0)) throw DomainError("optimal_thinning: rho1 must lie in [0, 1)");
  if (!(cost_ratio > 0.0)) throw DomainError("optimal_thinning: cost ratio must be positive");
  if (rho1 == 0.0) return 1;
  if (k_max == 0) {
    // Past rho^k < 1e-12 the objective grows linearly, so the minimum lies below.
    const double decay = -std::log(rho1);
    k_max = std::max<std::size_t>(10000, static_cast<std::size_t>(std::ceil(28.0 / decay)) + 1);
  }
  std::size_t best = 1;
  double best_value = thinning_objective(1, rho1, cost_ratio);
  for (std::size_t k = 2; k <= k_max; ++k) {
    const double v = thinning_objective(k, rho1, cost_ratio);
    if (v < best_value) {
      best_value = v;
      best = k;
    }
  }
  return best;
}

Interval hpdi(std::span<const double> draws, double prob) {
  if (draws.empty()) throw DomainError("hpdi: no draws");
  if (!(prob > 0.0) || !(prob < 1.0)) throw DomainError("hpdi: prob must lie in (0, 1)");
  std::vector<double> sorted(draws.begin(), draws.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const auto width = std::max<std::size_t>(
      1, std::min(n, static_cast<std::size_t>(std::ceil(prob * static_cast<double>(n)))));
  std::size_t best = 0;
  double best_len = sorted[width - 1] - sorted[0];
  for (std::size_t i = 1; i + width <= n; ++i) {
    const double len = sorted[i + width - 1] - sorted[i];
    if (len < best_len) {
      best_len = len;
      best = i;
    }
  }
  return {sorted[best], sorted[best + width - 1]};
}

Interval equal_tailed(std::span<const double> draws, double prob) {
  if (draws.empty()) throw DomainError("equal_tailed: no draws");
  std::vector<double> sorted(draws.begin(), draws.end());
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&sorted](double p) {
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
  };
  const double tail = 0.5 * (1.0 - prob);
  return {quantile(tail), quantile(1.0 - tail)};
}

double integrated_loglik(const ParamState& params, const SurDataset& data) {
  const Index n = data.n();
  const Index m = data.m();
  const bool exposure = params.omega.size() > 0;
  const MatrixXd latent =
      exposure ? data.apply(params.omega) : MatrixXd(MatrixXd::Ones(n, 1) * params.mu.transpose());

  MatrixXd cov(2 * m, 2 * m);
  const MatrixXd g = params.gamma.asDiagonal();
  cov.topLeftCorner(m, m) = params.sigma_z2 * g * g + params.sigma_eps.matrix();
  cov.topRightCorner(m, m) = params.sigma_z2 * g;
  cov.bottomLeftCorner(m, m) = params.sigma_z2 * g;
  cov.bottomRightCorner(m, m) = (params.sigma_z2 + params.sigma_u2) * MatrixXd::Identity(m, m);
  const auto llt = pd_factor(cov, "integrated covariance");

  MatrixXd resid(2 * m, n);
  const MatrixXd xb = data.apply(params.beta);
  for (Index eq = 0; eq < m; ++eq) {
    resid.row(eq) = (data.y.col(eq) - xb.col(eq) - params.gamma(eq) * latent.col(eq)).transpose();
    resid.row(m + eq) = (data.w.col(eq) - latent.col(eq)).transpose();
  }
  llt.matrixL().solveInPlace(resid);
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double dim = static_cast<double>(2 * m);
  return -0.5 * (static_cast<double>(n) * (dim * std::log(2.0 * std::numbers::pi) + log_det) +
                 resid.squaredNorm());
}

double sur_loglik(const ParamState& params, const SurDataset& data) {
  const Index n = data.n();
  const Index m = data.m();
  MatrixXd resid = data.y - data.apply(params.beta) - data.w * params.gamma.asDiagonal();
  MatrixXd rt = resid.transpose();
  const auto llt = pd_factor(params.sigma_eps.matrix(), "Sigma_eps");
  llt.matrixL().solveInPlace(rt);
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(n) *
                     (static_cast<double>(m) * std::log(2.0 * std::numbers::pi) + log_det) +
                 rt.squaredNorm());
}

ModelScore dic(const GibbsChain& chain, const SurDataset& data, ModelKind model) {
  if (chain.retained() == 0) throw DomainError("dic: chain has no retained draws");
  auto deviance = [&](const ParamState& s) {
    return -2.0 * (model == ModelKind::surme ? integrated_loglik(s, data) : sur_loglik(s, data));
  };
  double total = 0.0;
  for (Index r = 0; r < chain.draws.rows(); ++r) total += deviance(chain.state_at(r));
  ModelScore score;
  score.mean_deviance = total / static_cast<double>(chain.retained());
  score.deviance_at_mean = deviance(chain.posterior_mean_state());
  score.p_d = score.mean_deviance - score.deviance_at_mean;
  score.dic = score.mean_deviance + score.p_d;
  return score;
}

ModelScore dic(const GibbsChain& chain, const SurDataset& data) { return dic(chain, data, chain.model); }

Density kde_density(std::span<const double> draws, std::size_t grid_size) {
  if (draws.size() < 2) throw DomainError("kde_density: need at least two draws");
  if (grid_size < 2) throw DomainError("kde_density: grid needs at least two points");
  std::vector<double> sorted(draws.begin(), draws.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  const double mean = mean_of(sorted);
  double ss = 0.0;
  for (double v : sorted) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  const Interval quartiles = equal_tailed(sorted, 0.5);
  const double iqr = (quartiles.upper - quartiles.lower) / 1.34;
  const double spread = iqr > 0.0 ? std::min(sd, iqr) : sd;
  const double h = 0.9 * spread * std::pow(n, -0.2);
  if (!(h > 0.0)) throw DomainError("kde_density: zero bandwidth (all draws equal)");

  Density out;
  out.bandwidth = h;
  const double lo = sorted.front() - 3.0 * h;
  const double hi = sorted.back() + 3.0 * h;
  const double step = (hi - lo) / static_cast<double>(grid_size - 1);
  const double cutoff = 8.0 * h;
  const double norm = 1.0 / (n * h * std::sqrt(2.0 * std::numbers::pi));
  out.grid.resize(grid_size);
  out.density.resize(grid_size);
  for (std::size_t g = 0; g < grid_size; ++g) {
    const double x = lo + step * static_cast<double>(g);
    auto first = std::lower_bound(sorted.begin(), sorted.end(), x - cutoff);
    auto last = std::upper_bound(first, sorted.end(), x + cutoff);
    double acc = 0.0;
    for (auto it = first; it != last; ++it) {
      const double z = (x - *it) / h;
      acc += std::exp(-0.5 * z * z);
    }
    out.grid[g] = x;
    out.density[g] = acc * norm;
  }
  double area = 0.0;
  for (std::size_t g = 1; g < grid_size; ++g) area += 0.5 * step * (out.density[g] + out.density[g - 1]);
  if (area > 0.0) {
    for (double& d : out.density) d /= area;
  } else {
    // Grid too coarse to resolve any kernel mass: spread it uniformly.
    for (double& d : out.density) d = 1.0 / (hi - lo);
  }
  return out;
}

ChainDiag chain_diag(std::span<const double> draws, std::size_t lag_cap, std::size_t thinning) {
  ChainDiag d;
  d.chain_length = draws.size();
  d.thinning = thinning;
  d.autocorrelations = autocorrelations(draws, lag_cap);
  if (draws.size() >= 100) d.inefficiency_factor = inefficiency_factor(draws);
  if (draws.size() >= 200) {
    const auto cd = geweke_cd(draws);
    d.geweke_cd = cd.statistic;
    d.geweke_p = cd.p_value;
  }
  return d;
}

}  // namespace surme::diag
