#pragma once

// Chain-quality statistics, interval construction and model comparison.

#include <span>
#include <vector>

#include "surme/chain.hpp"
#include "surme/report.hpp"

namespace surme::diag {

/// Sample autocorrelation at `lag` (biased 1/n autocovariance estimator).
double autocorrelation(std::span<const double> draws, std::size_t lag);
/// rho_1 .. rho_max_lag.
std::vector<double> autocorrelations(std::span<const double> draws, std::size_t max_lag);

/// 1 + 2 sum rho_tau, truncated by Geyer's initial monotone positive sequence.
double inefficiency_factor(std::span<const double> draws);

/// Spectral density at frequency zero with Bartlett weights over a window of
/// taper_fraction * n lags.
double spectral_variance_at_zero(std::span<const double> draws, double taper_fraction = 0.04);

struct GewekeResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Compares the mean of the first `first` fraction of the chain with the mean
/// of the last `last` fraction. Requires at least 200 draws.
GewekeResult geweke_cd(std::span<const double> draws, double first = 0.1, double last = 0.5);

/// (k + cost_ratio) (1 + rho1^k) / (1 - rho1^k): time per retained draw times
/// the AR(1) variance inflation of the thinned chain.
double thinning_objective(std::size_t k, double rho1, double cost_ratio);

/// Exact argmin of thinning_objective over k in [1, k_max]; ties go to the
/// smaller k. k_max = 0 picks a range wide enough to contain the minimum.
std::size_t optimal_thinning(double rho1, double cost_ratio, std::size_t k_max = 0);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

/// Shortest interval holding ceil(prob * n) sorted draws; ties resolve to the
/// lowest start index.
Interval hpdi(std::span<const double> draws, double prob);
/// Empirical prob/2 and 1 - prob/2 quantiles.
Interval equal_tailed(std::span<const double> draws, double prob);

/// log p(y, W | parameters) with Z integrated out: (y_i, W_i) is 2M-variate
/// normal. Uses omega when it is non-empty, otherwise mu.
double integrated_loglik(const ParamState& params, const SurDataset& data);
/// log p(y | W, parameters) for the plain SUR model with W as covariate.
double sur_loglik(const ParamState& params, const SurDataset& data);

/// DIC from retained draws: D = -2 log-likelihood, p_D = mean(D) - D(mean).
ModelScore dic(const GibbsChain& chain, const SurDataset& data, ModelKind model);
ModelScore dic(const GibbsChain& chain, const SurDataset& data);

struct Density {
  std::vector<double> grid;
  std::vector<double> density;
  double bandwidth = 0.0;
};

/// Gaussian-kernel density estimate with Silverman's bandwidth on an equally
/// spaced grid spanning the draws +- 3 bandwidths, scaled so the trapezoid
/// integral is exactly one.
Density kde_density(std::span<const double> draws, std::size_t grid_size);

/// Full per-parameter diagnostic record.
ChainDiag chain_diag(std::span<const double> draws, std::size_t lag_cap, std::size_t thinning);

}  // namespace surme::diag
