#pragma once

// Gibbs samplers: the measurement-error SUR sampler (with or without an
// exposure equation) and the plain Bayesian SUR sampler that treats W as an
// exact covariate.

#include "surme/chain.hpp"
#include "surme/model.hpp"
#include "surme/report.hpp"

namespace surme::gibbs {

/// Closed-form Gaussian full conditional.
struct NormalConditional {
  VectorXd mean;
  PdMatrix cov;
};

/// Full conditional of Sigma_eps^{-1}: W(df, scale).
struct WishartConditional {
  double df = 0.0;
  PdMatrix scale;
};

struct InvGammaConditional {
  double shape = 0.0;
  double rate = 0.0;
};

/// Rows of `mean` are the conditional means of each z_i; all share `cov`.
struct LatentConditional {
  MatrixXd mean;
  PdMatrix cov;
};

NormalConditional beta_conditional(const ParamState& s, const Problem& p);
NormalConditional gamma_conditional(const ParamState& s, const Problem& p);
WishartConditional sigma_eps_conditional(const ParamState& s, const Problem& p);
LatentConditional z_conditional(const ParamState& s, const Problem& p);
NormalConditional omega_conditional(const ParamState& s, const Problem& p);
InvGammaConditional sigma_z2_conditional(const ParamState& s, const Problem& p);
InvGammaConditional sigma_u2_conditional(const ParamState& s, const Problem& p);
NormalConditional mu_conditional(const ParamState& s, const Problem& p);

VectorXd update_beta(const ParamState& s, const Problem& p, RngStream& rng);
VectorXd update_gamma(const ParamState& s, const Problem& p, RngStream& rng);
/// Draws the precision and returns the covariance Sigma_eps.
PdMatrix update_sigma_eps(const ParamState& s, const Problem& p, RngStream& rng);
MatrixXd update_z(const ParamState& s, const Problem& p, RngStream& rng);
VectorXd update_omega(const ParamState& s, const Problem& p, RngStream& rng);
double update_sigma_z2(const ParamState& s, const Problem& p, RngStream& rng);
double update_sigma_u2(const ParamState& s, const Problem& p, RngStream& rng);
VectorXd update_mu(const ParamState& s, const Problem& p, RngStream& rng);

/// Starting point: coefficients at prior means, Sigma_eps at the inverse of
/// the prior precision mean, sigma_z2 / sigma_u2 as an 80/20 split of the
/// residual variance of W regressed on X, Z at W.
ParamState initial_state(const Problem& p);

/// One sweep in the fixed order beta, gamma, Sigma_eps, Z, omega (or mu),
/// sigma_z2, sigma_u2.
void sweep(ParamState& s, const Problem& p, RngStream& rng);

struct GibbsResult {
  GibbsChain chain;
  FitReport report;
};

GibbsResult gibbs_surme(const Problem& p, const McmcConfig& cfg);
/// Plain SUR with W used as an exactly measured covariate.
GibbsResult gibbs_sur(const Problem& p, const McmcConfig& cfg);

/// Pooled variance of per-equation OLS residuals of W on X.
double exposure_residual_variance(const SurDataset& data);

}  // namespace surme::gibbs
