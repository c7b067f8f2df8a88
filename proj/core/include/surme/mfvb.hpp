#pragma once

// Mean-field variational Bayes for the measurement-error SUR model, fitted by
// coordinate ascent on the evidence lower bound.

#include <vector>

#include "surme/model.hpp"
#include "surme/report.hpp"

namespace surme::mfvb {

/// Parameters of the factorized approximation
///   q(beta) q(gamma) q(Sigma_eps^{-1}) q(omega or mu) q(sigma_z2) q(sigma_u2) prod_i q(z_i).
/// q(Sigma_eps^{-1}) = W(nu1, B_q_Sigma); the inverse-gamma factors use
/// (shape, rate) = (delta*_star, B_q_*). Every q(z_i) shares Sigma_q_Z.
struct VariationalState {
  VectorXd mu_q_beta;
  PdMatrix Sigma_q_beta;
  VectorXd mu_q_gamma;
  PdMatrix Sigma_q_gamma;
  double nu1 = 0.0;
  PdMatrix B_q_Sigma;
  VectorXd mu_q_omega;  ///< empty without an exposure equation
  PdMatrix Sigma_q_omega;
  VectorXd mu_q_mu;  ///< empty with an exposure equation
  PdMatrix Sigma_q_mu;
  MatrixXd mu_q_Z;  ///< N x M, row i is the mean of q(z_i)
  PdMatrix Sigma_q_Z;
  double delta1_star = 0.0;
  double B_q_sigmaZ2 = 0.0;
  double delta3_star = 0.0;
  double B_q_sigmaU2 = 0.0;
  std::vector<double> elbo_trace;
  std::size_t cycles = 0;

  /// E[Sigma_eps^{-1}] = nu1 B.
  MatrixXd precision_mean() const { return nu1 * B_q_Sigma.matrix(); }
  double inv_sigma_z2_mean() const { return delta1_star / B_q_sigmaZ2; }
  double inv_sigma_u2_mean() const { return delta3_star / B_q_sigmaU2; }
};

/// Shapes at delta + NM/2, rates from an 80/20 split of the residual variance
/// of W on X, coefficient factors at the prior, nu1 B at the prior precision
/// mean, q(z_i) centred on W_i.
VariationalState initial_state(const Problem& p);

/// One pass of the updates in order: Sigma_q(beta), mu_q(beta),
/// Sigma_q(gamma), mu_q(gamma), B_q(Sigma), B_q(sigma_z2), B_q(sigma_u2),
/// Sigma_q(omega), mu_q(omega), Sigma_q(Z), mu_q(Z), labelled (a) to (k).
/// A factorization failure is reported as a PdFailure naming the step.
VariationalState cavi_cycle(const VariationalState& state, const Problem& p);

/// Evidence lower bound E_q[log p(y, W, Z, theta)] - E_q[log q].
double elbo(const VariationalState& state, const Problem& p);

struct FitOptions {
  double tol = 1e-7;
  std::size_t max_cycles = 5000;
};

struct MfvbResult {
  VariationalState state;
  FitReport report;
  bool converged = false;
};

/// Iterate cavi_cycle until the relative ELBO gain falls below tol. Hitting
/// max_cycles is flagged in the report, not thrown.
MfvbResult cavi_fit(const Problem& p, const FitOptions& options = {});

/// Scales each reported gamma SD by sqrt(M K / E_q[sigma_z2]).
VectorXd gamma_sd_correction(const VectorXd& sigma_gamma, const VariationalState& state);

/// Report of the fitted q-densities with equal-tailed 95% intervals.
FitReport make_report(const VariationalState& state, const Problem& p, bool converged, double tol);

}  // namespace surme::mfvb
