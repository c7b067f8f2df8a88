#pragma once

// Data model for seemingly unrelated regressions whose covariate z is seen
// only through a noisy reading w = z + u (classical structural measurement
// error), with an exposure regression z ~ N(X omega, sigma_z2 I).

#include <optional>
#include <string>
#include <vector>

#include "surme/report.hpp"
#include "surme/stats.hpp"

namespace surme {

/// Generating values attached to simulated datasets.
struct GroundTruth {
  MatrixXd z;  ///< N x M latent covariate
  VectorXd beta;
  VectorXd gamma;
  VectorXd omega;
  MatrixXd sigma_eps;
  double sigma_z2 = 0.0;
  double sigma_u2 = 0.0;
};

/// Observed responses, per-equation covariates and noisy readings.
///
/// Covariates are kept per equation (N x k_m blocks); the M x K block-diagonal
/// design X_i of observation i is assembled on demand by design().
struct SurDataset {
  MatrixXd y;               ///< N x M responses
  std::vector<MatrixXd> x;  ///< M blocks of N x k_m
  MatrixXd w;               ///< N x M mismeasured readings
  std::vector<std::vector<std::string>> covariate_names;  ///< optional labels
  std::optional<GroundTruth> truth;

  Index n() const noexcept { return y.rows(); }
  Index m() const noexcept { return static_cast<Index>(x.size()); }
  Index k() const noexcept;
  Index k_of(Index eq) const { return x.at(static_cast<std::size_t>(eq)).cols(); }
  /// Offset of equation eq's coefficients in the stacked K-vector.
  Index offset(Index eq) const;
  std::vector<Index> k_per_equation() const;

  /// X_i for observation i (M x K).
  MatrixXd design(Index i) const;
  /// N x M matrix whose row i is X_i coef.
  MatrixXd apply(const VectorXd& coef) const;
  /// sum_i X_i' v_i for an N x M matrix v (returns a K-vector).
  VectorXd apply_transpose(const MatrixXd& v) const;
};

/// Hyperparameters of the conjugate prior.
///
/// beta ~ N(beta0, B0), gamma ~ N(gamma0, G0), Sigma_eps^{-1} ~ W(nu0, S0)
/// with E[Sigma_eps^{-1}] = nu0 S0, omega ~ N(omega0, O0),
/// sigma_z2 ~ IG(delta1, delta2), sigma_u2 ~ IG(delta3, delta4) in
/// (shape, rate) form. Without an exposure equation the latent mean is a free
/// M-vector mu ~ N(mu0, sigma_mu2 I).
struct PriorSpec {
  VectorXd beta0;
  PdMatrix B0;
  VectorXd gamma0;
  PdMatrix G0;
  double nu0 = 0.0;
  PdMatrix S0;
  VectorXd omega0;
  PdMatrix O0;
  double delta1 = 0.01;
  double delta2 = 0.01;
  double delta3 = 0.01;
  double delta4 = 0.01;
  bool exposure = true;
  VectorXd mu0;
  double sigma_mu2 = 100.0;

  /// Simulation-study defaults: unit-vector means, identity covariances,
  /// nu0 = 50 and all deltas 0.01. The error-precision prior is centred on
  /// [1 .5; .5 1] via S0 = (nu0 [1 .5; .5 1])^{-1}, so nu0 S0 = [1 .5; .5 1]^{-1}.
  static PriorSpec defaults(const std::vector<Index>& k_per_equation, bool exposure = true);
};

/// One state of the Gibbs sampler (the parameter vector plus latent Z).
struct ParamState {
  VectorXd beta;
  VectorXd gamma;
  PdMatrix sigma_eps;
  VectorXd omega;  ///< exposure coefficients (empty when exposure is off)
  VectorXd mu;     ///< latent mean (empty when exposure is on)
  double sigma_z2 = 1.0;
  double sigma_u2 = 1.0;
  MatrixXd z;  ///< N x M latent covariate

  bool operator==(const ParamState& other) const;
};

/// Validated dataset and priors with cached sufficient statistics.
class Problem {
 public:
  Problem(SurDataset data, PriorSpec priors);

  const SurDataset& data() const noexcept { return data_; }
  const PriorSpec& priors() const noexcept { return priors_; }

  /// sum_i X_i' P X_i for an M x M matrix P (K x K).
  MatrixXd weighted_gram(const MatrixXd& p) const;
  /// sum_i X_i' X_i (block diagonal, K x K).
  const MatrixXd& gram() const noexcept { return gram_; }

  const MatrixXd& B0_inv() const noexcept { return b0_inv_; }
  const VectorXd& B0_inv_beta0() const noexcept { return b0_inv_beta0_; }
  const MatrixXd& G0_inv() const noexcept { return g0_inv_; }
  const VectorXd& G0_inv_gamma0() const noexcept { return g0_inv_gamma0_; }
  const MatrixXd& O0_inv() const noexcept { return o0_inv_; }
  const VectorXd& O0_inv_omega0() const noexcept { return o0_inv_omega0_; }
  const MatrixXd& S0_inv() const noexcept { return s0_inv_; }

  /// N x M matrix of latent means: rows X_i omega, or mu' when exposure is off.
  MatrixXd latent_mean(const ParamState& s) const;

 private:
  SurDataset data_;
  PriorSpec priors_;
  std::vector<MatrixXd> cross_;  // X_a' X_b, row-major over (a, b)
  MatrixXd gram_;
  MatrixXd b0_inv_, g0_inv_, o0_inv_, s0_inv_;
  VectorXd b0_inv_beta0_, g0_inv_gamma0_, o0_inv_omega0_;
};

/// Check every shape and positivity invariant; throws ValidationError listing
/// all problems found.
Problem validate(SurDataset data, PriorSpec priors);

/// Var(z) / (Var(z) + Var(u)).
double reliability_ratio(double sigma_z2, double sigma_u2);

/// Canonical parameter labels: beta_m_j, gamma_m, sigma_m_n (upper triangle),
/// sigma_z2, sigma_u2, then omega_m_j or mu_m.
std::vector<std::string> surme_parameter_names(const std::vector<Index>& k_per_equation, bool exposure);
/// Labels for the plain SUR model: beta_m_j, gamma_m, sigma_m_n.
std::vector<std::string> sur_parameter_names(const std::vector<Index>& k_per_equation);

/// Flatten a state into the order of surme_parameter_names.
VectorXd flatten(const ParamState& s, bool exposure);

/// FNV-1a digest of the observed data, rendered as hex.
std::string dataset_digest(const SurDataset& data);

}  // namespace surme
