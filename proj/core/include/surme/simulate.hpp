#pragma once

// Synthetic data for the measurement-error SUR design, the two-step FGLS
// baseline and the Monte Carlo replication harness.

#include <optional>
#include <string>
#include <vector>

#include "surme/chain.hpp"
#include "surme/mfvb.hpp"
#include "surme/model.hpp"
#include "surme/report.hpp"

namespace surme {

/// Each equation has an intercept, a covariate common to all equations drawn
/// from U(0, 2) and an exclusive covariate drawn from U(0, 4).
struct DgpConfig {
  Index n = 300;
  Index m = 2;
  VectorXd beta = (VectorXd(6) << 3.0, 5.0, 4.0, 4.0, 3.8, 3.0).finished();
  VectorXd gamma = (VectorXd(2) << 4.0, 4.0).finished();
  VectorXd omega = (VectorXd(6) << 1.5, 0.75, 0.3, 1.5, 1.05, 0.45).finished();
  MatrixXd sigma_eps = (MatrixXd(2, 2) << 1.0, 0.5, 0.5, 1.0).finished();
  double sigma_z2 = 1.0;
  double r_z = 0.8;  ///< reliability ratio sigma_z2 / (sigma_z2 + sigma_u2)

  /// sigma_z2 (1 - r_z) / r_z.
  double sigma_u2() const;
  void validate() const;

  /// Named designs: "I-1" (sigma_z2 1, R 0.8), "I-2" (0.0625, 0.8),
  /// "II-1" (1, 0.5714), "II-2" (0.0625, 0.5714).
  static DgpConfig preset(const std::string& label);
  static std::vector<std::string> preset_labels();
};

SurDataset generate_dataset(const DgpConfig& cfg, RngStream& rng);

/// Two-step feasible GLS of y on [X, W]: per-equation OLS residuals give
/// Sigma_hat = E'E / N, then GLS with classical standard errors and normal
/// 95% intervals. Sigma_eps is re-estimated from the GLS residuals and
/// reported without standard errors.
FitReport fit_sur_fgls(const SurDataset& data);

struct StudyOptions {
  McmcConfig mcmc;
  mfvb::FitOptions mfvb;
  /// Used for Bayesian estimators; defaults to PriorSpec::defaults.
  std::optional<PriorSpec> priors;
  /// Worker threads; 0 reads SURME_THREADS, else the hardware count.
  unsigned threads = 0;
};

struct StudyParam {
  std::string name;
  std::optional<double> truth;
  double mean = 0.0;  ///< mean point estimate over successful replications
  std::optional<double> relative_error;  ///< mean / truth - 1
  double sd = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::optional<double> inefficiency_factor;

  bool operator==(const StudyParam&) const = default;
};

struct StudySummary {
  std::string estimator;
  std::size_t reps = 0;
  std::size_t failures = 0;
  std::vector<std::string> failure_messages;
  std::vector<StudyParam> params;
  std::optional<double> reliability_ratio;
  std::optional<ModelScore> score;
  std::optional<double> mean_cycles;
  std::optional<double> mean_elbo;
  std::size_t converged = 0;
  std::uint64_t seed = 0;

  const StudyParam& at(const std::string& name) const;
  bool operator==(const StudySummary&) const = default;
};

/// Known estimators: fgls, gibbs-surme, gibbs-sur, mfvb.
FitReport run_estimator(const std::string& estimator, const SurDataset& data, const StudyOptions& options,
                        std::uint64_t seed);

/// Fit `reps` independent datasets. Replication r draws its data from
/// rng.derive(r); failed fits are counted and skipped.
StudySummary replicate_study(const DgpConfig& cfg, const std::string& estimator, std::size_t reps,
                             const RngStream& rng, const StudyOptions& options = {});

/// Average a set of reports parameter by parameter.
StudySummary summarize_study(const std::string& estimator, const std::vector<FitReport>& reports,
                             std::size_t failures = 0);

}  // namespace surme
