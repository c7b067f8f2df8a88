#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "surme/model.hpp"

namespace surme {

struct McmcConfig {
  std::size_t draws = 51000;
  std::size_t burnin = 1000;
  std::size_t thin = 100;
  std::uint64_t seed = 1;
  /// Keep every retained draw of Z instead of only its running moments.
  bool store_latent = false;

  /// floor((draws - burnin) / thin); throws ValidationError on a bad config.
  std::size_t retained() const;
  void validate() const;
};

enum class ModelKind { surme, sur };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& label);

/// Retained (post burn-in, post thinning) draws of one sampler run.
struct GibbsChain {
  ModelKind model = ModelKind::surme;
  bool exposure = true;
  std::vector<Index> k_per_equation;
  std::vector<std::string> names;
  MatrixXd draws;  ///< retained x parameters, columns ordered as names
  McmcConfig config;
  std::string dataset_digest;
  /// Posterior mean and variance of each latent z_im over all post burn-in sweeps.
  MatrixXd z_mean;
  MatrixXd z_var;
  std::vector<MatrixXd> z_draws;

  std::size_t retained() const noexcept { return static_cast<std::size_t>(draws.rows()); }
  Index column_index(const std::string& name) const;
  VectorXd column(const std::string& name) const { return draws.col(column_index(name)); }
  /// Parameter state (without Z) stored in a row.
  ParamState state_at(Index row) const;
  /// State built from column means; Sigma_eps is the mean of the covariance draws.
  ParamState posterior_mean_state() const;
};

/// Rebuild layout information (model, exposure, k per equation) from the
/// canonical parameter names of a chain file.
void infer_layout(GibbsChain& chain);

}  // namespace surme
