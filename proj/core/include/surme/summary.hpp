#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "surme/chain.hpp"
#include "surme/model.hpp"
#include "surme/report.hpp"

namespace surme {

/// Posterior summaries (mean, sd, HPDI) and chain diagnostics per column.
std::vector<ParamSummary> summarize_draws(const std::vector<std::string>& names, const MatrixXd& draws,
                                          double prob, std::size_t thinning, std::size_t lag_cap = 10);

/// Generating value of a canonical parameter name, when the dataset has one.
std::optional<double> truth_value(const std::string& name, const GroundTruth& truth,
                                  const std::vector<Index>& k_per_equation);
void attach_truth(FitReport& report, const SurDataset& data);

/// Correlations implied by a covariance, keyed "rho_a_b" for a < b.
std::map<std::string, double> error_correlations(const MatrixXd& sigma);

/// Summarize a finished chain into a report with HPDIs and diagnostics.
FitReport summarize_chain(const GibbsChain& chain, const std::string& method, const SurDataset& data);

}  // namespace surme
