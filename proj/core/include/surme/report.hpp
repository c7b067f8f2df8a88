#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace surme {

/// Per-parameter chain-quality statistics.
struct ChainDiag {
  std::vector<double> autocorrelations;  ///< rho_1 .. rho_cap
  double inefficiency_factor = 0.0;
  double geweke_cd = 0.0;
  double geweke_p = 1.0;
  std::size_t chain_length = 0;
  std::size_t thinning = 1;

  bool operator==(const ChainDiag&) const = default;
};

/// Deviance information criterion and its pieces.
struct ModelScore {
  double dic = 0.0;
  double p_d = 0.0;
  double mean_deviance = 0.0;
  double deviance_at_mean = 0.0;

  bool operator==(const ModelScore&) const = default;
};

struct ParamSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::optional<double> truth;
  std::optional<ChainDiag> diag;

  bool operator==(const ParamSummary&) const = default;
};

struct McmcInfo {
  std::size_t draws = 0;
  std::size_t burnin = 0;
  std::size_t thin = 1;
  std::size_t retained = 0;
  std::string dataset_digest;

  bool operator==(const McmcInfo&) const = default;
};

struct VariationalInfo {
  std::size_t cycles = 0;
  bool converged = false;
  double tol = 0.0;
  double elbo = 0.0;
  std::vector<double> elbo_trace;

  bool operator==(const VariationalInfo&) const = default;
};

/// Everything an estimator run produces for downstream reporting.
struct FitReport {
  static constexpr const char* schema_version = "surme-report/1";

  std::string method;
  /// "hpdi", "equal-tailed" or "normal-ci".
  std::string interval_kind;
  double interval_prob = 0.95;
  std::vector<ParamSummary> params;
  /// Pairwise error correlations keyed "rho_m_n".
  std::map<std::string, double> error_correlations;
  std::optional<double> reliability_ratio;
  std::optional<ModelScore> score;
  std::optional<McmcInfo> mcmc;
  std::optional<VariationalInfo> variational;
  std::uint64_t seed = 0;
  double runtime_seconds = 0.0;

  const ParamSummary* find(const std::string& name) const {
    for (const auto& p : params) {
      if (p.name == name) return &p;
    }
    return nullptr;
  }
  const ParamSummary& at(const std::string& name) const;

  bool operator==(const FitReport&) const = default;
};

}  // namespace surme
