#include "surme/summary.hpp"

#include <cmath>

#include "surme/diagnostics.hpp"

namespace surme {

std::vector<ParamSummary> summarize_draws(const std::vector<std::string>& names, const MatrixXd& draws,
                                          double prob, std::size_t thinning, std::size_t lag_cap) {
  std::vector<ParamSummary> out;
  out.reserve(names.size());
  const Index n = draws.rows();
  for (std::size_t j = 0; j < names.size(); ++j) {
    const VectorXd col = draws.col(static_cast<Index>(j));
    const std::span<const double> xs(col.data(), static_cast<std::size_t>(col.size()));
    ParamSummary s;
    s.name = names[j];
    s.mean = col.mean();
    s.sd = n > 1 ? std::sqrt((col.array() - s.mean).square().sum() / static_cast<double>(n - 1)) : 0.0;
    const auto iv = diag::hpdi(xs, prob);
    s.lower = iv.lower;
    s.upper = iv.upper;
    s.diag = diag::chain_diag(xs, lag_cap, thinning);
    out.push_back(std::move(s));
  }
  return out;
}

std::optional<double> truth_value(const std::string& name, const GroundTruth& truth,
                                  const std::vector<Index>& k_per_equation) {
  auto parse_pair = [](const std::string& rest) {
    const auto sep = rest.find('_');
    return std::pair<Index, Index>(std::stol(rest.substr(0, sep)) - 1,
                                   sep == std::string::npos ? -1 : std::stol(rest.substr(sep + 1)) - 1);
  };
  auto offset = [&k_per_equation](Index eq) {
    Index off = 0;
    for (Index j = 0; j < eq; ++j) off += k_per_equation[static_cast<std::size_t>(j)];
    return off;
  };
  if (name == "sigma_z2") return truth.sigma_z2;
  if (name == "sigma_u2") return truth.sigma_u2;
  if (name.rfind("beta_", 0) == 0 && truth.beta.size() > 0) {
    const auto [eq, j] = parse_pair(name.substr(5));
    return truth.beta(offset(eq) + j);
  }
  if (name.rfind("omega_", 0) == 0 && truth.omega.size() > 0) {
    const auto [eq, j] = parse_pair(name.substr(6));
    return truth.omega(offset(eq) + j);
  }
  if (name.rfind("gamma_", 0) == 0 && truth.gamma.size() > 0) {
    return truth.gamma(std::stol(name.substr(6)) - 1);
  }
  if (name.rfind("sigma_", 0) == 0 && truth.sigma_eps.size() > 0) {
    const auto [a, b] = parse_pair(name.substr(6));
    if (b >= 0) return truth.sigma_eps(a, b);
  }
  return std::nullopt;
}

void attach_truth(FitReport& report, const SurDataset& data) {
  if (!data.truth) return;
  const auto ks = data.k_per_equation();
  for (auto& p : report.params) p.truth = truth_value(p.name, *data.truth, ks);
}

std::map<std::string, double> error_correlations(const MatrixXd& sigma) {
  std::map<std::string, double> out;
  for (Index a = 0; a < sigma.rows(); ++a) {
    for (Index b = a + 1; b < sigma.cols(); ++b) {
      out["rho_" + std::to_string(a + 1) + "_" + std::to_string(b + 1)] =
          sigma(a, b) / std::sqrt(sigma(a, a) * sigma(b, b));
    }
  }
  return out;
}

FitReport summarize_chain(const GibbsChain& chain, const std::string& method, const SurDataset& data) {
  FitReport report;
  report.method = method;
  report.interval_kind = "hpdi";
  report.interval_prob = 0.95;
  report.params = summarize_draws(chain.names, chain.draws, 0.95, chain.config.thin);
  report.error_correlations = error_correlations(chain.posterior_mean_state().sigma_eps.matrix());
  if (chain.model == ModelKind::surme) {
    const VectorXd sz = chain.column("sigma_z2");
    const VectorXd su = chain.column("sigma_u2");
    double acc = 0.0;
    for (Index r = 0; r < sz.size(); ++r) acc += reliability_ratio(sz(r), su(r));
    report.reliability_ratio = acc / static_cast<double>(sz.size());
  }
  report.score = diag::dic(chain, data, chain.model);
  McmcInfo info;
  info.draws = chain.config.draws;
  info.burnin = chain.config.burnin;
  info.thin = chain.config.thin;
  info.retained = chain.retained();
  info.dataset_digest = chain.dataset_digest;
  report.mcmc = info;
  report.seed = chain.config.seed;
  attach_truth(report, data);
  return report;
}

}  // namespace surme
