#include "surme/chain.hpp"

#include <algorithm>

namespace surme {

std::size_t McmcConfig::retained() const {
  validate();
  return (draws - burnin) / thin;
}

void McmcConfig::validate() const {
  std::vector<std::string> problems;
  if (!(draws > burnin)) problems.emplace_back("draws must exceed burn-in");
  if (thin < 1) problems.emplace_back("thinning factor must be at least 1");
  if (!problems.empty()) throw ValidationError(std::move(problems));
}

std::string to_string(ModelKind kind) { return kind == ModelKind::surme ? "surme" : "sur"; }

ModelKind parse_model_kind(const std::string& label) {
  if (label == "surme") return ModelKind::surme;
  if (label == "sur") return ModelKind::sur;
  throw ParseError("unknown model '" + label + "' (expected surme or sur)");
}

Index GibbsChain::column_index(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw Error("chain has no parameter '" + name + "'");
  return static_cast<Index>(it - names.begin());
}

namespace {

ParamState unpack(const VectorXd& row, ModelKind model, bool exposure, const std::vector<Index>& ks) {
  const auto m = static_cast<Index>(ks.size());
  Index k = 0;
  for (Index km : ks) k += km;
  ParamState s;
  Index pos = 0;
  s.beta = row.segment(pos, k);
  pos += k;
  s.gamma = row.segment(pos, m);
  pos += m;
  MatrixXd sigma(m, m);
  for (Index a = 0; a < m; ++a) {
    for (Index b = a; b < m; ++b) {
      sigma(a, b) = sigma(b, a) = row(pos++);
    }
  }
  s.sigma_eps = PdMatrix(sigma, "Sigma_eps");
  if (model == ModelKind::surme) {
    s.sigma_z2 = row(pos++);
    s.sigma_u2 = row(pos++);
    if (exposure) {
      s.omega = row.segment(pos, k);
    } else {
      s.mu = row.segment(pos, m);
    }
  }
  return s;
}

}  // namespace

ParamState GibbsChain::state_at(Index row) const {
  return unpack(draws.row(row).transpose(), model, exposure, k_per_equation);
}

ParamState GibbsChain::posterior_mean_state() const {
  if (draws.rows() == 0) throw DomainError("posterior mean of an empty chain is undefined");
  return unpack(draws.colwise().mean().transpose(), model, exposure, k_per_equation);
}

void infer_layout(GibbsChain& chain) {
  std::vector<Index> ks;
  bool has_sigma_z2 = false;
  bool has_omega = false;
  for (const auto& name : chain.names) {
    if (name.rfind("beta_", 0) == 0) {
      const auto second = name.find('_', 5);
      if (second == std::string::npos) throw ParseError("malformed parameter name '" + name + "'");
      const auto eq = static_cast<std::size_t>(std::stoul(name.substr(5, second - 5)));
      if (eq == 0) throw ParseError("malformed parameter name '" + name + "'");
      if (ks.size() < eq) ks.resize(eq, 0);
      ++ks[eq - 1];
    } else if (name == "sigma_z2") {
      has_sigma_z2 = true;
    } else if (name.rfind("omega_", 0) == 0) {
      has_omega = true;
    }
  }
  if (ks.empty()) throw ParseError("chain has no beta columns");
  chain.k_per_equation = ks;
  chain.model = has_sigma_z2 ? ModelKind::surme : ModelKind::sur;
  chain.exposure = has_omega;
  const auto expected = chain.model == ModelKind::surme ? surme_parameter_names(ks, chain.exposure)
                                                        : sur_parameter_names(ks);
  if (expected != chain.names) throw ParseError("chain columns are not in canonical order");
}

}  // namespace surme
