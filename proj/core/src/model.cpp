#include "surme/model.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

namespace surme {

Index SurDataset::k() const noexcept {
  Index total = 0;
  for (const auto& block : x) total += block.cols();
  return total;
}

Index SurDataset::offset(Index eq) const {
  Index off = 0;
  for (Index j = 0; j < eq; ++j) off += k_of(j);
  return off;
}

std::vector<Index> SurDataset::k_per_equation() const {
  std::vector<Index> ks;
  ks.reserve(x.size());
  for (const auto& block : x) ks.push_back(block.cols());
  return ks;
}

MatrixXd SurDataset::design(Index i) const {
  MatrixXd xi = MatrixXd::Zero(m(), k());
  Index off = 0;
  for (Index eq = 0; eq < m(); ++eq) {
    const auto& block = x[static_cast<std::size_t>(eq)];
    xi.block(eq, off, 1, block.cols()) = block.row(i);
    off += block.cols();
  }
  return xi;
}

MatrixXd SurDataset::apply(const VectorXd& coef) const {
  MatrixXd out(n(), m());
  Index off = 0;
  for (Index eq = 0; eq < m(); ++eq) {
    const auto& block = x[static_cast<std::size_t>(eq)];
    out.col(eq).noalias() = block * coef.segment(off, block.cols());
    off += block.cols();
  }
  return out;
}

VectorXd SurDataset::apply_transpose(const MatrixXd& v) const {
  VectorXd out(k());
  Index off = 0;
  for (Index eq = 0; eq < m(); ++eq) {
    const auto& block = x[static_cast<std::size_t>(eq)];
    out.segment(off, block.cols()).noalias() = block.transpose() * v.col(eq);
    off += block.cols();
  }
  return out;
}

PriorSpec PriorSpec::defaults(const std::vector<Index>& k_per_equation, bool exposure) {
  const auto m = static_cast<Index>(k_per_equation.size());
  Index k = 0;
  for (Index km : k_per_equation) k += km;

  PriorSpec p;
  p.beta0 = VectorXd::Ones(k);
  p.B0 = PdMatrix::identity(k);
  p.gamma0 = VectorXd::Ones(m);
  p.G0 = PdMatrix::identity(m);
  p.nu0 = 50.0;
  MatrixXd centre = MatrixXd::Constant(m, m, 0.5);
  centre.diagonal().setOnes();
  p.S0 = PdMatrix(p.nu0 * centre, "S0").inverse_pd("S0");
  p.omega0 = VectorXd::Ones(k);
  p.O0 = PdMatrix::identity(k);
  p.delta1 = p.delta2 = p.delta3 = p.delta4 = 0.01;
  p.exposure = exposure;
  p.mu0 = VectorXd::Zero(m);
  p.sigma_mu2 = 100.0;
  return p;
}

bool ParamState::operator==(const ParamState& other) const {
  return beta == other.beta && gamma == other.gamma &&
         sigma_eps.matrix() == other.sigma_eps.matrix() && omega == other.omega &&
         mu == other.mu && sigma_z2 == other.sigma_z2 && sigma_u2 == other.sigma_u2 &&
         z == other.z;
}

namespace {

void check_pd(const PdMatrix& m, Index expected, const char* name, std::vector<std::string>& problems) {
  if (m.dim() != expected) {
    problems.push_back(std::string(name) + " has dimension " + std::to_string(m.dim()) +
                       ", expected " + std::to_string(expected));
  }
}

}  // namespace

Problem validate(SurDataset data, PriorSpec priors) { return Problem(std::move(data), std::move(priors)); }

Problem::Problem(SurDataset data, PriorSpec priors) : data_(std::move(data)), priors_(std::move(priors)) {
  std::vector<std::string> problems;
  const Index n = data_.y.rows();
  const Index m = data_.y.cols();

  if (m < 1) problems.push_back("at least one equation is required");
  if (data_.m() != m) {
    problems.push_back("y has " + std::to_string(m) + " columns but " + std::to_string(data_.m()) +
                       " covariate blocks were given");
  }
  if (data_.w.rows() != n) {
    problems.push_back("dimension mismatch: y has " + std::to_string(n) + " rows, W has " +
                       std::to_string(data_.w.rows()));
  }
  if (data_.w.cols() != m) {
    problems.push_back("dimension mismatch: W has " + std::to_string(data_.w.cols()) +
                       " columns, expected " + std::to_string(m));
  }
  for (std::size_t eq = 0; eq < data_.x.size(); ++eq) {
    if (data_.x[eq].rows() != n) {
      problems.push_back("dimension mismatch: X block " + std::to_string(eq + 1) + " has " +
                         std::to_string(data_.x[eq].rows()) + " rows, expected " + std::to_string(n));
    }
    if (data_.x[eq].cols() < 1) {
      problems.push_back("X block " + std::to_string(eq + 1) + " has no columns");
    }
    if (!data_.x[eq].allFinite()) problems.push_back("X block " + std::to_string(eq + 1) + " has missing values");
  }
  if (!data_.y.allFinite()) problems.push_back("y has missing values");
  if (!data_.w.allFinite()) problems.push_back("W has missing values");

  const Index k = data_.k();
  const auto& p = priors_;
  if (p.beta0.size() != k) problems.push_back("beta0 has length " + std::to_string(p.beta0.size()) + ", expected " + std::to_string(k));
  check_pd(p.B0, k, "B0", problems);
  if (p.gamma0.size() != m) problems.push_back("gamma0 has length " + std::to_string(p.gamma0.size()) + ", expected " + std::to_string(m));
  check_pd(p.G0, m, "G0", problems);
  check_pd(p.S0, m, "S0", problems);
  if (!(p.nu0 >= static_cast<double>(m))) problems.push_back("nu0 must be at least M");
  if (p.exposure) {
    if (p.omega0.size() != k) problems.push_back("omega0 has length " + std::to_string(p.omega0.size()) + ", expected " + std::to_string(k));
    check_pd(p.O0, k, "O0", problems);
  } else {
    if (p.mu0.size() != m) problems.push_back("mu0 has length " + std::to_string(p.mu0.size()) + ", expected " + std::to_string(m));
    if (!(p.sigma_mu2 > 0.0)) problems.push_back("sigma_mu2 must be positive");
  }
  const double deltas[] = {p.delta1, p.delta2, p.delta3, p.delta4};
  for (int j = 0; j < 4; ++j) {
    if (!(deltas[j] > 0.0)) problems.push_back("delta" + std::to_string(j + 1) + " must be positive");
  }
  if (!problems.empty()) throw ValidationError(std::move(problems));

  cross_.resize(static_cast<std::size_t>(m * m));
  for (Index a = 0; a < m; ++a) {
    for (Index b = 0; b < m; ++b) {
      cross_[static_cast<std::size_t>(a * m + b)] =
          data_.x[static_cast<std::size_t>(a)].transpose() * data_.x[static_cast<std::size_t>(b)];
    }
  }
  gram_ = weighted_gram(MatrixXd::Identity(m, m));

  b0_inv_ = p.B0.inverse();
  b0_inv_beta0_ = b0_inv_ * p.beta0;
  g0_inv_ = p.G0.inverse();
  g0_inv_gamma0_ = g0_inv_ * p.gamma0;
  s0_inv_ = p.S0.inverse();
  if (p.exposure) {
    o0_inv_ = p.O0.inverse();
    o0_inv_omega0_ = o0_inv_ * p.omega0;
  }
}

MatrixXd Problem::weighted_gram(const MatrixXd& p) const {
  const Index m = data_.m();
  MatrixXd out = MatrixXd::Zero(data_.k(), data_.k());
  Index row = 0;
  for (Index a = 0; a < m; ++a) {
    Index col = 0;
    for (Index b = 0; b < m; ++b) {
      if (p(a, b) != 0.0) {
        out.block(row, col, data_.k_of(a), data_.k_of(b)) = p(a, b) * cross_[static_cast<std::size_t>(a * m + b)];
      }
      col += data_.k_of(b);
    }
    row += data_.k_of(a);
  }
  return out;
}

MatrixXd Problem::latent_mean(const ParamState& s) const {
  if (priors_.exposure) return data_.apply(s.omega);
  return MatrixXd::Ones(data_.n(), 1) * s.mu.transpose();
}

double reliability_ratio(double sigma_z2, double sigma_u2) {
  if (!(sigma_z2 > 0.0) || !(sigma_u2 >= 0.0)) {
    throw DomainError("reliability_ratio: need sigma_z2 > 0 and sigma_u2 >= 0");
  }
  return sigma_z2 / (sigma_z2 + sigma_u2);
}

std::vector<std::string> sur_parameter_names(const std::vector<Index>& k_per_equation) {
  std::vector<std::string> names;
  const auto m = static_cast<Index>(k_per_equation.size());
  for (Index eq = 0; eq < m; ++eq) {
    for (Index j = 0; j < k_per_equation[static_cast<std::size_t>(eq)]; ++j) {
      names.push_back("beta_" + std::to_string(eq + 1) + "_" + std::to_string(j + 1));
    }
  }
  for (Index eq = 0; eq < m; ++eq) names.push_back("gamma_" + std::to_string(eq + 1));
  for (Index a = 0; a < m; ++a) {
    for (Index b = a; b < m; ++b) names.push_back("sigma_" + std::to_string(a + 1) + "_" + std::to_string(b + 1));
  }
  return names;
}

std::vector<std::string> surme_parameter_names(const std::vector<Index>& k_per_equation, bool exposure) {
  auto names = sur_parameter_names(k_per_equation);
  names.emplace_back("sigma_z2");
  names.emplace_back("sigma_u2");
  const auto m = static_cast<Index>(k_per_equation.size());
  if (exposure) {
    for (Index eq = 0; eq < m; ++eq) {
      for (Index j = 0; j < k_per_equation[static_cast<std::size_t>(eq)]; ++j) {
        names.push_back("omega_" + std::to_string(eq + 1) + "_" + std::to_string(j + 1));
      }
    }
  } else {
    for (Index eq = 0; eq < m; ++eq) names.push_back("mu_" + std::to_string(eq + 1));
  }
  return names;
}

VectorXd flatten(const ParamState& s, bool exposure) {
  const Index k = s.beta.size();
  const Index m = s.gamma.size();
  const Index tail = exposure ? s.omega.size() : s.mu.size();
  VectorXd out(k + m + m * (m + 1) / 2 + 2 + tail);
  Index pos = 0;
  out.segment(pos, k) = s.beta;
  pos += k;
  out.segment(pos, m) = s.gamma;
  pos += m;
  for (Index a = 0; a < m; ++a) {
    for (Index b = a; b < m; ++b) out(pos++) = s.sigma_eps(a, b);
  }
  out(pos++) = s.sigma_z2;
  out(pos++) = s.sigma_u2;
  out.segment(pos, tail) = exposure ? s.omega : s.mu;
  return out;
}

std::string dataset_digest(const SurDataset& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const MatrixXd& mat) {
    for (Index c = 0; c < mat.cols(); ++c) {
      for (Index r = 0; r < mat.rows(); ++r) {
        const double v = mat(r, c);
        unsigned char bytes[sizeof(double)];
        std::memcpy(bytes, &v, sizeof(double));
        for (unsigned char byte : bytes) {
          h ^= byte;
          h *= 0x100000001b3ULL;
        }
      }
    }
  };
  mix(data.y);
  mix(data.w);
  for (const auto& block : data.x) mix(block);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

const ParamSummary& FitReport::at(const std::string& name) const {
  const ParamSummary* p = find(name);
  if (p == nullptr) throw Error("report has no parameter '" + name + "'");
  return *p;
}

}  // namespace surme
