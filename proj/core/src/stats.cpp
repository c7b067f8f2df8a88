#include "surme/stats.hpp"

#include <cmath>
#include <string>

namespace surme {

namespace {

bool is_symmetric(const MatrixXd& a) {
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Eigen::LLT<MatrixXd> pd_factor(const MatrixXd& a, std::string_view name, bool* jittered) {
  if (a.rows() != a.cols()) {
    throw PdFailure(std::string(name), "not square");
  }
  if (!a.allFinite()) {
    throw PdFailure(std::string(name), "non-finite entries");
  }
  if (jittered != nullptr) *jittered = false;
  Eigen::LLT<MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) return llt;

  const double jitter = 1e-10 * a.trace() / static_cast<double>(a.rows());
  if (jitter > 0.0) {
    MatrixXd repaired = a;
    repaired.diagonal().array() += jitter;
    llt.compute(repaired);
    if (llt.info() == Eigen::Success) {
      if (jittered != nullptr) *jittered = true;
      return llt;
    }
  }
  throw PdFailure(std::string(name));
}

PdMatrix::PdMatrix(MatrixXd entries, std::string_view name) : entries_(std::move(entries)) {
  if (entries_.rows() != entries_.cols() || entries_.rows() == 0) {
    throw PdFailure(std::string(name), "not a non-empty square matrix");
  }
  if (!entries_.allFinite()) {
    throw PdFailure(std::string(name), "non-finite entries");
  }
  if (!is_symmetric(entries_)) {
    throw PdFailure(std::string(name), "not symmetric");
  }
  entries_ = 0.5 * (entries_ + entries_.transpose()).eval();
  llt_ = pd_factor(entries_, name, &jittered_);
  if (jittered_) {
    entries_ = llt_.reconstructedMatrix();
  }
}

PdMatrix PdMatrix::identity(Index dim) { return PdMatrix(MatrixXd::Identity(dim, dim), "identity"); }

PdMatrix PdMatrix::diagonal(const VectorXd& diag, std::string_view name) {
  return PdMatrix(MatrixXd(diag.asDiagonal()), name);
}

MatrixXd PdMatrix::inverse() const {
  return llt_.solve(MatrixXd::Identity(dim(), dim()));
}

PdMatrix PdMatrix::inverse_pd(std::string_view name) const { return PdMatrix(inverse(), name); }

double PdMatrix::log_det() const {
  const MatrixXd& l = llt_.matrixLLT();
  return 2.0 * l.diagonal().array().log().sum();
}

double RngStream::uniform(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(engine_);
}

double RngStream::gamma(double shape) {
  return std::gamma_distribution<double>(shape, 1.0)(engine_);
}

VectorXd RngStream::normal_vector(Index n) {
  VectorXd v(n);
  for (Index i = 0; i < n; ++i) v(i) = normal();
  return v;
}

RngStream RngStream::derive(std::uint64_t index) const {
  return RngStream(splitmix64(seed_ ^ splitmix64(index + 0x632be59bd9b4e019ULL)));
}

VectorXd sample_mvn(const VectorXd& mean, const PdMatrix& cov, RngStream& rng) {
  if (mean.size() != cov.dim()) {
    throw DomainError("sample_mvn: mean has dimension " + std::to_string(mean.size()) +
                      " but covariance has dimension " + std::to_string(cov.dim()));
  }
  return mean + cov.lower() * rng.normal_vector(mean.size());
}

VectorXd sample_mvn_canonical(const VectorXd& b, const PdMatrix& precision, RngStream& rng) {
  if (b.size() != precision.dim()) {
    throw DomainError("sample_mvn_canonical: dimension mismatch");
  }
  // Q = L L'; x = Q^{-1} b + L'^{-1} e has covariance Q^{-1}.
  const MatrixXd l = precision.lower();
  VectorXd mean = precision.solve(b);
  VectorXd e = rng.normal_vector(b.size());
  l.transpose().triangularView<Eigen::Upper>().solveInPlace(e);
  return mean + e;
}

PdMatrix sample_wishart(double df, const PdMatrix& scale, RngStream& rng) {
  const Index p = scale.dim();
  if (!(df >= static_cast<double>(p)) || !std::isfinite(df)) {
    throw DomainError("sample_wishart: degrees of freedom " + std::to_string(df) +
                      " below dimension " + std::to_string(p));
  }
  MatrixXd a = MatrixXd::Zero(p, p);
  for (Index j = 0; j < p; ++j) {
    a(j, j) = std::sqrt(rng.chi_square(df - static_cast<double>(j)));
    for (Index i = j + 1; i < p; ++i) a(i, j) = rng.normal();
  }
  const MatrixXd la = scale.lower() * a;
  return PdMatrix(la * la.transpose(), "wishart draw");
}

double sample_invgamma(double shape, double rate, RngStream& rng) {
  if (!(shape > 0.0) || !(rate > 0.0)) {
    throw DomainError("sample_invgamma: shape and rate must be positive (got " +
                      std::to_string(shape) + ", " + std::to_string(rate) + ")");
  }
  return rate / rng.gamma(shape);
}

VectorXd pd_solve(const PdMatrix& a, const VectorXd& b) {
  if (b.size() != a.dim()) throw DomainError("pd_solve: dimension mismatch");
  return a.solve(b);
}

MatrixXd pd_solve(const PdMatrix& a, const MatrixXd& b) {
  if (b.rows() != a.dim()) throw DomainError("pd_solve: dimension mismatch");
  return a.solve(b);
}

}  // namespace surme
