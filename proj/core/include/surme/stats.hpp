#pragma once

// Random variate generation and positive-definite linear algebra shared by
// every estimator.

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "surme/errors.hpp"

namespace surme {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Symmetric positive-definite matrix with its Cholesky factor cached.
///
/// Construction symmetrizes the input (after checking symmetry to 1e-12
/// relative) and factorizes it. If the first factorization fails a single
/// diagonal jitter of 1e-10 * trace / dim is applied; a second failure throws
/// PdFailure naming the matrix.
class PdMatrix {
 public:
  PdMatrix() = default;
  explicit PdMatrix(MatrixXd entries, std::string_view name = "matrix");

  static PdMatrix identity(Index dim);
  static PdMatrix diagonal(const VectorXd& diag, std::string_view name = "matrix");

  Index dim() const noexcept { return entries_.rows(); }
  const MatrixXd& matrix() const noexcept { return entries_; }
  /// Lower-triangular factor L with matrix() = L L'.
  MatrixXd lower() const { return llt_.matrixL(); }

  VectorXd solve(const VectorXd& rhs) const { return llt_.solve(rhs); }
  MatrixXd solve(const MatrixXd& rhs) const { return llt_.solve(rhs); }
  MatrixXd inverse() const;
  PdMatrix inverse_pd(std::string_view name = "inverse") const;
  double log_det() const;
  /// True when construction needed the jitter retry.
  bool jittered() const noexcept { return jittered_; }

  double operator()(Index r, Index c) const { return entries_(r, c); }

 private:
  MatrixXd entries_;
  Eigen::LLT<MatrixXd> llt_;
  bool jittered_ = false;
};

/// Seeded pseudo-random stream. Equal seeds yield bit-identical sequences.
/// A stream must not be shared between concurrent callers.
class RngStream {
 public:
  static constexpr std::string_view algorithm_id = "mt19937_64";

  explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  double normal() { return normal_(engine_); }
  double uniform(double lo, double hi);
  /// Gamma(shape, 1) variate.
  double gamma(double shape);
  double chi_square(double df) { return 2.0 * gamma(0.5 * df); }
  VectorXd normal_vector(Index n);

  /// Independent child stream, a deterministic function of (seed, index).
  RngStream derive(std::uint64_t index) const;

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// 64-bit mixing function used to derive seeds.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Cholesky factorization under the one-time-jitter policy described on PdMatrix.
Eigen::LLT<MatrixXd> pd_factor(const MatrixXd& a, std::string_view name, bool* jittered = nullptr);

/// Draw from N(mean, cov).
VectorXd sample_mvn(const VectorXd& mean, const PdMatrix& cov, RngStream& rng);

/// Draw from N(precision^{-1} b, precision^{-1}) using only a factorization of
/// the precision; the standard form of every Gaussian full conditional.
VectorXd sample_mvn_canonical(const VectorXd& b, const PdMatrix& precision, RngStream& rng);

/// Wishart draw with E = df * scale (Bartlett construction). Requires df >= dim.
PdMatrix sample_wishart(double df, const PdMatrix& scale, RngStream& rng);

/// Inverse-gamma draw with density proportional to x^{-(shape+1)} exp(-rate/x).
double sample_invgamma(double shape, double rate, RngStream& rng);

/// Solve A x = b through the Cholesky factor of A.
VectorXd pd_solve(const PdMatrix& a, const VectorXd& b);
MatrixXd pd_solve(const PdMatrix& a, const MatrixXd& b);

}  // namespace surme
