#pragma once

// Fixtures and brute-force reference densities shared by the unit tests. The
// densities here are written out from scratch so they can serve as oracles for
// the library's closed-form conditionals.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/LU>

#include "surme/model.hpp"
#include "surme/stats.hpp"

namespace surme::testing {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

struct Toy {
  SurDataset data;
  PriorSpec priors;
  ParamState state;  ///< generating state, Z included
};

/// Small proper priors so every joint density is integrable.
inline PriorSpec toy_priors(const std::vector<Index>& ks, bool exposure) {
  const auto m = static_cast<Index>(ks.size());
  Index k = 0;
  for (Index km : ks) k += km;
  PriorSpec p;
  p.beta0 = VectorXd::Constant(k, 0.5);
  p.B0 = PdMatrix(2.0 * MatrixXd::Identity(k, k), "B0");
  p.gamma0 = VectorXd::Constant(m, 0.5);
  p.G0 = PdMatrix(2.0 * MatrixXd::Identity(m, m), "G0");
  p.nu0 = static_cast<double>(m) + 4.0;
  p.S0 = PdMatrix(MatrixXd::Identity(m, m) / p.nu0, "S0");
  p.omega0 = VectorXd::Constant(k, 0.25);
  p.O0 = PdMatrix::identity(k);
  p.delta1 = 3.0;
  p.delta2 = 2.0;
  p.delta3 = 3.0;
  p.delta4 = 1.0;
  p.exposure = exposure;
  p.mu0 = VectorXd::Zero(m);
  p.sigma_mu2 = 4.0;
  return p;
}

/// Data simulated from a fixed generating state: intercept plus normal
/// covariates, moderately correlated errors.
inline Toy make_toy(Index n, const std::vector<Index>& ks, bool exposure, std::uint64_t seed) {
  RngStream rng(seed);
  const auto m = static_cast<Index>(ks.size());
  Toy t;
  t.data.x.resize(static_cast<std::size_t>(m));
  Index k = 0;
  for (Index eq = 0; eq < m; ++eq) {
    MatrixXd x(n, ks[static_cast<std::size_t>(eq)]);
    for (Index i = 0; i < n; ++i) {
      x(i, 0) = 1.0;
      for (Index j = 1; j < x.cols(); ++j) x(i, j) = rng.normal();
    }
    t.data.x[static_cast<std::size_t>(eq)] = x;
    k += x.cols();
  }
  t.data.y = MatrixXd::Zero(n, m);
  t.data.w = MatrixXd::Zero(n, m);

  ParamState& s = t.state;
  s.beta = VectorXd::LinSpaced(k, 0.5, 1.5);
  s.gamma = VectorXd::LinSpaced(m, 1.2, 0.8);
  MatrixXd sig = MatrixXd::Constant(m, m, 0.3);
  sig.diagonal().setConstant(0.8);
  s.sigma_eps = PdMatrix(sig, "sigma_eps");
  if (exposure) {
    s.omega = VectorXd::LinSpaced(k, 0.7, -0.3);
  } else {
    s.mu = VectorXd::LinSpaced(m, 1.0, 2.0);
  }
  s.sigma_z2 = 0.9;
  s.sigma_u2 = 0.35;

  const MatrixXd mean_z = exposure ? t.data.apply(s.omega) : MatrixXd(MatrixXd::Ones(n, 1) * s.mu.transpose());
  s.z = mean_z;
  const MatrixXd l = s.sigma_eps.lower();
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) s.z(i, j) += std::sqrt(s.sigma_z2) * rng.normal();
    for (Index j = 0; j < m; ++j) t.data.w(i, j) = s.z(i, j) + std::sqrt(s.sigma_u2) * rng.normal();
  }
  const MatrixXd xb = t.data.apply(s.beta);
  for (Index i = 0; i < n; ++i) {
    const VectorXd e = l * rng.normal_vector(m);
    for (Index j = 0; j < m; ++j) t.data.y(i, j) = xb(i, j) + s.gamma(j) * s.z(i, j) + e(j);
  }
  t.priors = toy_priors(ks, exposure);
  return t;
}

inline double mvn_logpdf(const VectorXd& x, const VectorXd& mean, const MatrixXd& cov) {
  Eigen::LLT<MatrixXd> llt(cov);
  const VectorXd d = x - mean;
  const VectorXd v = llt.matrixL().solve(d);
  double log_det = 0.0;
  for (Index j = 0; j < cov.rows(); ++j) log_det += 2.0 * std::log(llt.matrixL()(j, j));
  return -0.5 * (static_cast<double>(x.size()) * kLog2Pi + log_det + v.squaredNorm());
}

inline double invgamma_logpdf(double x, double shape, double rate) {
  return shape * std::log(rate) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - rate / x;
}

/// Wishart log-density of the precision P ~ W(df, scale), up to its
/// normalizing constant.
inline double wishart_log_kernel(const MatrixXd& prec, double df, const MatrixXd& scale) {
  Eigen::LLT<MatrixXd> llt(prec);
  if (llt.info() != Eigen::Success) return -INFINITY;
  double log_det = 0.0;
  for (Index j = 0; j < prec.rows(); ++j) log_det += 2.0 * std::log(llt.matrixL()(j, j));
  const MatrixXd scale_inv = scale.llt().solve(MatrixXd::Identity(scale.rows(), scale.cols()));
  return 0.5 * (df - static_cast<double>(prec.rows()) - 1.0) * log_det - 0.5 * (scale_inv * prec).trace();
}

/// log p(y, W, Z, theta) evaluated term by term, with the Wishart prior on the
/// precision. Normalizing constants that do not depend on the state are kept
/// only where convenient; callers compare normalized shapes.
inline double log_joint_with_precision(const ParamState& s, const MatrixXd& prec, const SurDataset& d,
                                       const PriorSpec& p) {
  const Index n = d.n();
  const Index m = d.m();
  const MatrixXd sigma = prec.llt().solve(MatrixXd::Identity(m, m));
  double out = 0.0;
  for (Index i = 0; i < n; ++i) {
    const MatrixXd xi = d.design(i);
    const VectorXd zi = s.z.row(i).transpose();
    const VectorXd mean_y = xi * s.beta + zi.cwiseProduct(s.gamma);
    out += mvn_logpdf(d.y.row(i).transpose(), mean_y, sigma);
    out += mvn_logpdf(d.w.row(i).transpose(), zi, s.sigma_u2 * MatrixXd::Identity(m, m));
    const VectorXd mean_z = p.exposure ? VectorXd(xi * s.omega) : s.mu;
    out += mvn_logpdf(zi, mean_z, s.sigma_z2 * MatrixXd::Identity(m, m));
  }
  out += mvn_logpdf(s.beta, p.beta0, p.B0.matrix());
  out += mvn_logpdf(s.gamma, p.gamma0, p.G0.matrix());
  out += wishart_log_kernel(prec, p.nu0, p.S0.matrix());
  if (p.exposure) {
    out += mvn_logpdf(s.omega, p.omega0, p.O0.matrix());
  } else {
    out += mvn_logpdf(s.mu, p.mu0, p.sigma_mu2 * MatrixXd::Identity(m, m));
  }
  out += invgamma_logpdf(s.sigma_z2, p.delta1, p.delta2);
  out += invgamma_logpdf(s.sigma_u2, p.delta3, p.delta4);
  return out;
}

inline double log_joint(const ParamState& s, const SurDataset& d, const PriorSpec& p) {
  return log_joint_with_precision(s, s.sigma_eps.inverse(), d, p);
}

/// Conditional of coordinate j of N(mean, cov) given the others at x.
inline std::pair<double, double> normal_coordinate(const VectorXd& mean, const MatrixXd& cov, const VectorXd& x,
                                                   Index j) {
  const MatrixXd q = cov.llt().solve(MatrixXd::Identity(cov.rows(), cov.cols()));
  const double var = 1.0 / q(j, j);
  double shift = 0.0;
  for (Index l = 0; l < x.size(); ++l) {
    if (l != j) shift += q(j, l) * (x(l) - mean(l));
  }
  return {mean(j) - var * shift, var};
}

/// Total variation distance between two 1-D log-densities (each known only up
/// to a constant) on an equally spaced grid over [lo, hi].
inline double grid_tv(const std::function<double(double)>& log_f, const std::function<double(double)>& log_g,
                      double lo, double hi, int points = 20001) {
  std::vector<double> f(static_cast<std::size_t>(points));
  std::vector<double> g(static_cast<std::size_t>(points));
  double fmax = -INFINITY;
  double gmax = -INFINITY;
  const double h = (hi - lo) / (points - 1);
  for (int k = 0; k < points; ++k) {
    const double t = lo + h * k;
    f[static_cast<std::size_t>(k)] = log_f(t);
    g[static_cast<std::size_t>(k)] = log_g(t);
    fmax = std::max(fmax, f[static_cast<std::size_t>(k)]);
    gmax = std::max(gmax, g[static_cast<std::size_t>(k)]);
  }
  double fs = 0.0;
  double gs = 0.0;
  for (int k = 0; k < points; ++k) {
    f[static_cast<std::size_t>(k)] = std::exp(f[static_cast<std::size_t>(k)] - fmax);
    g[static_cast<std::size_t>(k)] = std::exp(g[static_cast<std::size_t>(k)] - gmax);
    fs += f[static_cast<std::size_t>(k)];
    gs += g[static_cast<std::size_t>(k)];
  }
  double tv = 0.0;
  for (int k = 0; k < points; ++k) {
    tv += std::abs(f[static_cast<std::size_t>(k)] / fs - g[static_cast<std::size_t>(k)] / gs);
  }
  return 0.5 * tv;
}

/// Interval on which log_f lies within `drop` of its maximum, found by
/// scanning [lo, hi].
inline std::pair<double, double> support_window(const std::function<double(double)>& log_f, double lo, double hi,
                                                double drop = 40.0) {
  const int points = 4001;
  const double h = (hi - lo) / (points - 1);
  double fmax = -INFINITY;
  for (int k = 0; k < points; ++k) fmax = std::max(fmax, log_f(lo + h * k));
  double a = hi;
  double b = lo;
  for (int k = 0; k < points; ++k) {
    const double t = lo + h * k;
    if (log_f(t) > fmax - drop) {
      a = std::min(a, t);
      b = std::max(b, t);
    }
  }
  return {std::max(lo, a - h), std::min(hi, b + h)};
}

/// Welford accumulator for MC moment checks.
struct Moments {
  double n = 0.0;
  double mean = 0.0;
  double m2 = 0.0;
  std::vector<double> xs;

  void add(double x) {
    n += 1.0;
    const double d = x - mean;
    mean += d / n;
    m2 += d * (x - mean);
    xs.push_back(x);
  }
  double var() const { return m2 / (n - 1.0); }
  double se_mean() const { return std::sqrt(var() / n); }
  /// Standard error of the sample variance from the fourth central moment.
  double se_var() const {
    double m4 = 0.0;
    for (double x : xs) m4 += std::pow(x - mean, 4);
    m4 /= n;
    const double v = m2 / n;
    return std::sqrt(std::max(m4 - v * v, 0.0) / n);
  }
};

}  // namespace surme::testing
