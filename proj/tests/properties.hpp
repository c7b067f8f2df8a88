#pragma once

// Property oracles shared by the unit tests and the acceptance binary. Each
// returns the measured discrepancy so callers apply their own thresholds.

#include <cstdint>
#include <string>
#include <vector>

#include "support.hpp"
#include "surme/model.hpp"

namespace surme::testing {

/// Largest TV between each closed-form 1-D conditional and the brute-force
/// joint density restricted to the same line.
double max_grid_tv(const Toy& toy);

/// Largest |estimate - exact| / SE of one update's sampled moments.
struct MomentScore {
  std::string update;
  double worst_se = 0.0;
};

/// Mean and variance of every coordinate of every Gibbs update, `draws`
/// draws each, against the closed-form conditionals on fixed toys.
std::vector<MomentScore> conditional_moment_scores(int draws, std::uint64_t seed);

ParamState prior_draw(const PriorSpec& p, const SurDataset& shape, RngStream& rng);
/// Fresh (Z, y, W) given the parameters; X stays fixed.
void simulate_data(ParamState& s, SurDataset& d, RngStream& rng);
/// Largest gap between p and the chain's empirical CDF at the prior's p-quantile.
double qq_discrepancy(std::vector<double> prior, std::vector<double> chain);

struct QqScore {
  std::string feature;
  double discrepancy = 0.0;
};

/// Prior draws (marginal-conditional) against a chain that alternates data
/// simulation with one Gibbs sweep (successive-conditional), N = 4, M = 2.
std::vector<QqScore> joint_prior_invariance(int sweeps, std::uint64_t seed);

struct McCheck {
  double exact = 0.0;
  double mc = 0.0;
  double se = 0.0;
};

/// integrated_loglik against plain Monte Carlo over Z drawn from its prior.
McCheck integrated_loglik_mc(const Toy& toy, int draws, std::uint64_t seed);

/// Cycles whose ELBO drops by more than rel_tol relative, the step from the
/// initial state included.
std::size_t elbo_decreases(const Problem& p, double rel_tol);

/// Share of iid N(0, 1) chains whose Geweke |z| stays below 1.96.
double geweke_acceptance(int runs, std::size_t length, std::uint64_t seed);

}  // namespace surme::testing
