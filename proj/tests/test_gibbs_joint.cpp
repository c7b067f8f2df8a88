#include <doctest.h>

#include "properties.hpp"
#include "surme/gibbs.hpp"

// Joint-distribution test: draws from the prior (marginal-conditional) must
// match the stationary marginals of a chain that alternates "simulate data
// from the current parameters" with one Gibbs sweep (successive-conditional).

using namespace surme;
using namespace surme::testing;

TEST_SUITE("gibbs") {

TEST_CASE("successive-conditional chain preserves the prior marginals (N = 4, M = 2)") {
  for (const auto& score : joint_prior_invariance(100000, 4100)) {
    INFO(score.feature << " QQ discrepancy " << score.discrepancy);
    CHECK(score.discrepancy < 0.05);
  }
}

TEST_CASE("a broken conditional is caught by the same joint test") {
  // Sanity check on the test's power: dropping the W term from the Z update
  // shifts the sigma_u2 marginal.
  Toy toy = make_toy(4, {2, 2}, true, 42);
  const PriorSpec pr = toy.priors;
  const int sweeps = 20000;
  RngStream rng(4200);
  std::vector<double> prior_u, chain_u;
  for (int r = 0; r < sweeps; ++r) prior_u.push_back(std::log(prior_draw(pr, toy.data, rng).sigma_u2));

  SurDataset d = toy.data;
  ParamState s = prior_draw(pr, d, rng);
  simulate_data(s, d, rng);
  for (int r = 0; r < sweeps; ++r) {
    const Problem p(d, pr);
    s.beta = gibbs::update_beta(s, p, rng);
    s.gamma = gibbs::update_gamma(s, p, rng);
    s.sigma_eps = gibbs::update_sigma_eps(s, p, rng);
    ParamState no_reading = s;
    no_reading.sigma_u2 = 1e6;
    s.z = gibbs::update_z(no_reading, p, rng);
    s.omega = gibbs::update_omega(s, p, rng);
    s.sigma_z2 = gibbs::update_sigma_z2(s, p, rng);
    s.sigma_u2 = gibbs::update_sigma_u2(s, p, rng);
    chain_u.push_back(std::log(s.sigma_u2));
    simulate_data(s, d, rng);
  }
  CHECK(qq_discrepancy(prior_u, chain_u) > 0.05);
}

}  // TEST_SUITE
