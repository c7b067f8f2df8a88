#include <benchmark/benchmark.h>

#include "surme/diagnostics.hpp"
#include "surme/gibbs.hpp"
#include "surme/mfvb.hpp"
#include "surme/simulate.hpp"

using namespace surme;

namespace {

SurDataset case_data(Index n) {
  DgpConfig cfg = DgpConfig::preset("I-1");
  cfg.n = n;
  RngStream rng(1);
  return generate_dataset(cfg, rng);
}

void BM_GibbsSweep(benchmark::State& state) {
  const SurDataset d = case_data(state.range(0));
  const Problem p = validate(d, PriorSpec::defaults(d.k_per_equation()));
  ParamState s = gibbs::initial_state(p);
  RngStream rng(2);
  for (auto _ : state) {
    gibbs::sweep(s, p, rng);
    benchmark::DoNotOptimize(s.gamma.data());
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_GibbsSweep)->Arg(300)->Arg(3000);

void BM_CaviCycle(benchmark::State& state) {
  const SurDataset d = case_data(state.range(0));
  const Problem p = validate(d, PriorSpec::defaults(d.k_per_equation()));
  mfvb::VariationalState s = mfvb::initial_state(p);
  for (auto _ : state) {
    s = mfvb::cavi_cycle(s, p);
    benchmark::DoNotOptimize(s.mu_q_gamma.data());
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_CaviCycle)->Arg(300)->Arg(3000);

void BM_Elbo(benchmark::State& state) {
  const SurDataset d = case_data(300);
  const Problem p = validate(d, PriorSpec::defaults(d.k_per_equation()));
  const auto s = mfvb::cavi_cycle(mfvb::initial_state(p), p);
  for (auto _ : state) benchmark::DoNotOptimize(mfvb::elbo(s, p));
}
BENCHMARK(BM_Elbo);

void BM_IntegratedLoglik(benchmark::State& state) {
  const SurDataset d = case_data(300);
  ParamState s;
  const DgpConfig cfg = DgpConfig::preset("I-1");
  s.beta = cfg.beta;
  s.gamma = cfg.gamma;
  s.omega = cfg.omega;
  s.sigma_eps = PdMatrix(cfg.sigma_eps, "sigma_eps");
  s.sigma_z2 = cfg.sigma_z2;
  s.sigma_u2 = cfg.sigma_u2();
  for (auto _ : state) benchmark::DoNotOptimize(diag::integrated_loglik(s, d));
}
BENCHMARK(BM_IntegratedLoglik);

void BM_InefficiencyFactor(benchmark::State& state) {
  RngStream rng(3);
  std::vector<double> x(static_cast<std::size_t>(state.range(0)));
  double v = 0.0;
  for (auto& xi : x) xi = v = 0.9 * v + rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(diag::inefficiency_factor(x));
}
BENCHMARK(BM_InefficiencyFactor)->Arg(500)->Arg(50000);

}  // namespace
BENCHMARK_MAIN();
