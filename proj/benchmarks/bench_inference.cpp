#include <benchmark/benchmark.h>

#include "nnbm/model.hpp"
#include "nnbm/response.hpp"
#include "nnbm/sampling.hpp"
#include "nnbm/tap.hpp"

using namespace nnbm;

namespace {

NnbmModel grid_for(int side) {
  return build_square_grid(side, side, -0.4, 0.4, 1.0, 0.8, 29);
}

void BM_TapSolve(benchmark::State& state) {
  const auto model = grid_for(static_cast<int>(state.range(0)));
  SolverConfig cfg;
  for (auto _ : state) {
    auto s = tap_solve(model, LambdaField::zeros(model.n()), cfg);
    benchmark::DoNotOptimize(s.m.data());
  }
  state.SetComplexityN(model.n() * model.topology.edge_count());
}
BENCHMARK(BM_TapSolve)->Arg(4)->Arg(6)->Arg(8)->Arg(10)->Complexity();

void BM_SuspSolve(benchmark::State& state) {
  const auto model = grid_for(static_cast<int>(state.range(0)));
  SolverConfig cfg;
  const auto s = tap_solve(model, LambdaField::zeros(model.n()), cfg);
  std::uint64_t ops = 0;
  int sweeps = 0;
  for (auto _ : state) {
    ResponseDiagnostics diag;
    auto resp = susp_solve(model, s, LambdaField::zeros(model.n()), cfg, std::nullopt, &diag);
    benchmark::DoNotOptimize(resp.M.data());
    ops += diag.edge_ops;
    sweeps += diag.sweeps;
  }
  state.SetComplexityN(model.n() * model.topology.edge_count());
  state.counters["edge_ops_per_sweep"] =
      benchmark::Counter(static_cast<double>(ops) / sweeps);
}
BENCHMARK(BM_SuspSolve)->Arg(4)->Arg(6)->Arg(8)->Arg(10)->Complexity();

void BM_IsuspSolve(benchmark::State& state) {
  const auto model = grid_for(static_cast<int>(state.range(0)));
  SolverConfig cfg;
  for (auto _ : state) {
    auto r = isusp_solve(model, cfg);
    benchmark::DoNotOptimize(r.lambda.lam.data());
  }
  state.SetComplexityN(model.n() * model.topology.edge_count());
}
BENCHMARK(BM_IsuspSolve)->Arg(4)->Arg(6)->Arg(8)->Complexity();

void BM_GibbsSweeps(benchmark::State& state) {
  const auto model = grid_for(6);
  SamplerConfig cfg;
  cfg.burn_in = 0;
  cfg.thin = 1;
  cfg.n_samples = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto d = gibbs_sample(model, cfg);
    benchmark::DoNotOptimize(d.samples.data());
  }
  state.SetItemsProcessed(state.iterations() * cfg.n_samples * model.n());
}
BENCHMARK(BM_GibbsSweeps)->Arg(256)->Arg(1024);

}  // namespace

BENCHMARK_MAIN();
