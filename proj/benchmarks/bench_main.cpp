// Microbenchmarks for the hot paths: the local map, panel simulation,
// network construction, and factor analysis.

#include "cmfactor/factor_analysis.hpp"
#include "cmfactor/local_map.hpp"
#include "cmfactor/network.hpp"
#include "cmfactor/simulator.hpp"

#include <benchmark/benchmark.h>

using namespace cmfactor;

namespace {

void BM_LocalMapStep(benchmark::State& state) {
  const LocalMapParams map;
  double r = map.r0 + 0.01;
  for (auto _ : state) {
    r = local_map_step(r, map);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_LocalMapStep);

void BM_SimulatePanel(benchmark::State& state) {
  SimConfig cfg;
  cfg.net.m = 3;
  cfg.net.n = 10;
  cfg.net.seed = 1;
  cfg.sim_seed = 2;
  const CouplingNetwork net = build_coupling(cfg.net);
  for (auto _ : state) {
    const ReturnPanel panel = simulate_panel(cfg, net);
    benchmark::DoNotOptimize(panel.returns.data());
  }
}
BENCHMARK(BM_SimulatePanel);

void BM_BuildCoupling(benchmark::State& state) {
  NetworkParams params;
  params.m = static_cast<int>(state.range(0));
  params.n = 10;
  params.seed = 3;
  for (auto _ : state) {
    const CouplingNetwork net = build_coupling(params);
    benchmark::DoNotOptimize(net.coupling.data());
  }
}
BENCHMARK(BM_BuildCoupling)->Arg(3)->Arg(6);

void BM_PcaSpectrum(benchmark::State& state) {
  SimConfig cfg;
  cfg.net.m = 3;
  cfg.net.n = 10;
  cfg.net.seed = 4;
  cfg.sim_seed = 5;
  const CouplingNetwork net = build_coupling(cfg.net);
  const ReturnPanel panel = simulate_panel(cfg, net);
  for (auto _ : state) {
    const SpectrumReport report = pca_spectrum(panel);
    benchmark::DoNotOptimize(report.eigenvalues.data());
  }
}
BENCHMARK(BM_PcaSpectrum);

void BM_AnalyzePanel(benchmark::State& state) {
  SimConfig cfg;
  cfg.net.m = 3;
  cfg.net.n = 10;
  cfg.net.seed = 6;
  cfg.sim_seed = 7;
  const CouplingNetwork net = build_coupling(cfg.net);
  const ReturnPanel panel = simulate_panel(cfg, net);
  const SpectrumReport baseline = baseline_spectrum(cfg, net);
  for (auto _ : state) {
    const FactorFit fit = analyze_panel(panel, baseline);
    benchmark::DoNotOptimize(fit.m_hat);
  }
}
BENCHMARK(BM_AnalyzePanel);

}  // namespace

BENCHMARK_MAIN();
