#include <benchmark/benchmark.h>

#include <string>

#include "qndsim/config.hpp"
#include "qndsim/dynamics.hpp"
#include "qndsim/estimators.hpp"
#include "qndsim/measurement.hpp"
#include "qndsim/rng.hpp"
#include "qndsim/scenario.hpp"

using namespace qndsim;

namespace {

const ExperimentConfig& paper() {
  static const ExperimentConfig cfg =
      load_config(std::string(QNDSIM_CONFIG_DIR) + "/paper.json");
  return cfg;
}

EnsembleState css(std::size_t n) {
  Engine rng = make_stream(1, 0, Stage::sampling);
  EnsembleState s = make_ensemble(sample_thermal_ensemble(paper().trap_config(), n, rng));
  prepare_css(s);
  return s;
}

}  // namespace

static void BM_ThermalSampling(benchmark::State& state) {
  const TrapConfig trap = paper().trap_config();
  const auto n = static_cast<std::size_t>(state.range(0));
  Engine rng = make_stream(2, 0, Stage::sampling);
  for (auto _ : state) benchmark::DoNotOptimize(sample_thermal_ensemble(trap, n, rng));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ThermalSampling)->Arg(2000)->Arg(20000);

static void BM_EffectiveCouplings(benchmark::State& state) {
  ExperimentConfig cfg = paper();
  if (state.range(1) != 0) cfg.probe.coupling_mode = "closed_form";
  const EnsembleState s = css(static_cast<std::size_t>(state.range(0)));
  const CavityConfig cav = cfg.cavity_config();
  const TrapConfig trap = cfg.trap_config();
  const ProbeConfig probe = cfg.probe_config(Measurement::m1);
  for (auto _ : state) benchmark::DoNotOptimize(effective_couplings(s, cav, trap, probe));
  state.SetItemsProcessed(state.iterations() * state.range(0));
  state.SetLabel(state.range(1) ? "closed_form" : "trajectory_average");
}
BENCHMARK(BM_EffectiveCouplings)->Args({2000, 0})->Args({2000, 1})->Args({20000, 0})->Args({20000, 1});

static void BM_KineticStep(benchmark::State& state) {
  EnsembleState s = css(static_cast<std::size_t>(state.range(0)));
  DynamicsParams p = paper().dynamics_params();
  p.loss_rate = 0.0;
  KineticIntegrator integ(s, p, paper().trap_config(), make_stream(3, 0, Stage::evolution));
  for (auto _ : state) integ.advance(p.dt);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_KineticStep)->Arg(2000)->Arg(20000);

static void BM_CompositeMeasurement(benchmark::State& state) {
  EnsembleState s = css(static_cast<std::size_t>(state.range(0)));
  const CavityConfig cav = paper().cavity_config();
  const ProbeConfig probe = paper().probe_config(Measurement::m1);
  const auto c = effective_couplings(s, cav, paper().trap_config(), probe);
  Engine rng = make_stream(4, 0, Stage::probe_m1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(composite_measurement(s, c, probe, cav, Measurement::m1, rng));
  }
}
BENCHMARK(BM_CompositeMeasurement)->Arg(2000)->Arg(20000);

static void BM_DemingAlpha(benchmark::State& state) {
  Engine rng = make_stream(5, 0, Stage::synthetic);
  std::normal_distribution<double> g(0.0, 1.0);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> m1(n), m2(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = g(rng);
    m1[i] = s + 0.5 * g(rng);
    m2[i] = 2.0 * s + 0.5 * g(rng);
  }
  for (auto _ : state) benchmark::DoNotOptimize(deming_alpha(m1, m2, 0.25, 0.25));
}
BENCHMARK(BM_DemingAlpha)->Arg(200)->Arg(2000);

static void BM_Shot(benchmark::State& state) {
  RunOptions o;
  o.atoms = static_cast<std::size_t>(state.range(0));
  const auto groups = plan_scenario(ScenarioKind::temperature_correlation, paper(), o);
  std::size_t shot = 0;
  for (auto _ : state) benchmark::DoNotOptimize(simulate_shot(groups.front(), 0, shot++, 6));
}
BENCHMARK(BM_Shot)->Arg(2000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
