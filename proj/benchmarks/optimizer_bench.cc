#include <benchmark/benchmark.h>

#include "ovb/nuisance.h"
#include "ovb/robust_opt.h"
#include "ovb/synthlab.h"

namespace ovb {
namespace {

GlmProblem amazon_problem(Index n) {
  const SynthConfig c = amazon_protocol_config(3, n, n, 0.5);
  const GaussianSample s = sample_gaussian(c);
  NuisanceConfig nc;
  const LossFamily fam = LossFamily::regression();
  return make_glm_problem(s.dataset, fam, fit_glm_nuisances(s.dataset, fam, nc));
}

void BM_FitWorstCase(benchmark::State& state) {
  const GlmProblem p = amazon_problem(2000);
  OptConfig cfg;
  cfg.objective = Objective::kWorstCase;
  cfg.s = 0.5;
  cfg.method = state.range(0) == 0 ? Method::kLbfgs : Method::kGradientDescent;
  for (auto _ : state) benchmark::DoNotOptimize(fit(p, cfg));
}
BENCHMARK(BM_FitWorstCase)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Gradient(benchmark::State& state) {
  const GlmProblem p = amazon_problem(state.range(0));
  LinearModel m = LinearModel::zeros(p.family, p.d());
  m.weights.setConstant(0.1);
  const auto budget = SensitivityBudget::from_product(0.5);
  for (auto _ : state) benchmark::DoNotOptimize(grad_objective(m, p, budget));
  state.SetItemsProcessed(state.iterations() * (p.n() + p.m()));
}
BENCHMARK(BM_Gradient)->Arg(2000)->Arg(20000);

void BM_Sweep(benchmark::State& state) {
  const GlmProblem p = amazon_problem(2000);
  std::vector<double> grid;
  for (int i = 0; i <= 10; ++i) grid.push_back(0.1 * i);
  for (auto _ : state) benchmark::DoNotOptimize(sweep(p, grid, OptConfig{}));
}
BENCHMARK(BM_Sweep)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace ovb

BENCHMARK_MAIN();
