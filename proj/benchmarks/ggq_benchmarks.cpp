// Microbenchmarks for the hot paths: the empirical moments, one GGQ fit,
// classical value iteration and cohort simulation.

#include "ggq/classical.hpp"
#include "ggq/diabetes_sim.hpp"
#include "ggq/feature_table.hpp"
#include "ggq/features.hpp"
#include "ggq/ggq.hpp"
#include "ggq/inference.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace ggq;

struct Fixture {
  Dataset data;
  RbfFeatureMap fmap;
  FeatureTable table;
  Eigen::VectorXd theta;

  explicit Fixture(std::size_t n)
      : data(cohort(n)), fmap(fit_rbf_spec(data, 0.5)), table(data, fmap), theta(Eigen::VectorXd::Constant(fmap.dimension(), 0.1)) {}

  static Dataset cohort(std::size_t n) {
    SimParams p;
    p.n = n;
    p.seed = 5;
    return simulate_cohort(p);
  }
};

const Fixture& fixture() {
  static const Fixture f(2000);
  return f;
}

void BM_DHat(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(compute_D_hat(f.theta, f.table, 0.6));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * f.table.steps()));
}
BENCHMARK(BM_DHat);

void BM_WHat(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(compute_W_hat(f.table));
}
BENCHMARK(BM_WHat);

void BM_FeatureTable(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(FeatureTable(f.data, f.fmap).steps());
}
BENCHMARK(BM_FeatureTable)->Unit(benchmark::kMillisecond);

void BM_GgqFit(benchmark::State& state) {
  const auto& f = fixture();
  EstimatorConfig config;
  config.tolerance = 0.025;
  for (auto _ : state) {
    const auto est = ggq_fit(f.table, config);
    state.counters["sweeps"] = est.sweeps;
  }
}
BENCHMARK(BM_GgqFit)->Unit(benchmark::kMillisecond);

void BM_SandwichInference(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(infer(f.theta, f.table, 0.6).standard_errors);
}
BENCHMARK(BM_SandwichInference)->Unit(benchmark::kMillisecond);

void BM_ValueIteration(benchmark::State& state) {
  const auto& f = fixture();
  const Discretizer disc(DiscretizerSpec::classical(f.data), f.data.schema());
  const auto model = estimate_transitions(f.data, disc);
  for (auto _ : state) benchmark::DoNotOptimize(value_iteration(model, 0.6).values.size());
  state.counters["states"] = model.state_count();
}
BENCHMARK(BM_ValueIteration);

void BM_SimulateCohort(benchmark::State& state) {
  SimParams p;
  p.n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(simulate_cohort(p).size());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SimulateCohort)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
