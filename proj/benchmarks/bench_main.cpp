#include <benchmark/benchmark.h>

#include "tbm/calculus.hpp"
#include "tbm/oracles.hpp"
#include "tbm/phantoms.hpp"
#include "tbm/smoothing.hpp"
#include "tbm/solver.hpp"

using namespace tbm;

namespace {

GridSpec square(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  return GridSpec::make2d(n, n);
}

VectorField wobbly_map(const GridSpec& g) {
  VectorField f = VectorField::identity(g);
  const VectorField u = random_smooth_field(g, 3, 0.5);
  for (int a = 0; a < g.rank(); ++a)
    for (std::size_t i = 0; i < g.size(); ++i) f.comp[a][i] += u.comp[a][i];
  project_to_domain(f);
  return f;
}

void BM_Objective(benchmark::State& state) {
  const GridSpec g = square(state);
  const auto [p, q] = random_smooth_pair(g, 1);
  const VectorField f = wobbly_map(g);
  const SolverConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(objective(f, p, q, cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(g.size()));
}
BENCHMARK(BM_Objective)->Arg(64)->Arg(128);

void BM_Gradient(benchmark::State& state) {
  const GridSpec g = square(state);
  const auto [p, q] = random_smooth_pair(g, 1);
  const VectorField f = wobbly_map(g);
  const SolverConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(el_gradient(f, p, q, cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(g.size()));
}
BENCHMARK(BM_Gradient)->Arg(64)->Arg(128);

void BM_Interp(benchmark::State& state) {
  const GridSpec g = square(state);
  const auto [p, q] = random_smooth_pair(g, 2);
  const VectorField f = wobbly_map(g);
  const ScalarField v = q.as_field();
  for (auto _ : state) benchmark::DoNotOptimize(interp(v, f));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(g.size()));
}
BENCHMARK(BM_Interp)->Arg(64)->Arg(128)->Arg(256);

void BM_Interp3d(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const GridSpec g = GridSpec::make3d(n, n, n);
  const VectorField f = wobbly_map(g);
  ScalarField v(g);
  for (std::size_t i = 0; i < g.size(); ++i) v.values[i] = 1.0 + static_cast<double>(i % 7);
  for (auto _ : state) benchmark::DoNotOptimize(interp(v, f));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(g.size()));
}
BENCHMARK(BM_Interp3d)->Arg(32);

void BM_Smoother(benchmark::State& state) {
  const GridSpec g = square(state);
  const HelmholtzSmoother smoother(g, 2.0);
  VectorField u = random_smooth_field(g, 5, 1.0);
  for (auto _ : state) {
    smoother.apply(u);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(g.size()));
}
BENCHMARK(BM_Smoother)->Arg(64)->Arg(128)->Arg(256);

void BM_Solve(benchmark::State& state) {
  const GridSpec g = square(state);
  const auto [p, q] = random_smooth_pair(g, 4);
  const SolverConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(solve(p, q, cfg));
}
BENCHMARK(BM_Solve)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
