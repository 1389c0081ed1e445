// allocate_control grid search: serial reference vs OpenMP kernel, and the
// full call including condensing.

#include <benchmark/benchmark.h>

#include "hcqos/control.hpp"
#include "hcqos/kernels.hpp"
#include "hcqos/traffic.hpp"

using namespace hcqos;

namespace {

struct Problem {
  StateSpaceModel model;
  CostWeights weights;
  Vector x;
};

Problem make_problem(int m) {
  Rng rng(99 + m);
  Problem p{structural_queue_model(m, 0.3, 0.05),
            CostWeights::make(Matrix::Identity(2 * m, 2 * m), 0.01 * Matrix::Identity(m, m),
                              Vector::Zero(2 * m)),
            Vector(2 * m)};
  for (int i = 0; i < 2 * m; ++i) p.x[i] = rng.uniform();
  return p;
}

template <bool Parallel>
void BM_Search(benchmark::State& st) {
  const int m = static_cast<int>(st.range(0));
  const int grid = static_cast<int>(st.range(1));
  const auto p = make_problem(m);
  const auto g = kernels::enumerate_grid(p.model.U, grid);
  const auto h = kernels::condense(p.model, p.weights, p.x, 3);
  for (auto _ : st) {
    auto r = Parallel ? kernels::search_parallel(h, g) : kernels::search_serial(h, g);
    benchmark::DoNotOptimize(r);
  }
  st.counters["points"] = static_cast<double>(g.size());
  st.counters["threads"] = Parallel ? kernels::max_threads() : 1;
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(g.size()));
}

void BM_Allocate(benchmark::State& st) {
  const int m = static_cast<int>(st.range(0));
  const int grid = static_cast<int>(st.range(1));
  const auto p = make_problem(m);
  for (auto _ : st) {
    auto d = allocate_control(p.model, p.weights, p.x, 3, grid, KernelPolicy::Parallel);
    benchmark::DoNotOptimize(d);
  }
}

void grid_args(benchmark::internal::Benchmark* b) {
  for (int m : {2, 4, 6, 8})
    for (int grid : {6, 11, 21}) {
      if (m >= 8 && grid > 11) continue;  // ~3e6 points, too slow for a sweep
      b->Args({m, grid});
    }
}

}  // namespace

BENCHMARK(BM_Search<false>)->Name("search_serial")->Apply(grid_args);
BENCHMARK(BM_Search<true>)->Name("search_parallel")->Apply(grid_args);
BENCHMARK(BM_Allocate)->Apply(grid_args);

BENCHMARK_MAIN();
