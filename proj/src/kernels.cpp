#include "hcqos/kernels.hpp"

#include <cmath>
#include <limits>

#include "hcqos/errors.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hcqos::kernels {

Vector ControlGrid::point(std::size_t p) const {
  Vector u(m);
  for (int i = 0; i < m; ++i) u[i] = value[levels[p * m + i]];
  return u;
}

namespace {

void enumerate(const std::vector<std::vector<int>>& allowed, int budget, int depth,
               std::vector<int>& cur, std::vector<int>& out) {
  if (depth == static_cast<int>(allowed.size())) {
    out.insert(out.end(), cur.begin(), cur.end());
    return;
  }
  for (int k : allowed[depth]) {
    if (k > budget) break;
    cur[depth] = k;
    enumerate(allowed, budget - k, depth + 1, cur, out);
  }
}

}  // namespace

ControlGrid enumerate_grid(const ControlBounds& U, int grid) {
  if (grid < 2) throw ConfigError("control grid must have at least 2 levels");
  const int m = static_cast<int>(U.lo.size());
  ControlGrid g;
  g.m = m;
  g.grid = grid;
  g.value.resize(grid);
  for (int k = 0; k < grid; ++k) g.value[k] = static_cast<double>(k) / (grid - 1);
  constexpr double tol = 1e-12;
  std::vector<std::vector<int>> allowed(m);
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < grid; ++k) {
      const double u = g.value[k];
      if (u >= U.lo[i] - tol && u <= U.hi[i] + tol) allowed[i].push_back(k);
    }
  std::vector<int> cur(m, 0);
  // sum(u) <= 1 is exact in level arithmetic: sum(k) <= grid - 1.
  enumerate(allowed, grid - 1, 0, cur, g.levels);
  if (g.size() == 0)
    throw ConfigError("control set U has no feasible point on a " + std::to_string(grid) +
                      "-level grid (box bounds incompatible with sum(u) <= 1)");
  return g;
}

HorizonCost condense(const StateSpaceModel& model, const CostWeights& weights, const Vector& x,
                     int horizon) {
  const int n = model.n();
  const int m = model.m();
  HorizonCost h;
  h.m = m;
  Matrix Mq = Matrix::Zero(m, m);
  Vector g = Vector::Zero(m);
  double c = 0.0;

  Vector f = x;                  // A^t x
  Matrix G = Matrix::Zero(n, m);  // sum_{s<t} A^s B
  for (int t = 1; t <= horizon; ++t) {
    f = model.A * f;
    G = model.A * G + model.B;
    const Vector dev = f - weights.x_ref;
    const Matrix QG = weights.Q * G;
    Mq.noalias() += G.transpose() * QG;
    g.noalias() += QG.transpose() * dev;
    c += dev.dot(weights.Q * dev);
  }
  Mq += static_cast<double>(horizon) * weights.R;

  h.M.resize(static_cast<std::size_t>(m) * m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) h.M[i * m + j] = 0.5 * (Mq(i, j) + Mq(j, i));
  h.g.assign(g.data(), g.data() + m);
  h.c = c;
  h.end_free = f;
  h.end_gain = G;
  return h;
}

namespace {

// Strict weak order on (cost, index): lower cost first, then lower index.
inline bool better(double cost, std::size_t idx, double best_cost, std::size_t best_idx) {
  return cost < best_cost || (cost == best_cost && idx < best_idx);
}

}  // namespace

SearchResult search_serial(const HorizonCost& h, const ControlGrid& grid) {
  SearchResult best{0, std::numeric_limits<double>::infinity()};
  const std::size_t count = grid.size();
  for (std::size_t p = 0; p < count; ++p) {
    const double cost = candidate_cost(h, grid, p);
    if (cost < best.cost) best = {p, cost};
  }
  return best;
}

SearchResult search_parallel(const HorizonCost& h, const ControlGrid& grid) {
  const auto count = static_cast<std::ptrdiff_t>(grid.size());
  SearchResult best{0, std::numeric_limits<double>::infinity()};
#pragma omp parallel
  {
    SearchResult local{0, std::numeric_limits<double>::infinity()};
#pragma omp for schedule(static) nowait
    for (std::ptrdiff_t p = 0; p < count; ++p) {
      const double cost = candidate_cost(h, grid, static_cast<std::size_t>(p));
      if (cost < local.cost) local = {static_cast<std::size_t>(p), cost};
    }
#pragma omp critical(hcqos_grid_reduce)
    {
      if (better(local.cost, local.index, best.cost, best.index)) best = local;
    }
  }
  return best;
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace hcqos::kernels
