#pragma once

// Grid-search kernels behind allocate_control. The serial loop is the
// reference; the OpenMP loop must return the identical index for every input.

#include <cstddef>
#include <vector>

#include "hcqos/control.hpp"

namespace hcqos::kernels {

/// Feasible grid points of a ControlBounds set, in lexicographic order of
/// their level vectors. Point p has u_i = levels[p*m + i] / (grid - 1).
struct ControlGrid {
  int m = 0;
  int grid = 2;
  std::vector<int> levels;
  std::vector<double> value;  // value[k] = k / (grid - 1), correctly rounded

  std::size_t size() const { return m == 0 ? 0 : levels.size() / static_cast<std::size_t>(m); }
  Vector point(std::size_t p) const;
};

/// Throws ConfigError if no grid point is feasible.
ControlGrid enumerate_grid(const ControlBounds& U, int grid);

/// Constant-u horizon cost condensed to J(u) = c + 2 g'u + u'Mu, together
/// with the horizon-end response x_H = f + G u used for priority ranking.
struct HorizonCost {
  int m = 0;
  std::vector<double> M;  // row-major m x m
  std::vector<double> g;
  double c = 0.0;
  Vector end_free;   // f
  Matrix end_gain;   // G
};

HorizonCost condense(const StateSpaceModel& model, const CostWeights& weights, const Vector& x,
                     int horizon);

inline double candidate_cost(const HorizonCost& h, const ControlGrid& grid, std::size_t p) {
  const int m = h.m;
  const int* k = grid.levels.data() + p * static_cast<std::size_t>(m);
  const double* v = grid.value.data();
  double lin = 0.0;
  double quad = 0.0;
  for (int i = 0; i < m; ++i) {
    if (k[i] == 0) continue;
    const double ui = v[k[i]];
    lin += h.g[i] * ui;
    double row = 0.0;
    for (int j = 0; j < m; ++j) row += h.M[i * m + j] * v[k[j]];
    quad += ui * row;
  }
  return h.c + 2.0 * lin + quad;
}

struct SearchResult {
  std::size_t index = 0;
  double cost = 0.0;
};

SearchResult search_serial(const HorizonCost& h, const ControlGrid& grid);
SearchResult search_parallel(const HorizonCost& h, const ControlGrid& grid);

int max_threads();

}  // namespace hcqos::kernels
