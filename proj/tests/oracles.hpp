#pragma once
// Independent reference implementations used by the tests. Nothing here calls
// into the library's numerics except the container types.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Eigenvalues>

#include "hcqos/control.hpp"
#include "hcqos/traffic.hpp"

namespace oracle {

using hcqos::Matrix;
using hcqos::Vector;

// plain triple loop
inline Vector matvec(const Matrix& M, const Vector& v) {
  Vector out(M.rows());
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    long double s = 0.0L;
    for (Eigen::Index j = 0; j < M.cols(); ++j)
      s += static_cast<long double>(M(i, j)) * static_cast<long double>(v[j]);
    out[i] = static_cast<double>(s);
  }
  return out;
}

inline Vector step(const Matrix& A, const Matrix& B, const Vector& x, const Vector& u) {
  Vector ax = matvec(A, x);
  Vector bu = matvec(B, u);
  Vector out(ax.size());
  for (Eigen::Index i = 0; i < ax.size(); ++i) out[i] = ax[i] + bu[i];
  return out;
}

inline double quad(const Matrix& M, const Vector& v) {
  long double s = 0.0L;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    for (Eigen::Index j = 0; j < v.size(); ++j)
      s += static_cast<long double>(v[i]) * M(i, j) * v[j];
  return static_cast<double>(s);
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  double m = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) m = std::max(m, std::abs(a(i, j) - b(i, j)));
  return m;
}

inline Matrix random_matrix(hcqos::Rng& rng, int r, int c, double lo = -1.0, double hi = 1.0) {
  Matrix M(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) M(i, j) = rng.uniform(lo, hi);
  return M;
}

inline Vector random_vector(hcqos::Rng& rng, int n, double lo = -1.0, double hi = 1.0) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.uniform(lo, hi);
  return v;
}

inline double eig_radius(const Matrix& A) {
  Eigen::EigenSolver<Matrix> es(A, false);
  double r = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    r = std::max(r, std::abs(es.eigenvalues()[i]));
  return r;
}

// random A scaled to a spectral radius in [0.3, 0.9]
inline Matrix random_stable(hcqos::Rng& rng, int n) {
  Matrix A = random_matrix(rng, n, n);
  const double r = eig_radius(A);
  const double target = rng.uniform(0.3, 0.9);
  if (r > 0) A *= target / r;
  return A;
}

inline Matrix random_spd(hcqos::Rng& rng, int n, double ridge) {
  Matrix L = random_matrix(rng, n, n);
  Matrix S = L * L.transpose();
  for (int i = 0; i < n; ++i) S(i, i) += ridge;
  return 0.5 * (S + S.transpose());
}

// Cost of holding u for `horizon` steps from x, summed step by step.
inline double hold_cost(const hcqos::StateSpaceModel& m, const hcqos::CostWeights& w,
                        const Vector& x0, const Vector& u, int horizon) {
  Vector x = x0;
  double total = 0.0;
  for (int t = 0; t < horizon; ++t) {
    x = step(m.A, m.B, x, u);
    Vector d(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) d[i] = x[i] - w.x_ref[i];
    total += quad(w.Q, d) + quad(w.R, u);
  }
  return total;
}

// Every level vector in lexicographic order; strict improvement keeps the
// lexicographically first minimiser.
inline Vector brute_force(const hcqos::StateSpaceModel& m, const hcqos::CostWeights& w,
                          const Vector& x, int horizon, int grid) {
  const int k = m.m();
  std::vector<int> lv(k, 0);
  double best = std::numeric_limits<double>::infinity();
  Vector best_u;
  for (;;) {
    Vector u(k);
    int sum = 0;
    bool ok = true;
    for (int i = 0; i < k; ++i) {
      u[i] = static_cast<double>(lv[i]) / (grid - 1);
      sum += lv[i];
      if (u[i] < m.U.lo[i] - 1e-12 || u[i] > m.U.hi[i] + 1e-12) ok = false;
    }
    if (sum > grid - 1) ok = false;
    if (ok) {
      const double c = hold_cost(m, w, x, u, horizon);
      if (c < best) {
        best = c;
        best_u = u;
      }
    }
    int i = k - 1;
    while (i >= 0 && ++lv[i] == grid) lv[i--] = 0;
    if (i < 0) break;
  }
  return best_u;
}

}  // namespace oracle
