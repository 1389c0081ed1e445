#include "hcqos/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hcqos/errors.hpp"
#include "hcqos/kernels.hpp"

namespace hcqos {

namespace {

std::string dims(const Matrix& M) {
  return std::to_string(M.rows()) + "x" + std::to_string(M.cols());
}

bool all_finite(const Matrix& M) { return M.allFinite(); }

}  // namespace

StateBounds StateBounds::unbounded(int n) {
  const double inf = std::numeric_limits<double>::infinity();
  return {Vector::Constant(n, -inf), Vector::Constant(n, inf)};
}

StateBounds StateBounds::unit(int n) { return {Vector::Zero(n), Vector::Ones(n)}; }

bool StateBounds::contains(const Vector& x) const {
  if (x.size() != lo.size()) return false;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (!(x[i] >= lo[i] && x[i] <= hi[i])) return false;
  return true;
}

ControlBounds ControlBounds::simplex(int m) { return {Vector::Zero(m), Vector::Ones(m)}; }

bool ControlBounds::contains(const Vector& u, double tol) const {
  if (u.size() != lo.size()) return false;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (!std::isfinite(u[i]) || u[i] < lo[i] - tol || u[i] > hi[i] + tol) return false;
    sum += u[i];
  }
  return sum <= 1.0 + tol;
}

StateSpaceModel StateSpaceModel::make(Matrix A, Matrix B) {
  StateSpaceModel model;
  const auto n = static_cast<int>(A.rows());
  const auto m = static_cast<int>(B.cols());
  model.A = std::move(A);
  model.B = std::move(B);
  model.X = StateBounds::unbounded(n);
  model.U = ControlBounds::simplex(m);
  model.validate();
  return model;
}

void StateSpaceModel::validate() const {
  if (A.rows() != A.cols()) throw DimensionError("A must be square, got " + dims(A));
  if (B.rows() != A.rows())
    throw DimensionError("B must have " + std::to_string(A.rows()) + " rows, got " + dims(B));
  if (!all_finite(A) || !all_finite(B)) throw ConfigError("model matrices must be finite");
  if (X.lo.size() != A.rows() || X.hi.size() != A.rows())
    throw DimensionError("state bounds must have dimension " + std::to_string(A.rows()));
  if (U.lo.size() != B.cols() || U.hi.size() != B.cols())
    throw DimensionError("control bounds must have dimension " + std::to_string(B.cols()));
  for (Eigen::Index i = 0; i < X.lo.size(); ++i)
    if (!(X.lo[i] <= X.hi[i])) throw ConfigError("state bounds: lo > hi at " + std::to_string(i));
  for (Eigen::Index i = 0; i < U.lo.size(); ++i)
    if (!(U.lo[i] >= 0.0 && U.lo[i] <= U.hi[i] && U.hi[i] <= 1.0))
      throw ConfigError("control bounds must satisfy 0 <= lo <= hi <= 1 at " + std::to_string(i));
}

CostWeights CostWeights::make(Matrix Q, Matrix R, Vector x_ref) {
  CostWeights w{std::move(Q), std::move(R), std::move(x_ref)};
  w.validate();
  return w;
}

void CostWeights::validate() const {
  if (Q.rows() != Q.cols()) throw DimensionError("Q must be square, got " + dims(Q));
  if (R.rows() != R.cols()) throw DimensionError("R must be square, got " + dims(R));
  if (x_ref.size() != Q.rows())
    throw DimensionError("x_ref must have dimension " + std::to_string(Q.rows()));
  if (!all_finite(Q) || !all_finite(R) || !x_ref.allFinite())
    throw ConfigError("cost weights must be finite");
  auto symmetric = [](const Matrix& M) {
    const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
    return (M - M.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
  };
  if (!symmetric(Q)) throw ConfigError("Q must be symmetric");
  if (!symmetric(R)) throw ConfigError("R must be symmetric");
  if (Q.size() > 0) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(Q, Eigen::EigenvaluesOnly);
    const double scale = std::max(1.0, Q.cwiseAbs().maxCoeff());
    if (es.eigenvalues().minCoeff() < -1e-12 * scale)
      throw ConfigError("Q must be positive semidefinite");
  }
  if (R.size() > 0) {
    Eigen::LLT<Matrix> llt(R);
    if (llt.info() != Eigen::Success) throw ConfigError("R must be positive definite");
  }
}

Vector step_state(const StateSpaceModel& model, const Vector& x, const Vector& u) {
  if (x.size() != model.A.cols())
    throw DimensionError("state has dimension " + std::to_string(x.size()) + ", model expects " +
                         std::to_string(model.A.cols()));
  if (u.size() != model.B.cols())
    throw DimensionError("control has dimension " + std::to_string(u.size()) +
                         ", model expects " + std::to_string(model.B.cols()));
  return model.A * x + model.B * u;
}

Identification identify_model(const Trajectory& trace, int n, int m) {
  if (n < 1 || m < 0) throw DimensionError("identification needs n >= 1 and m >= 0");
  const int p = n + m;
  if (static_cast<int>(trace.size()) < p + 1)
    throw IdentifiabilityError("identification needs at least n+m+1 = " + std::to_string(p + 1) +
                               " samples, got " + std::to_string(trace.size()));
  for (std::size_t t = 0; t < trace.size(); ++t)
    if (trace[t].first.size() != n || trace[t].second.size() != m)
      throw DimensionError("sample " + std::to_string(t) + " does not match n=" +
                           std::to_string(n) + ", m=" + std::to_string(m));

  const auto rows = static_cast<Eigen::Index>(trace.size() - 1);
  Matrix Z(rows, p);
  Matrix Y(rows, n);
  for (Eigen::Index t = 0; t < rows; ++t) {
    Z.row(t).head(n) = trace[t].first.transpose();
    Z.row(t).tail(m) = trace[t].second.transpose();
    Y.row(t) = trace[t + 1].first.transpose();
  }

  Eigen::ColPivHouseholderQR<Matrix> qr(Z);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) {
    std::string names;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < p; ++k) {
      const int col = perm[k];
      names += (names.empty() ? "" : ", ") +
               (col < n ? "x" + std::to_string(col) : "u" + std::to_string(col - n));
    }
    throw IdentifiabilityError("regressor [x; u] has rank " + std::to_string(qr.rank()) + " < " +
                               std::to_string(p) + "; deficient columns: " + names);
  }

  const Matrix theta = qr.solve(Y);  // p x n, theta = [A'; B']
  Identification id;
  id.model = StateSpaceModel::make(theta.topRows(n).transpose(),
                                   theta.bottomRows(m).transpose());
  const Matrix resid = Y - Z * theta;
  id.residual_norm = resid.norm();
  id.residual_rms = std::sqrt(resid.squaredNorm() / static_cast<double>(rows * n));
  id.samples = static_cast<int>(rows);
  return id;
}

double evaluate_cost(const CostWeights& weights, const Trajectory& trajectory, int horizon) {
  if (horizon < 0 || static_cast<std::size_t>(horizon) > trajectory.size())
    throw DimensionError("trajectory shorter than horizon " + std::to_string(horizon));
  double total = 0.0;
  for (int t = 0; t < horizon; ++t) {
    const auto& [x, u] = trajectory[t];
    if (x.size() != weights.Q.rows() || u.size() != weights.R.rows())
      throw DimensionError("trajectory sample " + std::to_string(t) +
                           " does not match the cost weights");
    const Vector dev = x - weights.x_ref;
    total += dev.dot(weights.Q * dev) + u.dot(weights.R * u);
  }
  return total;
}

ControlDecision allocate_control(const StateSpaceModel& model, const CostWeights& weights,
                                 const Vector& x, int horizon, int grid, KernelPolicy policy) {
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  if (grid < 2) throw ConfigError("grid must be >= 2");
  if (x.size() != model.n()) throw DimensionError("state dimension does not match the model");
  if (!x.allFinite()) throw ConfigError("state vector must be finite");
  if (weights.Q.rows() != model.n() || weights.R.rows() != model.m())
    throw DimensionError("cost weights do not match the model dimensions");

  const kernels::ControlGrid points = kernels::enumerate_grid(model.U, grid);
  const kernels::HorizonCost cost = kernels::condense(model, weights, x, horizon);
  const kernels::SearchResult best = policy == KernelPolicy::Parallel
                                         ? kernels::search_parallel(cost, points)
                                         : kernels::search_serial(cost, points);

  ControlDecision d;
  d.u = points.point(best.index);
  if (!model.U.contains(d.u)) throw RuntimeError("allocator produced an infeasible control");

  const int m = model.m();
  const Vector end = cost.end_free + cost.end_gain * d.u;
  d.priority_order.resize(m);
  std::iota(d.priority_order.begin(), d.priority_order.end(), 0);
  // Backlogs are the first m state components; without them the order is by index.
  if (model.n() >= m) {
    std::stable_sort(d.priority_order.begin(), d.priority_order.end(),
                     [&](int a, int b) { return end[a] > end[b]; });
  }
  return d;
}

namespace {

// Orthonormalise the columns of V in place (modified Gram-Schmidt). Columns
// that collapse are replaced by the first unit vector that is independent.
void orthonormalise(Matrix& V) {
  const Eigen::Index n = V.rows();
  for (Eigen::Index j = 0; j < V.cols(); ++j) {
    for (int attempt = 0; attempt <= n; ++attempt) {
      for (Eigen::Index k = 0; k < j; ++k) V.col(j) -= V.col(k).dot(V.col(j)) * V.col(k);
      const double norm = V.col(j).norm();
      if (norm > 1e-13) {
        V.col(j) /= norm;
        break;
      }
      V.col(j) = Vector::Unit(n, attempt % n);
    }
  }
}

double max_abs_eig2(const Matrix& H) {
  if (H.rows() == 1) return std::abs(H(0, 0));
  const double tr = H(0, 0) + H(1, 1);
  const double det = H(0, 0) * H(1, 1) - H(0, 1) * H(1, 0);
  const double disc = 0.25 * tr * tr - det;
  // rounding noise around a double root; its square root would make the
  // estimate jitter at ~1e-8 and never settle
  if (std::abs(disc) <= 64.0 * std::numeric_limits<double>::epsilon() * (0.25 * tr * tr + std::abs(det)))
    return std::abs(0.5 * tr);
  if (disc >= 0.0) {
    const double s = std::sqrt(disc);
    return std::max(std::abs(0.5 * tr + s), std::abs(0.5 * tr - s));
  }
  return std::sqrt(std::max(det, 0.0));  // complex pair
}

}  // namespace

double spectral_radius(const Matrix& M, int* iterations) {
  if (M.rows() != M.cols()) throw DimensionError("spectral radius needs a square matrix");
  const Eigen::Index n = M.rows();
  if (n == 0) return 0.0;
  if (!M.allFinite()) throw ConfigError("matrix must be finite");
  const Eigen::Index p = std::min<Eigen::Index>(n, 2);

  // Fixed, generic start block so results are reproducible.
  Matrix V(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j)
      V(i, j) = 1.0 + 0.37 * static_cast<double>(i) * (j + 1) + 0.11 * static_cast<double>(i * i);
  orthonormalise(V);

  double prev = -1.0;
  int stable_steps = 0;
  for (int it = 1; it <= kPowerIterationCap; ++it) {
    Matrix W = M * V;
    if (W.norm() == 0.0) {
      if (iterations) *iterations = it;
      return 0.0;
    }
    orthonormalise(W);
    const Matrix H = W.transpose() * M * W;
    const double est = max_abs_eig2(H);
    if (std::abs(est - prev) <= kPowerIterationTol * std::max(est, 1e-300)) {
      if (++stable_steps >= 2) {
        if (iterations) *iterations = it;
        return est;
      }
    } else {
      stable_steps = 0;
    }
    prev = est;
    V = std::move(W);
  }
  throw ConvergenceError("power iteration did not converge within " +
                         std::to_string(kPowerIterationCap) + " iterations (last estimate " +
                         std::to_string(prev) + ")");
}

Stability check_stability(const StateSpaceModel& model, const std::optional<Matrix>& gain) {
  Matrix closed = model.A;
  if (gain) {
    if (gain->rows() != model.m() || gain->cols() != model.n())
      throw DimensionError("gain must be " + std::to_string(model.m()) + "x" +
                           std::to_string(model.n()) + ", got " + dims(*gain));
    closed = model.A - model.B * (*gain);
  }
  Stability s;
  s.spectral_radius = spectral_radius(closed, &s.iterations);
  s.stable = s.spectral_radius < 1.0 - kStabilityMargin;
  return s;
}

StateSpaceModel structural_queue_model(int classes, double drain_per_share, double coupling) {
  const int k = classes;
  Matrix A = Matrix::Zero(2 * k, 2 * k);
  Matrix B = Matrix::Zero(2 * k, k);
  for (int i = 0; i < k; ++i) {
    A(i, i) = 1.0;
    A(i, k + i) = coupling;
    B(i, i) = -drain_per_share;
    B(k + i, i) = 1.0;
  }
  StateSpaceModel model = StateSpaceModel::make(std::move(A), std::move(B));
  model.X = StateBounds::unit(2 * k);
  return model;
}

}  // namespace hcqos
