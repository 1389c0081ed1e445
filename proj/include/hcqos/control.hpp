#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace hcqos {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Componentwise box lo <= x <= hi. Infinite bounds are allowed.
struct StateBounds {
  Vector lo;
  Vector hi;

  static StateBounds unbounded(int n);
  static StateBounds unit(int n);
  bool contains(const Vector& x) const;
};

/// Box-bounded simplex: lo_i <= u_i <= hi_i, 0 <= lo, hi <= 1, sum(u) <= 1.
struct ControlBounds {
  Vector lo;
  Vector hi;

  static ControlBounds simplex(int m);
  bool contains(const Vector& u, double tol = 1e-12) const;
};

/// x(t+1) = A x(t) + B u(t) with constraint sets X and U.
struct StateSpaceModel {
  Matrix A;
  Matrix B;
  StateBounds X;
  ControlBounds U;

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }

  /// Default bounds: X unbounded, U the unit simplex.
  static StateSpaceModel make(Matrix A, Matrix B);
  /// Throws DimensionError / ConfigError.
  void validate() const;
};

/// Quadratic criteria: Q weighs state deviation from x_ref (throughput and
/// backlog targets), R weighs control effort.
struct CostWeights {
  Matrix Q;
  Matrix R;
  Vector x_ref;

  /// Validates Q symmetric PSD and R symmetric PD.
  static CostWeights make(Matrix Q, Matrix R, Vector x_ref);
  void validate() const;
};

struct ControlDecision {
  Vector u;
  std::vector<int> priority_order;  // queue indices, highest priority first
  std::int64_t epoch_index = 0;
};

using Trajectory = std::vector<std::pair<Vector, Vector>>;

Vector step_state(const StateSpaceModel& model, const Vector& x, const Vector& u);

struct Identification {
  StateSpaceModel model;
  double residual_norm = 0.0;  // Frobenius norm of the one-step residuals
  double residual_rms = 0.0;   // per state component
  int samples = 0;             // transitions used
};

/// Least-squares fit of (A, B) to consecutive samples of `trace`.
/// Throws IdentifiabilityError when the regressor [x_t; u_t] is rank deficient.
Identification identify_model(const Trajectory& trace, int n, int m);

double evaluate_cost(const CostWeights& weights, const Trajectory& trajectory, int horizon);

enum class KernelPolicy { Serial, Parallel };

/// Receding-horizon grid search over the discretised feasible control set.
/// The predicted cost of a candidate u is the cost of the trajectory
/// x_1..x_H produced by holding u constant, charging u'Ru at every step.
/// Ties go to the lexicographically smallest u. Queues (the first m state
/// components are their backlogs) are ranked by descending predicted backlog
/// at the horizon end, ties by queue index.
ControlDecision allocate_control(const StateSpaceModel& model, const CostWeights& weights,
                                 const Vector& x, int horizon, int grid,
                                 KernelPolicy policy = KernelPolicy::Parallel);

struct Stability {
  double spectral_radius = 0.0;
  bool stable = false;
  int iterations = 0;
};

inline constexpr double kStabilityMargin = 1e-9;
inline constexpr double kPowerIterationTol = 1e-10;
inline constexpr int kPowerIterationCap = 10000;

/// Spectral radius of A (or A - B K) by two-vector orthogonal power
/// iteration. Throws ConvergenceError if the estimate does not settle.
Stability check_stability(const StateSpaceModel& model, const std::optional<Matrix>& gain = {});
double spectral_radius(const Matrix& M, int* iterations = nullptr);

/// Model whose rows follow directly from queue bookkeeping: each backlog
/// fraction drains by drain_per_share * u_i per epoch and each utilisation
/// equals its share. `coupling` adds positive feedback from utilisation to
/// backlog (load begets load).
StateSpaceModel structural_queue_model(int classes, double drain_per_share, double coupling = 0.0);

}  // namespace hcqos
