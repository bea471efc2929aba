#pragma once

/*
 * One-step time integrators on a TimeMesh, the residual-based accuracy
 * estimate and the Gronwall conversion from residual to L2 trajectory error.
 *
 * A right-hand side is any callable `Eigen::VectorXd(const StepPoint&, const
 * Eigen::VectorXd&)`. The StepPoint carries the evaluation time and the
 * interval currently being stepped, so piecewise-constant controls can be
 * looked up without ambiguity at the interval endpoints.
 */

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "amsa/mesh.hpp"

namespace amsa {

enum class IntegratorKind {
  explicit_euler,  // ResNet update
  heun2,           // trapezoidal predictor-corrector, second order
};

struct StepPoint {
  double t;
  double left;   // interval start
  double right;  // interval end

  [[nodiscard]] double midpoint() const noexcept { return 0.5 * (left + right); }
};

/// Node values of one trajectory: d x (L+1), column j is the value at t_j.
using Trajectory = Eigen::MatrixXd;

class NumericalOverflow : public std::runtime_error {
 public:
  NumericalOverflow(const std::string& what, std::size_t interval)
      : std::runtime_error(what + " (interval " + std::to_string(interval) + ")"), interval_(interval) {}

  [[nodiscard]] std::size_t interval() const noexcept { return interval_; }

 private:
  std::size_t interval_;
};

namespace detail {

inline void check_finite(const Eigen::VectorXd& y, std::size_t interval, const char* who) {
  if (!y.allFinite()) throw NumericalOverflow(std::string(who) + ": non-finite state", interval);
}

}  // namespace detail

template <class Rhs>
Trajectory solve_fwd(Rhs&& rhs, const Eigen::VectorXd& x0, const TimeMesh& mesh, IntegratorKind kind) {
  const std::size_t L = mesh.intervals();
  Trajectory traj(x0.size(), static_cast<Eigen::Index>(L + 1));
  detail::check_finite(x0, 0, "solve_fwd");
  traj.col(0) = x0;
  for (std::size_t j = 0; j < L; ++j) {
    const double t0 = mesh.node(j);
    const double t1 = mesh.node(j + 1);
    const double h = t1 - t0;
    const Eigen::VectorXd y = traj.col(static_cast<Eigen::Index>(j));
    const Eigen::VectorXd k1 = rhs(StepPoint{t0, t0, t1}, y);
    Eigen::VectorXd next;
    if (kind == IntegratorKind::explicit_euler) {
      next = y + h * k1;
    } else {
      const Eigen::VectorXd k2 = rhs(StepPoint{t1, t0, t1}, Eigen::VectorXd(y + h * k1));
      next = y + 0.5 * h * (k1 + k2);
    }
    detail::check_finite(next, j, "solve_fwd");
    traj.col(static_cast<Eigen::Index>(j + 1)) = next;
  }
  return traj;
}

/// Integrates y' = rhs(t, y) from the terminal value at T down to t = 0.
template <class Rhs>
Trajectory solve_bwd(Rhs&& rhs, const Eigen::VectorXd& terminal, const TimeMesh& mesh, IntegratorKind kind) {
  const std::size_t L = mesh.intervals();
  Trajectory traj(terminal.size(), static_cast<Eigen::Index>(L + 1));
  detail::check_finite(terminal, L - 1, "solve_bwd");
  traj.col(static_cast<Eigen::Index>(L)) = terminal;
  for (std::size_t j = L; j-- > 0;) {
    const double t0 = mesh.node(j);
    const double t1 = mesh.node(j + 1);
    const double h = t1 - t0;
    const Eigen::VectorXd y = traj.col(static_cast<Eigen::Index>(j + 1));
    const Eigen::VectorXd k1 = rhs(StepPoint{t1, t0, t1}, y);
    Eigen::VectorXd next;
    if (kind == IntegratorKind::explicit_euler) {
      next = y - h * k1;
    } else {
      const Eigen::VectorXd k2 = rhs(StepPoint{t0, t0, t1}, Eigen::VectorXd(y - h * k1));
      next = y - 0.5 * h * (k1 + k2);
    }
    detail::check_finite(next, j, "solve_bwd");
    traj.col(static_cast<Eigen::Index>(j)) = next;
  }
  return traj;
}

/// Estimate of ||f - Pi f||_{L2(0,T)} for a forward trajectory: the defect
/// between the right-hand side along the scheme's polynomial reconstruction
/// and the scheme's own slope, sampled at interval midpoints.
template <class Rhs>
double residual_accuracy(Rhs&& rhs, const Trajectory& traj, const TimeMesh& mesh, IntegratorKind kind) {
  if (static_cast<std::size_t>(traj.cols()) != mesh.node_count()) {
    throw std::invalid_argument("residual_accuracy: trajectory does not live on this mesh");
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < mesh.intervals(); ++j) {
    const double t0 = mesh.node(j);
    const double t1 = mesh.node(j + 1);
    const double h = t1 - t0;
    const StepPoint mid{0.5 * (t0 + t1), t0, t1};
    const auto y0 = traj.col(static_cast<Eigen::Index>(j));
    const auto y1 = traj.col(static_cast<Eigen::Index>(j + 1));
    const Eigen::VectorXd slope = (y1 - y0) / h;
    Eigen::VectorXd y_mid;
    if (kind == IntegratorKind::explicit_euler) {
      // piecewise linear reconstruction, piecewise constant Pi f
      y_mid = 0.5 * (y0 + y1);
    } else {
      // quadratic reconstruction whose derivative interpolates k1 and k2 linearly
      const Eigen::VectorXd k1 = rhs(StepPoint{t0, t0, t1}, Eigen::VectorXd(y0));
      const Eigen::VectorXd k2 = 2.0 * slope - k1;
      y_mid = y0 + 0.5 * h * k1 + 0.125 * h * (k2 - k1);
    }
    const Eigen::VectorXd defect = rhs(mid, y_mid) - slope;
    sum += h * defect.squaredNorm();
  }
  return std::sqrt(sum);
}

/// Upper bound on ||u - U||_{L2(0,T)} from the residual accuracy `eta` and a
/// Lipschitz constant of the dynamics in the state.
inline double gronwall_bound(double eta, double lipschitz, double horizon) {
  if (eta < 0.0 || lipschitz < 0.0 || !(horizon > 0.0)) {
    throw std::invalid_argument("gronwall_bound: need eta >= 0, lipschitz >= 0, horizon > 0");
  }
  const double rate = 2.0 * lipschitz + 1.0;
  return std::exp(0.5 * rate * horizon) / std::sqrt(rate) * eta;
}

/// Next mesh in the uniform refinement sequence: bisection while it stays
/// within max_layers, then one jump to a uniform max_layers mesh.
inline std::optional<TimeMesh> next_refinement(const TimeMesh& mesh, std::size_t max_layers) {
  const std::size_t L = mesh.intervals();
  if (L >= max_layers) return std::nullopt;
  if (2 * L <= max_layers) return bisect_mesh(mesh);
  return make_uniform_mesh(mesh.horizon(), max_layers);
}

struct RefinementResult {
  Trajectory trajectory;
  TimeMesh mesh;
  double eta;
  bool reached;  // false when max_layers stopped refinement first
};

template <class Rhs>
RefinementResult refine_to_accuracy(Rhs&& rhs, const Eigen::VectorXd& x0, TimeMesh mesh, IntegratorKind kind,
                                    double target_eta, std::size_t max_layers) {
  if (!(target_eta > 0.0)) throw std::invalid_argument("refine_to_accuracy: target must be positive");
  for (;;) {
    Trajectory traj = solve_fwd(rhs, x0, mesh, kind);
    const double eta = residual_accuracy(rhs, traj, mesh, kind);
    if (eta <= target_eta) return {std::move(traj), std::move(mesh), eta, true};
    auto finer = next_refinement(mesh, max_layers);
    if (!finer) return {std::move(traj), std::move(mesh), eta, false};
    mesh = std::move(*finer);
  }
}

}  // namespace amsa
