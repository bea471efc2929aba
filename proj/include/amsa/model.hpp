#pragma once

/*
 * The controlled dynamics u' = tanh(A u + b), its Hamiltonian and augmented
 * Hamiltonian with their analytic gradients, the terminal loss and the
 * output map. The running regularizer is identically zero.
 */

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "amsa/integrate.hpp"
#include "amsa/mesh.hpp"

namespace amsa {

enum class OutputKind {
  mean,              // g(z) = (1/d) sum z_i
  thresholded_mean,  // Heaviside(mean), Heaviside(0) = 1
};

struct ProblemSpec {
  std::size_t width = 3;
  double horizon = 5.0;
  Bounds bounds{-1.0, 1.0};
  double rho = 5.0;
  OutputKind output = OutputKind::mean;

  void validate() const {
    if (width < 1) throw std::invalid_argument("ProblemSpec: width must be positive");
    if (!(horizon > 0.0)) throw std::invalid_argument("ProblemSpec: horizon must be positive");
    if (!(bounds.lo < bounds.hi)) throw std::invalid_argument("ProblemSpec: need lo < hi bounds");
    if (!(rho >= 0.0)) throw std::invalid_argument("ProblemSpec: rho must be nonnegative");
  }
};

struct Sample {
  Eigen::VectorXd x;
  double y = 0.0;
};

namespace detail {

inline void check_dims(const Eigen::VectorXd& u, const LayerParams& theta, const char* who) {
  const auto d = u.size();
  if (theta.A.rows() != d || theta.A.cols() != d || theta.b.size() != d) {
    throw std::invalid_argument(std::string(who) + ": dimension mismatch");
  }
}

inline void check_same(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const char* who) {
  if (a.size() != b.size()) throw std::invalid_argument(std::string(who) + ": dimension mismatch");
}

}  // namespace detail

inline Eigen::VectorXd dynamics_f(const Eigen::VectorXd& u, const LayerParams& theta) {
  detail::check_dims(u, theta, "dynamics_f");
  return (theta.A * u + theta.b).array().tanh().matrix();
}

inline double hamiltonian(const Eigen::VectorXd& u, const Eigen::VectorXd& p, const LayerParams& theta) {
  detail::check_same(u, p, "hamiltonian");
  return p.dot(dynamics_f(u, theta));
}

/// A^T (p . sech^2(A u + b))
inline Eigen::VectorXd grad_u_hamiltonian(const Eigen::VectorXd& u, const Eigen::VectorXd& p,
                                          const LayerParams& theta) {
  detail::check_same(u, p, "grad_u_hamiltonian");
  detail::check_dims(u, theta, "grad_u_hamiltonian");
  const Eigen::ArrayXd s = (theta.A * u + theta.b).array().tanh();
  const Eigen::VectorXd w = (p.array() * (1.0 - s.square())).matrix();
  return theta.A.transpose() * w;
}

inline LayerParams grad_theta_hamiltonian(const Eigen::VectorXd& u, const Eigen::VectorXd& p,
                                          const LayerParams& theta) {
  detail::check_same(u, p, "grad_theta_hamiltonian");
  detail::check_dims(u, theta, "grad_theta_hamiltonian");
  const Eigen::ArrayXd s = (theta.A * u + theta.b).array().tanh();
  const Eigen::VectorXd w = (p.array() * (1.0 - s.square())).matrix();
  return {w * u.transpose(), w};
}

inline double augmented_hamiltonian(const Eigen::VectorXd& u, const Eigen::VectorXd& p, const LayerParams& theta,
                                    const Eigen::VectorXd& v, const Eigen::VectorXd& q, double rho) {
  detail::check_same(u, v, "augmented_hamiltonian");
  detail::check_same(u, q, "augmented_hamiltonian");
  if (rho < 0.0) throw std::invalid_argument("augmented_hamiltonian: rho must be nonnegative");
  const Eigen::VectorXd f = dynamics_f(u, theta);
  const double h = p.dot(f);
  if (rho == 0.0) return h;
  return h - 0.5 * rho * (v - f).squaredNorm() - 0.5 * rho * (q + grad_u_hamiltonian(u, p, theta)).squaredNorm();
}

inline double mean_output(const Eigen::VectorXd& z) {
  if (z.size() == 0) throw std::invalid_argument("mean_output: empty state");
  return z.mean();
}

inline double heaviside(double x) noexcept { return x >= 0.0 ? 1.0 : 0.0; }

/// Classification read-out applied at evaluation time: x -> Heaviside(x - 0.5).
inline double prediction_filter(double x) noexcept { return heaviside(x - 0.5); }

inline double output_g(const Eigen::VectorXd& z, OutputKind kind) {
  const double m = mean_output(z);
  return kind == OutputKind::mean ? m : heaviside(m);
}

/// Phi = (g_mean(u_T) - y)^2 / 2 and its gradient in u_T.
inline std::pair<double, Eigen::VectorXd> terminal_loss_and_grad(const Eigen::VectorXd& u_T, double y) {
  const double r = mean_output(u_T) - y;
  const auto d = static_cast<double>(u_T.size());
  return {0.5 * r * r, Eigen::VectorXd::Constant(u_T.size(), r / d)};
}

/// Tiles x = (x_1..x_n) block-wise into R^d: (x_1..x_n, x_1..x_n, ...).
inline Eigen::VectorXd lift_input(const Eigen::VectorXd& x, std::size_t width) {
  const auto n = static_cast<std::size_t>(x.size());
  if (n == 0 || width == 0 || width % n != 0) {
    throw std::invalid_argument("lift_input: width " + std::to_string(width) + " is not a multiple of input size " +
                                std::to_string(n));
  }
  return x.replicate(static_cast<Eigen::Index>(width / n), 1);
}

/// Right-hand side (t, u) -> f(u, theta_t) of the forward dynamics.
inline auto state_rhs(const ControlTrajectory& control) {
  return [&control](const StepPoint& at, const Eigen::VectorXd& u) -> Eigen::VectorXd {
    const LayerParams& theta = control.at(at.midpoint());
    return (theta.A * u + theta.b).array().tanh().matrix();
  };
}

/// Right-hand side (t, p) -> -grad_u H(u_t, p, theta_t) of the co-state
/// dynamics, with u_t read from a forward trajectory on `mesh`.
inline auto costate_rhs(const ControlTrajectory& control, const Trajectory& states, const TimeMesh& mesh) {
  return [&control, &states, &mesh](const StepPoint& at, const Eigen::VectorXd& p) -> Eigen::VectorXd {
    const LayerParams& theta = control.at(at.midpoint());
    const std::size_t j = mesh.interval_containing(at.midpoint());
    const double frac = (at.t - mesh.node(j)) / mesh.step(j);
    const Eigen::VectorXd u = (1.0 - frac) * states.col(static_cast<Eigen::Index>(j)) +
                              frac * states.col(static_cast<Eigen::Index>(j + 1));
    const Eigen::ArrayXd s = (theta.A * u + theta.b).array().tanh();
    return -(theta.A.transpose() * (p.array() * (1.0 - s.square())).matrix());
  };
}

inline Trajectory forward_trajectory(const Sample& sample, const ControlTrajectory& control, IntegratorKind kind) {
  return solve_fwd(state_rhs(control), lift_input(sample.x, control.width()), control.mesh(), kind);
}

/// Mean terminal loss over the samples, each propagated on the control's mesh.
inline double empirical_cost(std::span<const Sample> samples, const ControlTrajectory& control,
                             IntegratorKind kind = IntegratorKind::explicit_euler) {
  if (samples.empty()) throw std::invalid_argument("empirical_cost: empty sample set");
  double sum = 0.0;
  for (const Sample& s : samples) {
    const Trajectory traj = forward_trajectory(s, control, kind);
    sum += terminal_loss_and_grad(traj.col(traj.cols() - 1), s.y).first;
  }
  return sum / static_cast<double>(samples.size());
}

}  // namespace amsa
