#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "amsa/integrate.hpp"

namespace amsa {
namespace {

const auto decay = [](const StepPoint&, const Eigen::VectorXd& y) -> Eigen::VectorXd { return -y; };

Eigen::VectorXd one() { return Eigen::VectorXd::Constant(1, 1.0); }

double terminal_error(IntegratorKind kind, std::size_t L) {
  const Trajectory u = solve_fwd(decay, one(), make_uniform_mesh(1.0, L), kind);
  return std::abs(u(0, static_cast<Eigen::Index>(L)) - std::exp(-1.0));
}

double observed_order(IntegratorKind kind) {
  const std::vector<std::size_t> Ls{10, 20, 40, 80};
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < Ls.size(); ++i) sum += std::log2(terminal_error(kind, Ls[i]) / terminal_error(kind, Ls[i + 1]));
  return sum / static_cast<double>(Ls.size() - 1);
}

/// ||u - U||_{L2(0,1)} between exp(-t) and the piecewise-linear interpolant
/// of the Euler nodes, by composite Simpson with 64 panels per interval.
double euler_l2_error(std::size_t L) {
  const TimeMesh mesh = make_uniform_mesh(1.0, L);
  const Trajectory U = solve_fwd(decay, one(), mesh, IntegratorKind::explicit_euler);
  double sum = 0.0;
  for (std::size_t j = 0; j < L; ++j) {
    const double t0 = mesh.node(j);
    const double h = mesh.step(j);
    const double y0 = U(0, static_cast<Eigen::Index>(j));
    const double y1 = U(0, static_cast<Eigen::Index>(j + 1));
    constexpr int panels = 64;
    const double dt = h / panels;
    auto err2 = [&](double s) {
      const double e = std::exp(-(t0 + s)) - (y0 + (y1 - y0) * s / h);
      return e * e;
    };
    for (int k = 0; k < panels; ++k) {
      const double a = k * dt;
      sum += dt / 6.0 * (err2(a) + 4.0 * err2(a + 0.5 * dt) + err2(a + dt));
    }
  }
  return std::sqrt(sum);
}

TEST(SolveFwd, EulerClosedForm) {
  const Trajectory u = solve_fwd(decay, one(), make_uniform_mesh(1.0, 10), IntegratorKind::explicit_euler);
  EXPECT_NEAR(u(0, 10), 0.3486784401, 1e-12);
  EXPECT_NEAR(u(0, 1), 0.9, 1e-15);
}

TEST(SolveFwd, HeunClosedForm) {
  const Trajectory u = solve_fwd(decay, one(), make_uniform_mesh(1.0, 10), IntegratorKind::heun2);
  EXPECT_NEAR(u(0, 10), std::pow(0.905, 10), 1e-12);
}

TEST(SolveFwd, SingleIntervalUsesLeftState) {
  const auto rhs = [](const StepPoint&, const Eigen::VectorXd& y) -> Eigen::VectorXd { return 2.0 * y; };
  const Trajectory u = solve_fwd(rhs, one(), make_uniform_mesh(0.5, 1), IntegratorKind::explicit_euler);
  EXPECT_DOUBLE_EQ(u(0, 1), 2.0);
}

TEST(SolveBwd, EulerClosedForm) {
  const Trajectory p = solve_bwd(decay, one(), make_uniform_mesh(1.0, 10), IntegratorKind::explicit_euler);
  EXPECT_NEAR(p(0, 10), 1.0, 0.0);
  EXPECT_NEAR(p(0, 0), std::pow(1.1, 10), 1e-12);
}

TEST(SolveBwd, IsTimeReversedForwardSolve) {
  const auto growth = [](const StepPoint& at, const Eigen::VectorXd& y) -> Eigen::VectorXd {
    return std::sin(at.t) * y;
  };
  const TimeMesh mesh = make_uniform_mesh(2.0, 16);
  std::vector<double> reversed;
  for (std::size_t i = mesh.node_count(); i-- > 0;) reversed.push_back(2.0 - mesh.node(i));
  const TimeMesh rmesh(reversed);
  const auto flipped = [&](const StepPoint& at, const Eigen::VectorXd& y) -> Eigen::VectorXd {
    return -growth(StepPoint{2.0 - at.t, 2.0 - at.right, 2.0 - at.left}, y);
  };
  for (const auto kind : {IntegratorKind::explicit_euler, IntegratorKind::heun2}) {
    const Trajectory back = solve_bwd(growth, one(), mesh, kind);
    const Trajectory fwd = solve_fwd(flipped, one(), rmesh, kind);
    for (Eigen::Index i = 0; i <= 16; ++i) EXPECT_NEAR(back(0, i), fwd(0, 16 - i), 1e-13);
  }
}

TEST(SolveFwd, OverflowIsReported) {
  const auto blowup = [](const StepPoint&, const Eigen::VectorXd& y) -> Eigen::VectorXd { return y.array().square() * 1e200; };
  EXPECT_THROW(solve_fwd(blowup, Eigen::VectorXd::Constant(1, 1e100), make_uniform_mesh(1.0, 4),
                         IntegratorKind::explicit_euler),
               NumericalOverflow);
}

TEST(Integrators, ConvergenceOrders) {
  EXPECT_NEAR(observed_order(IntegratorKind::explicit_euler), 1.0, 0.15);
  EXPECT_NEAR(observed_order(IntegratorKind::heun2), 2.0, 0.15);
}

TEST(Integrators, Deterministic) {
  const TimeMesh mesh = make_uniform_mesh(3.0, 37);
  const auto rhs = [](const StepPoint& at, const Eigen::VectorXd& y) -> Eigen::VectorXd {
    return (y.array() * std::cos(at.t)).tanh().matrix();
  };
  const Eigen::Vector3d x0(0.1, -0.4, 0.9);
  EXPECT_EQ(solve_fwd(rhs, x0, mesh, IntegratorKind::heun2), solve_fwd(rhs, x0, mesh, IntegratorKind::heun2));
}

TEST(ResidualAccuracy, HalvesWithStepForEuler) {
  double prev = 0.0;
  for (const std::size_t L : {10u, 20u, 40u, 80u}) {
    const TimeMesh mesh = make_uniform_mesh(1.0, L);
    const Trajectory u = solve_fwd(decay, one(), mesh, IntegratorKind::explicit_euler);
    const double eta = residual_accuracy(decay, u, mesh, IntegratorKind::explicit_euler);
    EXPECT_GT(eta, 0.0);
    if (prev > 0.0) {
      EXPECT_NEAR(eta / prev, 0.5, 0.1) << L;
    }
    prev = eta;
  }
}

TEST(ResidualAccuracy, QuadraticDecayForHeun) {
  double prev = 0.0;
  for (const std::size_t L : {10u, 20u, 40u}) {
    const TimeMesh mesh = make_uniform_mesh(1.0, L);
    const Trajectory u = solve_fwd(decay, one(), mesh, IntegratorKind::heun2);
    const double eta = residual_accuracy(decay, u, mesh, IntegratorKind::heun2);
    if (prev > 0.0) {
      EXPECT_NEAR(eta / prev, 0.25, 0.06) << L;
    }
    prev = eta;
  }
}

TEST(ResidualAccuracy, ZeroForExactlyResolvedDynamics) {
  const auto constant = [](const StepPoint&, const Eigen::VectorXd& y) -> Eigen::VectorXd {
    return Eigen::VectorXd::Constant(y.size(), 0.3);
  };
  const TimeMesh mesh = make_uniform_mesh(2.0, 5);
  const Trajectory u = solve_fwd(constant, one(), mesh, IntegratorKind::explicit_euler);
  EXPECT_NEAR(residual_accuracy(constant, u, mesh, IntegratorKind::explicit_euler), 0.0, 1e-15);
  EXPECT_THROW(residual_accuracy(constant, u, make_uniform_mesh(2.0, 4), IntegratorKind::explicit_euler),
               std::invalid_argument);
}

TEST(Gronwall, Values) {
  EXPECT_NEAR(gronwall_bound(1.0, 0.0, 1.0), std::exp(0.5), 1e-15);
  EXPECT_NEAR(gronwall_bound(2.0, 1.0, 1.0), 2.0 * std::exp(1.5) / std::sqrt(3.0), 1e-13);
  EXPECT_EQ(gronwall_bound(0.0, 3.0, 2.0), 0.0);
  EXPECT_THROW(gronwall_bound(-1.0, 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(gronwall_bound(1.0, -1.0, 1.0), std::invalid_argument);
}

TEST(Gronwall, MonotoneInEachArgument) {
  double prev = 0.0;
  for (double eta = 0.0; eta < 2.0; eta += 0.25) {
    const double g = gronwall_bound(eta, 1.0, 1.0);
    EXPECT_GE(g, prev);
    prev = g;
  }
  prev = 0.0;
  for (double K = 0.0; K < 5.0; K += 0.5) {
    const double g = gronwall_bound(1.0, K, 5.0);
    EXPECT_GT(g, prev);
    prev = g;
  }
  prev = 0.0;
  for (double T = 0.5; T < 5.0; T += 0.5) {
    const double g = gronwall_bound(1.0, 1.0, T);
    EXPECT_GT(g, prev);
    prev = g;
  }
}

TEST(Gronwall, BoundsMeasuredEulerError) {
  for (const std::size_t L : {5u, 10u, 20u, 40u}) {
    const TimeMesh mesh = make_uniform_mesh(1.0, L);
    const Trajectory u = solve_fwd(decay, one(), mesh, IntegratorKind::explicit_euler);
    const double eta = residual_accuracy(decay, u, mesh, IntegratorKind::explicit_euler);
    EXPECT_LE(euler_l2_error(L), gronwall_bound(eta, 1.0, 1.0)) << L;
  }
}

TEST(Refinement, SequenceBisectsThenJumps) {
  auto m = next_refinement(make_uniform_mesh(5.0, 3), 32);
  ASSERT_TRUE(m);
  EXPECT_EQ(m->intervals(), 6u);
  m = next_refinement(make_uniform_mesh(5.0, 24), 32);
  ASSERT_TRUE(m);
  EXPECT_EQ(m->intervals(), 32u);
  EXPECT_EQ(m->horizon(), 5.0);
  EXPECT_FALSE(next_refinement(make_uniform_mesh(5.0, 32), 32));
}

TEST(Refinement, StopsAtTarget) {
  const auto r = refine_to_accuracy(decay, one(), make_uniform_mesh(1.0, 3), IntegratorKind::explicit_euler, 10.0, 32);
  EXPECT_TRUE(r.reached);
  EXPECT_EQ(r.mesh.intervals(), 3u);

  const TimeMesh m10 = make_uniform_mesh(1.0, 10);
  const double eta10 = residual_accuracy(decay, solve_fwd(decay, one(), m10, IntegratorKind::explicit_euler), m10,
                                         IntegratorKind::explicit_euler);
  const auto r2 = refine_to_accuracy(decay, one(), make_uniform_mesh(1.0, 5), IntegratorKind::explicit_euler,
                                     eta10 * 1.0001, 80);
  EXPECT_TRUE(r2.reached);
  EXPECT_EQ(r2.mesh.intervals(), 10u);
  EXPECT_LE(r2.eta, eta10 * 1.0001);
}

TEST(Refinement, CapBindsBeforeTarget) {
  const auto r = refine_to_accuracy(decay, one(), make_uniform_mesh(1.0, 3), IntegratorKind::explicit_euler, 1e-12, 32);
  EXPECT_FALSE(r.reached);
  EXPECT_EQ(r.mesh.intervals(), 32u);
  EXPECT_EQ(r.trajectory.cols(), 33);
  EXPECT_THROW(refine_to_accuracy(decay, one(), make_uniform_mesh(1.0, 3), IntegratorKind::explicit_euler, 0.0, 32),
               std::invalid_argument);
}

}  // namespace
}  // namespace amsa
