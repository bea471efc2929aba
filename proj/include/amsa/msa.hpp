#pragma once

/*
 * Adaptive method of successive approximations.
 *
 * One iteration: pick the mesh for iteration k (refinement strategy), solve
 * every sample forward and its co-state backward, maximize the augmented
 * Hamiltonian independently at each node t_0..t_{L-1}, and install the node
 * maximizer at t_j as the parameters of interval j.
 */

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "amsa/integrate.hpp"
#include "amsa/maximize.hpp"
#include "amsa/mesh.hpp"
#include "amsa/model.hpp"
#include "amsa/parallel.hpp"
#include "amsa/rng.hpp"

namespace amsa {

// ---------------------------------------------------------------------------
// refinement strategies

class RefinementStrategy {
 public:
  enum class Kind { fixed, abrupt, periodic, theoretical };

  static RefinementStrategy fixed(std::size_t layers) { return {Kind::fixed, layers, layers, 0, 0, 0}; }
  static RefinementStrategy fixed_shallow() { return fixed(3); }
  static RefinementStrategy fixed_deep() { return fixed(32); }
  /// Jump from `from` to `to` layers at iteration `switch_iter`.
  static RefinementStrategy abrupt(std::size_t from, std::size_t to, std::size_t switch_iter) {
    return {Kind::abrupt, from, to, switch_iter, 0, 0};
  }
  static RefinementStrategy abrupt_a1() { return abrupt(3, 32, 250); }
  /// Add `add` layers every `period` iterations, capped at `max_layers`.
  static RefinementStrategy periodic(std::size_t initial, std::size_t add, std::size_t period,
                                     std::size_t max_layers) {
    if (period == 0) throw std::invalid_argument("RefinementStrategy: period must be positive");
    return {Kind::periodic, initial, max_layers, 0, add, period};
  }
  static RefinementStrategy fast_a2() { return periodic(3, 10, 50, 32); }
  static RefinementStrategy slow_a3() { return periodic(3, 10, 100, 32); }
  /// Depth driven by the accuracy schedule; delta and C enter the epsilon
  /// recursion.
  static RefinementStrategy theoretical(double delta, double constant_c, std::size_t initial = 3,
                                        std::size_t max_layers = 32) {
    if (!(delta > 0.0) || !(constant_c > 0.0)) {
      throw std::invalid_argument("RefinementStrategy: theoretical schedule needs delta > 0 and C > 0");
    }
    RefinementStrategy s{Kind::theoretical, initial, max_layers, 0, 0, 0};
    s.delta_ = delta;
    s.constant_c_ = constant_c;
    return s;
  }

  [[nodiscard]] Kind kind() const noexcept { return kind_; }
  [[nodiscard]] std::size_t initial_layers() const noexcept { return initial_; }
  [[nodiscard]] std::size_t final_layers() const noexcept { return final_; }
  [[nodiscard]] double delta() const noexcept { return delta_; }
  [[nodiscard]] double constant_c() const noexcept { return constant_c_; }

  /// Scheduled depth at iteration k. For the theoretical kind this is a lower
  /// bound; the trainer refines further from the accuracy target.
  [[nodiscard]] std::size_t layers_at(std::size_t k) const {
    switch (kind_) {
      case Kind::fixed:
        return initial_;
      case Kind::abrupt:
        return k >= switch_iter_ ? final_ : initial_;
      case Kind::periodic:
        return std::min(initial_ + add_ * (k / period_), final_);
      case Kind::theoretical:
        return initial_;
    }
    return initial_;
  }

 private:
  RefinementStrategy(Kind kind, std::size_t initial, std::size_t final_layers, std::size_t switch_iter,
                     std::size_t add, std::size_t period)
      : kind_(kind), initial_(initial), final_(final_layers), switch_iter_(switch_iter), add_(add), period_(period) {
    if (initial_ < 1 || final_ < initial_) throw std::invalid_argument("RefinementStrategy: bad layer counts");
  }

  Kind kind_;
  std::size_t initial_;
  std::size_t final_;
  std::size_t switch_iter_;
  std::size_t add_;
  std::size_t period_;
  double delta_ = 0.0;
  double constant_c_ = 0.0;
};

// ---------------------------------------------------------------------------
// accuracy schedules

/// eps_k = min(eps_{k-1}, delta lambda_k^2 / (4C + rho N^{-1/2} lambda_k)).
inline double epsilon_schedule_theoretical(double lambda, double eps_prev, double delta, double constant_c,
                                           double rho, std::size_t samples) {
  if (!(delta > 0.0) || !(constant_c > 0.0) || !(rho > 0.0) || samples == 0) {
    throw std::invalid_argument("epsilon_schedule_theoretical: delta, C, rho and N must be positive");
  }
  if (lambda < 0.0 || eps_prev < 0.0) {
    throw std::invalid_argument("epsilon_schedule_theoretical: lambda and eps_prev must be nonnegative");
  }
  const double bound =
      delta * lambda * lambda / (4.0 * constant_c + rho * lambda / std::sqrt(static_cast<double>(samples)));
  return std::min(eps_prev, bound);
}

/// Lower bound on the maximization quality gamma_k.
inline double gamma_bound_theoretical(double mean_abs_htilde, double delta, double lambda_sq) {
  if (mean_abs_htilde < 0.0 || delta < 0.0 || lambda_sq < 0.0) {
    throw std::invalid_argument("gamma_bound_theoretical: inputs must be nonnegative");
  }
  const double denom = delta * lambda_sq + mean_abs_htilde;
  if (!(denom > 0.0)) throw std::invalid_argument("gamma_bound_theoretical: zero denominator");
  return mean_abs_htilde / denom;
}

/// Sample average of the time integrals of |f(u, new) - f(u, old)|^2 and
/// |grad_u H(u, p, new) - grad_u H(u, p, old)|^2 along frozen trajectories.
inline double compute_lambda_sq(const BatchTrajectory& states, const BatchTrajectory& costates,
                                const ControlTrajectory& old_control, const ControlTrajectory& new_control) {
  const TimeMesh& mesh = states.mesh();
  if (!(costates.mesh() == mesh) || !(old_control.mesh() == mesh) || !(new_control.mesh() == mesh)) {
    throw std::invalid_argument("compute_lambda_sq: trajectories and controls must share one mesh");
  }
  if (states.sample_count() != costates.sample_count() || states.sample_count() == 0) {
    throw std::invalid_argument("compute_lambda_sq: sample count mismatch");
  }
  std::vector<double> integrand(mesh.node_count());
  double total = 0.0;
  for (std::size_t i = 0; i < states.sample_count(); ++i) {
    for (std::size_t n = 0; n < mesh.node_count(); ++n) {
      const std::size_t j = std::min(n, mesh.intervals() - 1);
      const LayerParams& a = new_control.layer(j);
      const LayerParams& b = old_control.layer(j);
      const Eigen::VectorXd u = states.value(i, n);
      const Eigen::VectorXd p = costates.value(i, n);
      integrand[n] = (dynamics_f(u, a) - dynamics_f(u, b)).squaredNorm() +
                     (grad_u_hamiltonian(u, p, a) - grad_u_hamiltonian(u, p, b)).squaredNorm();
    }
    total += quadrature_l2_sq(integrand, mesh);
  }
  return total / static_cast<double>(states.sample_count());
}

// ---------------------------------------------------------------------------
// configuration and records

struct TrainConfig {
  double tau = 1e-8;
  std::size_t k_max = 800;
  RefinementStrategy strategy = RefinementStrategy::fixed_shallow();
  IntegratorKind integrator = IntegratorKind::explicit_euler;
  MaximizeOptions maximize;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  double epsilon0 = 1.0;       // initial accuracy of the theoretical schedule
  bool record_wall_time = false;

  void validate() const {
    if (!(tau > 0.0)) throw std::invalid_argument("TrainConfig: tau must be positive");
    if (threads < 1) throw std::invalid_argument("TrainConfig: threads must be positive");
  }
};

struct IterationRow {
  std::size_t iteration = 0;
  std::size_t layers = 0;
  double train_loss = 0.0;
  double test_loss = std::numeric_limits<double>::quiet_NaN();
  double lambda_sq = 0.0;
  double wall_ms = 0.0;
  // diagnostics, not persisted
  double min_node_gain = 0.0;      // min over nodes of H~(new) - H~(incumbent)
  double mean_abs_htilde = 0.0;    // node-averaged |H~(new)|
  double epsilon = std::numeric_limits<double>::quiet_NaN();
};

struct RunSummary {
  double min_train_loss;
  std::size_t argmin_iteration;
  double test_loss_at_best;
  std::size_t final_layers;
};

struct RunRecord {
  std::vector<IterationRow> rows;
  std::optional<ControlTrajectory> final_control;
  std::optional<ControlTrajectory> best_control;
  double final_epsilon = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;  // stopped on the loss-change tolerance
  std::string abort_reason;

  [[nodiscard]] RunSummary summary() const {
    if (rows.empty()) throw std::logic_error("RunRecord: no rows");
    std::size_t arg = 0;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (rows[r].train_loss < rows[arg].train_loss) arg = r;
    }
    return {rows[arg].train_loss, rows[arg].iteration, rows[arg].test_loss, rows.back().layers};
  }
};

/// Draws a fresh test set; used once per iteration.
using TestSetSampler = std::function<std::vector<Sample>(Rng&)>;

// ---------------------------------------------------------------------------
// training state and iteration

struct TrainingState {
  ControlTrajectory control;
  ControlTrajectory best_control;
  double best_loss;
  double loss;
  double delta_loss;
  double epsilon;
  double last_lambda_sq = 0.0;
  std::size_t k = 0;
  RunRecord record;
};

struct TrainingContext {
  std::span<const Sample> samples;
  ProblemSpec spec;
  TrainConfig config;
  TestSetSampler test_sampler;
};

namespace detail {

inline double test_loss_at(const TrainingContext& ctx, const ControlTrajectory& control, std::size_t iteration) {
  if (!ctx.test_sampler) return std::numeric_limits<double>::quiet_NaN();
  Rng rng = make_stream(ctx.config.seed, {kStreamTestSet, iteration});
  const std::vector<Sample> test = ctx.test_sampler(rng);
  return empirical_cost(test, control, ctx.config.integrator);
}

inline std::vector<Trajectory> forward_all(const TrainingContext& ctx, const ControlTrajectory& control) {
  std::vector<Trajectory> out(ctx.samples.size());
  parallel_for(ctx.samples.size(), ctx.config.threads,
               [&](std::size_t i) { out[i] = forward_trajectory(ctx.samples[i], control, ctx.config.integrator); });
  return out;
}

/// Lipschitz constant in u of tanh(A u + b) over all layers, bounded by the
/// Frobenius norm of A.
inline double lipschitz_bound(const ControlTrajectory& control) {
  double k = 0.0;
  for (const auto& layer : control.layers()) k = std::max(k, layer.A.norm());
  return k;
}

inline double sample_residual(const TrainingContext& ctx, const ControlTrajectory& control) {
  const auto rhs = state_rhs(control);
  double sum = 0.0;
  for (const Sample& s : ctx.samples) {
    const Trajectory traj = forward_trajectory(s, control, ctx.config.integrator);
    const double eta = residual_accuracy(rhs, traj, control.mesh(), ctx.config.integrator);
    sum += eta * eta;
  }
  return std::sqrt(sum / static_cast<double>(ctx.samples.size()));
}

inline void refine_state(TrainingState& state, const TimeMesh& mesh) {
  state.control = prolong_control(state.control, mesh);
  state.best_control = prolong_control(state.best_control, mesh);
}

}  // namespace detail

inline TrainingState initial_state(const TrainingContext& ctx) {
  ctx.spec.validate();
  ctx.config.validate();
  if (ctx.samples.empty()) throw std::invalid_argument("training: empty sample set");
  const TimeMesh mesh = make_uniform_mesh(ctx.spec.horizon, ctx.config.strategy.layers_at(0));
  ControlTrajectory zero = ControlTrajectory::zeros(mesh, ctx.spec.width, ctx.spec.bounds);
  const double loss = empirical_cost(ctx.samples, zero, ctx.config.integrator);
  TrainingState state{zero, zero, loss, loss, ctx.config.tau + 1.0, ctx.config.epsilon0, 0.0, 0, {}};
  IterationRow row;
  row.iteration = 0;
  row.layers = mesh.intervals();
  row.train_loss = loss;
  row.test_loss = detail::test_loss_at(ctx, zero, 0);
  row.epsilon = ctx.config.epsilon0;
  state.record.rows.push_back(row);
  return state;
}

/// Depth the mesh should have before the iteration with index state.k runs.
inline void update_mesh(TrainingState& state, const TrainingContext& ctx) {
  const RefinementStrategy& strategy = ctx.config.strategy;
  const std::size_t current = state.control.mesh().intervals();
  if (strategy.kind() != RefinementStrategy::Kind::theoretical) {
    const std::size_t target = strategy.layers_at(state.k);
    if (target > current) detail::refine_state(state, make_uniform_mesh(ctx.spec.horizon, target));
    return;
  }
  // accuracy-driven: tighten eps_k, then refine until the Gronwall-converted
  // residual target is met or the depth cap binds
  if (state.k > 0) {
    state.epsilon = epsilon_schedule_theoretical(std::sqrt(state.last_lambda_sq), state.epsilon, strategy.delta(),
                                                 strategy.constant_c(), ctx.spec.rho, ctx.samples.size());
  }
  for (;;) {
    const double factor = gronwall_bound(1.0, detail::lipschitz_bound(state.control), ctx.spec.horizon);
    const double target_eta = state.epsilon / factor;
    if (detail::sample_residual(ctx, state.control) <= target_eta) return;
    auto finer = next_refinement(state.control.mesh(), strategy.final_layers());
    if (!finer) return;
    detail::refine_state(state, *finer);
  }
}

/// Node data at t_j: states, co-states and their forward difference slopes on
/// interval j.
inline NodeData node_data(const std::vector<Trajectory>& states, const std::vector<Trajectory>& costates,
                          const TimeMesh& mesh, std::size_t j) {
  const auto n = static_cast<Eigen::Index>(states.size());
  const auto d = states.front().rows();
  const auto c0 = static_cast<Eigen::Index>(j);
  const double inv_h = 1.0 / mesh.step(j);
  NodeData data{Eigen::MatrixXd(d, n), Eigen::MatrixXd(d, n), Eigen::MatrixXd(d, n), Eigen::MatrixXd(d, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& u = states[static_cast<std::size_t>(i)];
    const auto& p = costates[static_cast<std::size_t>(i)];
    data.u.col(i) = u.col(c0);
    data.p.col(i) = p.col(c0);
    data.v.col(i) = (u.col(c0 + 1) - u.col(c0)) * inv_h;
    data.q.col(i) = (p.col(c0 + 1) - p.col(c0)) * inv_h;
  }
  return data;
}

/// One pass of the learning loop body; appends a row to state.record.
inline void amsa_iterate(TrainingState& state, const TrainingContext& ctx) {
  const auto start = std::chrono::steady_clock::now();
  update_mesh(state, ctx);
  const ControlTrajectory& control = state.control;
  const TimeMesh& mesh = control.mesh();
  const IntegratorKind kind = ctx.config.integrator;
  const std::size_t n = ctx.samples.size();

  std::vector<Trajectory> states = detail::forward_all(ctx, control);
  std::vector<Trajectory> costates(n);
  parallel_for(n, ctx.config.threads, [&](std::size_t i) {
    const Eigen::VectorXd u_T = states[i].col(states[i].cols() - 1);
    const Eigen::VectorXd p_T = -terminal_loss_and_grad(u_T, ctx.samples[i].y).second;
    costates[i] = solve_bwd(costate_rhs(control, states[i], mesh), p_T, mesh, kind);
  });

  const std::size_t L = mesh.intervals();
  std::vector<MaximizeResult> results(L);
  parallel_for(L, ctx.config.threads, [&](std::size_t j) {
    const NodeObjective objective(node_data(states, costates, mesh, j), ctx.spec.rho);
    Rng rng = make_stream(ctx.config.seed, {kStreamMaximize, state.k, j});
    results[j] = maximize_hamiltonian_at_node(objective, control.layer(j), state.best_control.layer(j),
                                              ctx.spec.bounds, ctx.config.maximize, rng);
  });

  std::vector<LayerParams> layers;
  layers.reserve(L);
  double min_gain = std::numeric_limits<double>::infinity();
  double abs_sum = 0.0;
  for (const auto& r : results) {
    layers.push_back(r.theta);
    min_gain = std::min(min_gain, r.value - r.incumbent_value);
    abs_sum += std::abs(r.value);
  }
  ControlTrajectory next(mesh, std::move(layers), ctx.spec.bounds);

  const double lambda_sq =
      compute_lambda_sq(BatchTrajectory(mesh, std::move(states)), BatchTrajectory(mesh, std::move(costates)),
                        control, next);

  const double loss = empirical_cost(ctx.samples, next, kind);
  const double test = detail::test_loss_at(ctx, next, state.k + 1);

  state.delta_loss = state.loss - loss;
  state.loss = loss;
  state.last_lambda_sq = lambda_sq;
  state.control = std::move(next);
  state.k += 1;
  if (loss < state.best_loss) {
    state.best_loss = loss;
    state.best_control = state.control;
  }

  IterationRow row;
  row.iteration = state.k;
  row.layers = L;
  row.train_loss = loss;
  row.test_loss = test;
  row.lambda_sq = lambda_sq;
  row.min_node_gain = min_gain;
  row.mean_abs_htilde = abs_sum / static_cast<double>(L);
  row.epsilon = state.epsilon;
  if (ctx.config.record_wall_time) {
    row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  }
  state.record.rows.push_back(row);
}

/// True once the refinement schedule cannot deepen the mesh any further.
inline bool at_final_depth(const TrainingState& state, const TrainingContext& ctx) {
  const RefinementStrategy& s = ctx.config.strategy;
  const std::size_t L = state.control.mesh().intervals();
  if (s.kind() == RefinementStrategy::Kind::theoretical) return L >= s.final_layers();
  return L >= s.layers_at(std::numeric_limits<std::size_t>::max() / 2);
}

/// Runs the learning loop from the zero control. Continues while k < k_max
/// and either |Delta| > tau or the mesh has not reached its final depth.
inline RunRecord run_training(std::span<const Sample> samples, const ProblemSpec& spec, const TrainConfig& config,
                              TestSetSampler test_sampler = {}) {
  const TrainingContext ctx{samples, spec, config, std::move(test_sampler)};
  TrainingState state = initial_state(ctx);
  try {
    while (state.k < config.k_max) {
      if (std::abs(state.delta_loss) <= config.tau && at_final_depth(state, ctx)) {
        state.record.converged = true;
        break;
      }
      amsa_iterate(state, ctx);
    }
  } catch (const NumericalOverflow& e) {
    state.record.abort_reason = e.what();
  }
  state.record.final_control = state.control;
  state.record.best_control = state.best_control;
  state.record.final_epsilon = state.epsilon;
  return std::move(state.record);
}

/// Network output for one input: g(u_T) with u propagated on the control's mesh.
inline double predict(const Eigen::VectorXd& x, const ControlTrajectory& control, const ProblemSpec& spec,
                      OutputKind kind, IntegratorKind integrator = IntegratorKind::explicit_euler) {
  if (control.width() != spec.width) throw std::invalid_argument("predict: control width does not match spec");
  const Trajectory traj = forward_trajectory(Sample{x, 0.0}, control, integrator);
  return output_g(traj.col(traj.cols() - 1), kind);
}

}  // namespace amsa
