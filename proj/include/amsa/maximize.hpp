#pragma once

/*
 * Maximization of the sample-averaged augmented Hamiltonian at one time node.
 *
 * The objective is evaluated for all samples at once on d x N blocks:
 *
 *   F(A, b) = mean_i [ p_i . s_i - rho/2 |v_i - s_i|^2 - rho/2 |q_i + A^T w_i|^2 ]
 *   s_i = tanh(A u_i + b),  w_i = p_i . (1 - s_i^2)
 *
 * The maximizer screens a multistart candidate set, refines the most
 * promising candidates with spectral projected gradient ascent on the box,
 * and never returns anything worse than the incumbent.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "amsa/mesh.hpp"
#include "amsa/rng.hpp"

namespace amsa {

/// Frozen per-node data: columns are samples.
struct NodeData {
  Eigen::MatrixXd u;  // states
  Eigen::MatrixXd p;  // co-states
  Eigen::MatrixXd v;  // discrete state slopes
  Eigen::MatrixXd q;  // discrete co-state slopes
};

class NodeObjective {
 public:
  NodeObjective(NodeData data, double rho) : data_(std::move(data)), rho_(rho) {
    const auto d = data_.u.rows();
    const auto n = data_.u.cols();
    auto same = [&](const Eigen::MatrixXd& m) { return m.rows() == d && m.cols() == n; };
    if (n == 0 || !same(data_.p) || !same(data_.v) || !same(data_.q)) {
      throw std::invalid_argument("NodeObjective: inconsistent node data");
    }
    if (rho_ < 0.0) throw std::invalid_argument("NodeObjective: rho must be nonnegative");
  }

  [[nodiscard]] std::size_t width() const noexcept { return static_cast<std::size_t>(data_.u.rows()); }
  [[nodiscard]] std::size_t dimension() const noexcept { return width() * (width() + 1); }
  [[nodiscard]] const NodeData& data() const noexcept { return data_; }

  [[nodiscard]] double value(const Eigen::VectorXd& x) const { return evaluate(x, nullptr); }

  double value_and_gradient(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const { return evaluate(x, &grad); }

  [[nodiscard]] double value(const LayerParams& theta) const { return value(theta.flatten()); }

 private:
  double evaluate(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const {
    const auto d = data_.u.rows();
    const auto n = data_.u.cols();
    const Eigen::Map<const Eigen::MatrixXd> A(x.data(), d, d);
    const auto b = x.tail(d);

    Eigen::ArrayXXd s = (A * data_.u).colwise() + b;
    s = s.tanh();
    const Eigen::ArrayXXd sech2 = 1.0 - s.square();
    const Eigen::ArrayXXd w = data_.p.array() * sech2;

    double total = (data_.p.array() * s).sum();
    Eigen::ArrayXXd r;
    Eigen::MatrixXd g;
    if (rho_ != 0.0) {
      r = data_.v.array() - s;
      g = data_.q + A.transpose() * w.matrix();
      total -= 0.5 * rho_ * (r.square().sum() + g.squaredNorm());
    }
    const double inv_n = 1.0 / static_cast<double>(n);

    if (grad != nullptr) {
      grad->resize(d * d + d);
      Eigen::ArrayXXd dz = w;
      Eigen::MatrixXd gA;
      if (rho_ != 0.0) {
        const Eigen::ArrayXXd ag = (A * g).array();
        dz += rho_ * r * sech2 + 2.0 * rho_ * ag * data_.p.array() * s * sech2;
        gA = dz.matrix() * data_.u.transpose() - rho_ * w.matrix() * g.transpose();
      } else {
        gA = dz.matrix() * data_.u.transpose();
      }
      Eigen::Map<Eigen::MatrixXd>(grad->data(), d, d) = gA * inv_n;
      grad->tail(d) = dz.rowwise().sum().matrix() * inv_n;
    }
    return total * inv_n;
  }

  NodeData data_;
  double rho_;
};

inline void project_to_box(Eigen::VectorXd& x, const Bounds& bounds) {
  x = x.cwiseMax(bounds.lo).cwiseMin(bounds.hi);
}

struct AscentOptions {
  std::size_t max_evals = 60;
  double tolerance = 1e-8;  // on the infinity norm of the projected gradient step
};

struct AscentResult {
  Eigen::VectorXd x;
  double value;
  std::size_t evals;
};

/// Spectral (Barzilai-Borwein) projected gradient ascent with Armijo
/// backtracking along the projected direction. Monotone: the returned value
/// is never below the value at the projected start point.
inline AscentResult projected_gradient_ascent(const NodeObjective& objective, Eigen::VectorXd x,
                                              const Bounds& bounds, const AscentOptions& options) {
  constexpr double kArmijo = 1e-4;
  constexpr double kMinStep = 1e-10;
  constexpr double kMaxStep = 1e10;

  project_to_box(x, bounds);
  Eigen::VectorXd grad;
  double value = objective.value_and_gradient(x, grad);
  std::size_t evals = 1;
  double step = 1.0;

  Eigen::VectorXd trial;
  Eigen::VectorXd trial_grad;
  while (evals < options.max_evals) {
    Eigen::VectorXd full = x + grad;
    project_to_box(full, bounds);
    if ((full - x).lpNorm<Eigen::Infinity>() <= options.tolerance) break;

    Eigen::VectorXd dir = x + step * grad;
    project_to_box(dir, bounds);
    dir -= x;
    const double slope = grad.dot(dir);
    if (!(slope > 0.0)) break;

    double t = 1.0;
    bool accepted = false;
    while (evals < options.max_evals) {
      trial = x + t * dir;
      const double trial_value = objective.value_and_gradient(trial, trial_grad);
      ++evals;
      if (std::isfinite(trial_value) && trial_value >= value + kArmijo * t * slope) {
        const Eigen::VectorXd s = trial - x;
        const Eigen::VectorXd y = trial_grad - grad;
        const double sy = s.dot(y);
        // ascent on a locally concave function has s.y < 0
        step = sy < 0.0 ? std::clamp(s.squaredNorm() / -sy, kMinStep, kMaxStep) : kMaxStep;
        x = trial;
        grad = trial_grad;
        value = trial_value;
        accepted = true;
        break;
      }
      t *= 0.5;
      if (t * dir.lpNorm<Eigen::Infinity>() < 1e-16) break;
    }
    if (!accepted) break;
  }
  return {std::move(x), value, evals};
}

struct MultistartOptions {
  std::size_t n_scales = 6;   // perturbation scales 10^{-2q}, q = 0..n_scales-1
  std::size_t n_draws = 25;   // draws per scale and family
  std::size_t n_refine = 1;   // best screened candidates refined by ascent
  bool refine_incumbent = false;
};

struct MaximizeOptions {
  MultistartOptions multistart;
  AscentOptions ascent;
};

struct MaximizeResult {
  LayerParams theta;
  double value;            // objective at theta
  double incumbent_value;  // objective at the incumbent
};

/// Approximate maximizer of the node objective over the box. The candidate
/// set holds the incumbent, the running best layer, and for every scale
/// 10^{-2q} perturbations best + 10^{-2q} U(lo, hi) and fresh draws
/// 10^{-2q} U(lo, hi), clamped to the box. Ties keep the incumbent.
inline MaximizeResult maximize_hamiltonian_at_node(const NodeObjective& objective, const LayerParams& incumbent,
                                                   const LayerParams& best, const Bounds& bounds,
                                                   const MaximizeOptions& options, Rng& rng) {
  const std::size_t width = objective.width();
  const std::size_t dim = objective.dimension();
  if (incumbent.size() != dim || best.size() != dim) {
    throw std::invalid_argument("maximize_hamiltonian_at_node: parameter size mismatch");
  }

  std::vector<Eigen::VectorXd> candidates;
  candidates.reserve(2 + 2 * options.multistart.n_scales * options.multistart.n_draws);
  candidates.push_back(incumbent.flatten());
  candidates.push_back(best.flatten());
  const Eigen::VectorXd best_flat = best.flatten();
  for (std::size_t q = 0; q < options.multistart.n_scales; ++q) {
    const double scale = std::pow(10.0, -2.0 * static_cast<double>(q));
    for (std::size_t i = 0; i < options.multistart.n_draws; ++i) {
      Eigen::VectorXd perturbed(static_cast<Eigen::Index>(dim));
      Eigen::VectorXd fresh(static_cast<Eigen::Index>(dim));
      for (std::size_t k = 0; k < dim; ++k) {
        perturbed[static_cast<Eigen::Index>(k)] = scale * uniform(rng, bounds.lo, bounds.hi);
      }
      for (std::size_t k = 0; k < dim; ++k) {
        fresh[static_cast<Eigen::Index>(k)] = scale * uniform(rng, bounds.lo, bounds.hi);
      }
      perturbed += best_flat;
      project_to_box(perturbed, bounds);
      project_to_box(fresh, bounds);
      candidates.push_back(std::move(perturbed));
      candidates.push_back(std::move(fresh));
    }
  }

  const Eigen::VectorXd incumbent_flat = candidates.front();
  const double incumbent_value = objective.value(incumbent_flat);

  // screening
  std::vector<double> values(candidates.size());
  values[0] = incumbent_value;
  for (std::size_t c = 1; c < candidates.size(); ++c) values[c] = objective.value(candidates[c]);
  std::vector<std::size_t> order(candidates.size());
  for (std::size_t c = 0; c < order.size(); ++c) order[c] = c;
  const std::size_t n_top = std::min(options.multistart.n_refine, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_top), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double va = std::isfinite(values[a]) ? values[a] : -std::numeric_limits<double>::infinity();
                      const double vb = std::isfinite(values[b]) ? values[b] : -std::numeric_limits<double>::infinity();
                      return va > vb || (va == vb && a < b);
                    });

  Eigen::VectorXd winner = incumbent_flat;
  double winner_value = incumbent_value;
  auto consider = [&](const Eigen::VectorXd& x, double v) {
    if (std::isfinite(v) && v > winner_value) {
      winner = x;
      winner_value = v;
    }
  };

  for (std::size_t c = 0; c < candidates.size(); ++c) consider(candidates[c], values[c]);

  std::vector<std::size_t> to_refine;
  if (options.multistart.refine_incumbent) to_refine.push_back(0);
  for (std::size_t r = 0; r < n_top; ++r) {
    if (order[r] != 0 || !options.multistart.refine_incumbent) to_refine.push_back(order[r]);
  }
  for (const std::size_t c : to_refine) {
    const AscentResult refined = projected_gradient_ascent(objective, candidates[c], bounds, options.ascent);
    consider(refined.x, refined.value);
  }

  return {LayerParams::unflatten(winner, width), winner_value, incumbent_value};
}

}  // namespace amsa
