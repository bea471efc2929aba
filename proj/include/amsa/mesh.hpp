#pragma once

/*
 * Time meshes on [0, T] and the containers that live on them.
 *
 * A mesh with L intervals is a network of depth L. Controls are piecewise
 * constant: interval j = [t_j, t_{j+1}) carries one LayerParams record, so
 * indices of intervals and layers coincide (0-based throughout).
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace amsa {

class TimeMesh {
 public:
  explicit TimeMesh(std::vector<double> nodes) : nodes_(std::move(nodes)) {
    if (nodes_.size() < 2) throw std::invalid_argument("TimeMesh: need at least one interval");
    if (nodes_.front() != 0.0) throw std::invalid_argument("TimeMesh: first node must be 0");
    for (std::size_t i = 1; i < nodes_.size(); ++i) {
      if (!(nodes_[i] > nodes_[i - 1]) || !std::isfinite(nodes_[i])) {
        throw std::invalid_argument("TimeMesh: nodes must be finite and strictly increasing");
      }
    }
  }

  [[nodiscard]] std::size_t intervals() const noexcept { return nodes_.size() - 1; }
  [[nodiscard]] std::size_t node_count() const noexcept { return nodes_.size(); }
  [[nodiscard]] double horizon() const noexcept { return nodes_.back(); }
  [[nodiscard]] double node(std::size_t i) const { return nodes_.at(i); }
  [[nodiscard]] const std::vector<double>& nodes() const noexcept { return nodes_; }

  /// Length of interval j = [t_j, t_{j+1}].
  [[nodiscard]] double step(std::size_t j) const { return nodes_.at(j + 1) - nodes_.at(j); }
  [[nodiscard]] double midpoint(std::size_t j) const { return 0.5 * (nodes_.at(j) + nodes_.at(j + 1)); }

  /// Interval index with t_j <= t < t_{j+1}; t = T maps to the last interval.
  [[nodiscard]] std::size_t interval_containing(double t) const {
    if (t <= nodes_.front()) return 0;
    if (t >= nodes_.back()) return intervals() - 1;
    const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t);
    return static_cast<std::size_t>(it - nodes_.begin()) - 1;
  }

  friend bool operator==(const TimeMesh&, const TimeMesh&) = default;

 private:
  std::vector<double> nodes_;
};

inline TimeMesh make_uniform_mesh(double horizon, std::size_t layers) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw std::invalid_argument("make_uniform_mesh: horizon must be positive");
  }
  if (layers < 1) throw std::invalid_argument("make_uniform_mesh: need at least one interval");
  std::vector<double> nodes(layers + 1);
  for (std::size_t i = 0; i <= layers; ++i) {
    nodes[i] = horizon * static_cast<double>(i) / static_cast<double>(layers);
  }
  nodes.back() = horizon;
  return TimeMesh(std::move(nodes));
}

/// Splits every interval in two. The result is nested in the input.
inline TimeMesh bisect_mesh(const TimeMesh& mesh) {
  std::vector<double> nodes;
  nodes.reserve(2 * mesh.intervals() + 1);
  for (std::size_t j = 0; j < mesh.intervals(); ++j) {
    nodes.push_back(mesh.node(j));
    nodes.push_back(mesh.midpoint(j));
  }
  nodes.push_back(mesh.horizon());
  return TimeMesh(std::move(nodes));
}

inline bool same_horizon(const TimeMesh& a, const TimeMesh& b) {
  return std::abs(a.horizon() - b.horizon()) <= 1e-12 * std::max(a.horizon(), b.horizon());
}

struct Bounds {
  double lo = -1.0;
  double hi = 1.0;

  [[nodiscard]] double clamp(double x) const noexcept { return std::clamp(x, lo, hi); }
  [[nodiscard]] bool contains(double x) const noexcept { return x >= lo && x <= hi; }

  friend bool operator==(const Bounds&, const Bounds&) = default;
};

/// One layer: the parameters (A, b) of u' = tanh(A u + b) on one interval.
struct LayerParams {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;

  static LayerParams zeros(std::size_t width) {
    const auto d = static_cast<Eigen::Index>(width);
    return {Eigen::MatrixXd::Zero(d, d), Eigen::VectorXd::Zero(d)};
  }

  [[nodiscard]] std::size_t width() const noexcept { return static_cast<std::size_t>(b.size()); }
  [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(A.size() + b.size()); }

  /// Flat layout: A in column-major order, then b.
  [[nodiscard]] Eigen::VectorXd flatten() const {
    Eigen::VectorXd x(A.size() + b.size());
    x.head(A.size()) = Eigen::Map<const Eigen::VectorXd>(A.data(), A.size());
    x.tail(b.size()) = b;
    return x;
  }

  static LayerParams unflatten(const Eigen::VectorXd& x, std::size_t width) {
    const auto d = static_cast<Eigen::Index>(width);
    if (x.size() != d * d + d) throw std::invalid_argument("LayerParams: flat size mismatch");
    LayerParams p;
    p.A = Eigen::Map<const Eigen::MatrixXd>(x.data(), d, d);
    p.b = x.tail(d);
    return p;
  }

  [[nodiscard]] bool within(const Bounds& bounds) const {
    return (A.array() >= bounds.lo).all() && (A.array() <= bounds.hi).all() &&
           (b.array() >= bounds.lo).all() && (b.array() <= bounds.hi).all();
  }

  friend bool operator==(const LayerParams& x, const LayerParams& y) {
    return x.A.rows() == y.A.rows() && x.b.size() == y.b.size() && x.A == y.A && x.b == y.b;
  }
};

/// Piecewise-constant control on a mesh, one LayerParams per interval, every
/// entry inside the box bounds.
class ControlTrajectory {
 public:
  ControlTrajectory(TimeMesh mesh, std::vector<LayerParams> layers, Bounds bounds)
      : mesh_(std::move(mesh)), layers_(std::move(layers)), bounds_(bounds) {
    if (!(bounds_.lo < bounds_.hi)) throw std::invalid_argument("ControlTrajectory: empty bounds");
    if (layers_.size() != mesh_.intervals()) {
      throw std::invalid_argument("ControlTrajectory: need one layer per interval");
    }
    const std::size_t d = layers_.front().width();
    for (const auto& layer : layers_) {
      if (layer.width() != d || static_cast<std::size_t>(layer.A.rows()) != d ||
          static_cast<std::size_t>(layer.A.cols()) != d) {
        throw std::invalid_argument("ControlTrajectory: inconsistent layer width");
      }
      if (!layer.within(bounds_)) throw std::invalid_argument("ControlTrajectory: layer outside bounds");
    }
  }

  static ControlTrajectory zeros(TimeMesh mesh, std::size_t width, Bounds bounds) {
    std::vector<LayerParams> layers(mesh.intervals(), LayerParams::zeros(width));
    return {std::move(mesh), std::move(layers), bounds};
  }

  [[nodiscard]] const TimeMesh& mesh() const noexcept { return mesh_; }
  [[nodiscard]] const Bounds& bounds() const noexcept { return bounds_; }
  [[nodiscard]] std::size_t width() const noexcept { return layers_.front().width(); }
  [[nodiscard]] std::size_t layer_count() const noexcept { return layers_.size(); }
  [[nodiscard]] const LayerParams& layer(std::size_t j) const { return layers_.at(j); }
  [[nodiscard]] const std::vector<LayerParams>& layers() const noexcept { return layers_; }

  /// Control as a function of time.
  [[nodiscard]] const LayerParams& at(double t) const { return layers_[mesh_.interval_containing(t)]; }

  friend bool operator==(const ControlTrajectory&, const ControlTrajectory&) = default;

 private:
  TimeMesh mesh_;
  std::vector<LayerParams> layers_;
  Bounds bounds_;
};

/// Per-sample node values: sample(i) is a d x (L+1) matrix, column = node.
class BatchTrajectory {
 public:
  BatchTrajectory(TimeMesh mesh, std::vector<Eigen::MatrixXd> samples)
      : mesh_(std::move(mesh)), samples_(std::move(samples)) {
    for (const auto& s : samples_) {
      if (static_cast<std::size_t>(s.cols()) != mesh_.node_count()) {
        throw std::invalid_argument("BatchTrajectory: node dimension does not match mesh");
      }
      if (!s.allFinite()) throw std::invalid_argument("BatchTrajectory: non-finite entry");
    }
  }

  [[nodiscard]] const TimeMesh& mesh() const noexcept { return mesh_; }
  [[nodiscard]] std::size_t sample_count() const noexcept { return samples_.size(); }
  [[nodiscard]] const Eigen::MatrixXd& sample(std::size_t i) const { return samples_.at(i); }
  [[nodiscard]] auto value(std::size_t i, std::size_t node) const { return samples_.at(i).col(static_cast<Eigen::Index>(node)); }

 private:
  TimeMesh mesh_;
  std::vector<Eigen::MatrixXd> samples_;
};

/// Transfers a control onto a finer mesh: each fine interval takes the layer
/// of the coarse interval that contains its midpoint.
inline ControlTrajectory prolong_control(const ControlTrajectory& coarse, const TimeMesh& fine) {
  if (!same_horizon(coarse.mesh(), fine)) throw std::invalid_argument("prolong_control: horizons differ");
  if (fine.intervals() < coarse.mesh().intervals()) {
    throw std::invalid_argument("prolong_control: target mesh is coarser than the source");
  }
  std::vector<LayerParams> layers;
  layers.reserve(fine.intervals());
  for (std::size_t j = 0; j < fine.intervals(); ++j) layers.push_back(coarse.at(fine.midpoint(j)));
  return {fine, std::move(layers), coarse.bounds()};
}

/// Trapezoidal approximation of the time integral of node values.
inline double quadrature_l2_sq(std::span<const double> values, const TimeMesh& mesh) {
  if (values.size() != mesh.node_count()) {
    throw std::invalid_argument("quadrature_l2_sq: expected " + std::to_string(mesh.node_count()) +
                                " values, got " + std::to_string(values.size()));
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < mesh.intervals(); ++j) sum += 0.5 * mesh.step(j) * (values[j] + values[j + 1]);
  return sum;
}

}  // namespace amsa
