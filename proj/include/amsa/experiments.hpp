#pragma once

/*
 * Benchmark tasks: sine regression, noisy step regression and disk
 * classification; their test sets, evaluation grids and multi-run statistics.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "amsa/model.hpp"
#include "amsa/msa.hpp"
#include "amsa/rng.hpp"

namespace amsa {

enum class Task { sine, step, classif };

inline std::string_view task_name(Task task) {
  switch (task) {
    case Task::sine:
      return "sine";
    case Task::step:
      return "step";
    case Task::classif:
      return "classif";
  }
  return "?";
}

struct Dataset {
  Task task = Task::sine;
  std::size_t input_dim = 1;
  std::vector<Sample> samples;
  double noise_half_width = 0.0;
};

inline Eigen::VectorXd scalar_input(double x) { return Eigen::VectorXd::Constant(1, x); }

inline double step_target(double x) noexcept { return x <= 0.0 ? 0.5 : -0.5; }

inline double disk_target(double x1, double x2) noexcept { return x1 * x1 + x2 * x2 <= 0.25 ? 1.0 : 0.0; }

/// x_i = -pi + 2 pi (i-1)/(N-1), y_i = sin(x_i).
inline Dataset gen_sine(std::size_t n) {
  if (n < 2) throw std::invalid_argument("gen_sine: need at least 2 samples");
  Dataset ds{Task::sine, 1, {}, 0.0};
  ds.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = -std::numbers::pi + 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1);
    ds.samples.push_back({scalar_input(x), std::sin(x)});
  }
  return ds;
}

/// Equispaced x on [-1, 1], y = step(x) + U(-w, w) noise.
inline Dataset gen_step(std::size_t n, std::uint64_t seed, double noise_half_width = 0.2) {
  if (n < 2) throw std::invalid_argument("gen_step: need at least 2 samples");
  if (noise_half_width < 0.0) throw std::invalid_argument("gen_step: negative noise width");
  Dataset ds{Task::step, 1, {}, noise_half_width};
  ds.samples.reserve(n);
  Rng rng = make_stream(seed, {kStreamData, 0});
  for (std::size_t i = 0; i < n; ++i) {
    const double x = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
    const double noise = noise_half_width > 0.0 ? uniform(rng, -noise_half_width, noise_half_width) : 0.0;
    ds.samples.push_back({scalar_input(x), step_target(x) + noise});
  }
  return ds;
}

/// Uniform points on [-1, 1]^2 labelled by the disk of radius 0.5.
inline Dataset gen_classif(std::size_t n, std::uint64_t seed) {
  Dataset ds{Task::classif, 2, {}, 0.0};
  ds.samples.reserve(n);
  Rng rng = make_stream(seed, {kStreamData, 1});
  for (std::size_t i = 0; i < n; ++i) {
    const double x1 = uniform(rng, -1.0, 1.0);
    const double x2 = uniform(rng, -1.0, 1.0);
    Eigen::VectorXd x(2);
    x << x1, x2;
    ds.samples.push_back({std::move(x), disk_target(x1, x2)});
  }
  return ds;
}

/// Fresh uniformly random test set of size n drawn from the task's law.
inline std::vector<Sample> draw_test_set(Task task, std::size_t n, Rng& rng, double noise_half_width = 0.2) {
  std::vector<Sample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    switch (task) {
      case Task::sine: {
        const double x = uniform(rng, -std::numbers::pi, std::numbers::pi);
        out.push_back({scalar_input(x), std::sin(x)});
        break;
      }
      case Task::step: {
        const double x = uniform(rng, -1.0, 1.0);
        const double noise = noise_half_width > 0.0 ? uniform(rng, -noise_half_width, noise_half_width) : 0.0;
        out.push_back({scalar_input(x), step_target(x) + noise});
        break;
      }
      case Task::classif: {
        const double x1 = uniform(rng, -1.0, 1.0);
        const double x2 = uniform(rng, -1.0, 1.0);
        Eigen::VectorXd x(2);
        x << x1, x2;
        out.push_back({std::move(x), disk_target(x1, x2)});
        break;
      }
    }
  }
  return out;
}

inline TestSetSampler make_test_sampler(const Dataset& ds) {
  return [task = ds.task, n = ds.samples.size(), w = ds.noise_half_width](Rng& rng) {
    return draw_test_set(task, n, rng, w);
  };
}

/// Noise-free evaluation grid: 201 points for the 1-D tasks, the 32 x 32
/// uniform grid on [-1, 1]^2 for classification.
inline std::vector<Sample> prediction_grid(Task task) {
  std::vector<Sample> grid;
  auto lin = [](double lo, double hi, std::size_t k, std::size_t count) {
    return lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1);
  };
  switch (task) {
    case Task::sine:
      for (std::size_t k = 0; k < 201; ++k) {
        const double x = lin(-std::numbers::pi, std::numbers::pi, k, 201);
        grid.push_back({scalar_input(x), std::sin(x)});
      }
      break;
    case Task::step:
      for (std::size_t k = 0; k < 201; ++k) {
        const double x = lin(-1.0, 1.0, k, 201);
        grid.push_back({scalar_input(x), step_target(x)});
      }
      break;
    case Task::classif:
      for (std::size_t a = 0; a < 32; ++a) {
        for (std::size_t b = 0; b < 32; ++b) {
          Eigen::VectorXd x(2);
          x << lin(-1.0, 1.0, a, 32), lin(-1.0, 1.0, b, 32);
          const double y = disk_target(x[0], x[1]);
          grid.push_back({std::move(x), y});
        }
      }
      break;
  }
  return grid;
}

inline double evaluate_test_loss(const ControlTrajectory& control, const ProblemSpec& spec,
                                 std::span<const Sample> test_set,
                                 IntegratorKind integrator = IntegratorKind::explicit_euler) {
  if (control.width() != spec.width) throw std::invalid_argument("evaluate_test_loss: width mismatch");
  return empirical_cost(test_set, control, integrator);
}

/// Fraction of points whose filtered prediction Heaviside(g_mean - 0.5)
/// differs from the 0/1 label.
inline double mismatch_rate(const ControlTrajectory& control, const ProblemSpec& spec, std::span<const Sample> points,
                            IntegratorKind integrator = IntegratorKind::explicit_euler) {
  if (points.empty()) throw std::invalid_argument("mismatch_rate: empty point set");
  std::size_t wrong = 0;
  for (const Sample& s : points) {
    const double label = prediction_filter(predict(s.x, control, spec, OutputKind::mean, integrator));
    if (label != s.y) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(points.size());
}

// ---------------------------------------------------------------------------
// aggregation over runs

struct Envelope {
  double mean;
  double min;
  double max;
  std::size_t runs;  // runs that reached this iteration
};

struct AggregateStats {
  std::vector<Envelope> train;  // per iteration
  std::vector<Envelope> test;
  std::vector<double> min_train_loss;  // per run
  std::vector<double> test_at_best;    // per run
};

namespace detail {

inline Envelope envelope(const std::vector<double>& xs) {
  Envelope e{0.0, xs.front(), xs.front(), xs.size()};
  double sum = 0.0;
  for (const double x : xs) {
    sum += x;
    e.min = std::min(e.min, x);
    e.max = std::max(e.max, x);
  }
  e.mean = sum / static_cast<double>(xs.size());
  return e;
}

}  // namespace detail

inline AggregateStats aggregate_runs(std::span<const RunRecord> records) {
  if (records.empty()) throw std::invalid_argument("aggregate_runs: no records");
  AggregateStats stats;
  std::size_t longest = 0;
  for (const auto& r : records) {
    if (r.rows.empty()) throw std::invalid_argument("aggregate_runs: record without rows");
    longest = std::max(longest, r.rows.size());
    const RunSummary s = r.summary();
    stats.min_train_loss.push_back(s.min_train_loss);
    stats.test_at_best.push_back(s.test_loss_at_best);
  }
  std::vector<double> train;
  std::vector<double> test;
  for (std::size_t k = 0; k < longest; ++k) {
    train.clear();
    test.clear();
    for (const auto& r : records) {
      if (k < r.rows.size()) {
        train.push_back(r.rows[k].train_loss);
        test.push_back(r.rows[k].test_loss);
      }
    }
    stats.train.push_back(detail::envelope(train));
    stats.test.push_back(detail::envelope(test));
  }
  return stats;
}

inline double median(std::vector<double> xs) {
  if (xs.empty()) throw std::invalid_argument("median: empty input");
  std::sort(xs.begin(), xs.end());
  const std::size_t m = xs.size() / 2;
  return xs.size() % 2 == 1 ? xs[m] : 0.5 * (xs[m - 1] + xs[m]);
}

}  // namespace amsa
