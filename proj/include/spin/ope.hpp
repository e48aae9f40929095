#pragma once

#include "spin/envsim.hpp"
#include "spin/policy.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

namespace spin {

/// Smallest logged behavior probability accepted by the estimators.
inline constexpr double kMinBehaviorProb = 1e-8;

struct PdisOptions {
  /// Upper bound on each cumulative importance weight. Off by default;
  /// any cap makes the estimator biased.
  std::optional<double> weight_cap;
};

/// Per-decision importance sampling estimate of the evaluation policy's
/// discounted return from one trajectory:
///   sum_t gamma^t r_t prod_{l<=t} pi(a_l|s_l) / beta_l.
/// Throws FullSupportError if a behavior probability is below kMinBehaviorProb.
double pdis(const Trajectory& traj, const SoftmaxPolicy& policy, double gamma,
            const PdisOptions& options = {});

/// pdis together with its gradient over theta. The value is bit-identical to
/// pdis().
ValueAndGrad pdis_with_grad(const Trajectory& traj, const SoftmaxPolicy& policy, double gamma,
                            const PdisOptions& options = {});

/// grad += scale * d pdis / d theta; returns the pdis value.
double pdis_accumulate_grad(const Trajectory& traj, const SoftmaxPolicy& policy, double gamma,
                            const PdisOptions& options, double scale, Eigen::MatrixXd& grad);

/// Counterfactual performance estimates Y at episodes X (strictly increasing).
struct PerformanceSeries {
  std::vector<Episode> episodes;
  Eigen::VectorXd estimates;

  std::size_t size() const noexcept { return episodes.size(); }
  void validate() const;
};

/// Estimates of every trajectory's performance under `policy`, ordered by
/// episode.
PerformanceSeries performance_series(std::span<const Trajectory> data,
                                     const SoftmaxPolicy& policy, double gamma,
                                     const PdisOptions& options = {});

/// Series plus per-entry gradients (same order as `series`).
struct SeriesWithGrad {
  PerformanceSeries series;
  std::vector<Eigen::MatrixXd> grads;
};

SeriesWithGrad performance_series_with_grad(std::span<const Trajectory> data,
                                            const SoftmaxPolicy& policy, double gamma,
                                            const PdisOptions& options = {});

/// Indices of `data` in episode order; rejects duplicate episode indices.
std::vector<std::size_t> episode_order(std::span<const Trajectory> data);

/// Sorts by episode and rejects duplicate episode indices.
std::vector<Trajectory> sorted_by_episode(std::span<const Trajectory> data);

}  // namespace spin
