#include "spin/ope.hpp"

#include "spin/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace spin {

namespace {

// Shared by every pdis entry point so all produce the same value bits.
// With `grad` set, adds scale * d(value)/d(theta) to it.
double pdis_impl(const Trajectory& traj, const SoftmaxPolicy& policy, double gamma,
                 const PdisOptions& options, Eigen::MatrixXd* grad, double scale = 1.0) {
  const std::size_t n = traj.steps.size();
  thread_local std::vector<double> contrib;
  thread_local std::vector<char> capped;
  if (grad) {
    contrib.assign(n, 0.0);
    capped.assign(n, 0);
  }

  double value = 0.0;
  double log_w = 0.0;
  double disc = 1.0;
  for (std::size_t t = 0; t < n; ++t) {
    const Step& st = traj.steps[t];
    if (!(st.behavior_prob >= kMinBehaviorProb) || st.behavior_prob > 1.0) {
      throw FullSupportError("behavior probability " + std::to_string(st.behavior_prob) +
                             " at episode " + std::to_string(traj.episode) +
                             " is outside [1e-8, 1]");
    }
    if (st.state < 0 || st.state >= policy.n_states() || st.action < 0 ||
        st.action >= policy.n_actions()) {
      throw DomainError("trajectory step indexes outside the policy table");
    }
    log_w += policy.log_prob(st.state, st.action) - std::log(st.behavior_prob);
    double w = std::exp(log_w);
    if (options.weight_cap && w > *options.weight_cap) {
      w = *options.weight_cap;
      if (grad) capped[t] = 1;
    }
    const double c = disc * st.reward * w;
    value += c;
    if (grad) contrib[t] = c;
    disc *= gamma;
  }

  if (grad) {
    // d/dtheta of the step-t term is c_t * sum_{l<=t} grad log pi_l, so
    // step l's score is weighted by the suffix sum of uncapped terms.
    double suffix = 0.0;
    for (std::size_t t = n; t-- > 0;) {
      if (!capped[t]) suffix += contrib[t];
      const Step& st = traj.steps[t];
      if (suffix != 0.0) {
        policy.accumulate_grad_log_prob(st.state, st.action, scale * suffix, *grad);
      }
    }
  }
  return value;
}

}  // namespace

double pdis(const Trajectory& traj, const SoftmaxPolicy& policy, double gamma,
            const PdisOptions& options) {
  return pdis_impl(traj, policy, gamma, options, nullptr);
}

ValueAndGrad pdis_with_grad(const Trajectory& traj, const SoftmaxPolicy& policy, double gamma,
                            const PdisOptions& options) {
  ValueAndGrad out;
  out.grad = Eigen::MatrixXd::Zero(policy.n_states(), policy.n_actions());
  out.value = pdis_impl(traj, policy, gamma, options, &out.grad);
  return out;
}

double pdis_accumulate_grad(const Trajectory& traj, const SoftmaxPolicy& policy, double gamma,
                            const PdisOptions& options, double scale, Eigen::MatrixXd& grad) {
  if (grad.rows() != policy.n_states() || grad.cols() != policy.n_actions()) {
    throw DomainError("gradient accumulator does not match the policy shape");
  }
  return pdis_impl(traj, policy, gamma, options, &grad, scale);
}

void PerformanceSeries::validate() const {
  if (static_cast<Eigen::Index>(episodes.size()) != estimates.size()) {
    throw DomainError("performance series has mismatched lengths");
  }
  for (std::size_t i = 1; i < episodes.size(); ++i) {
    if (episodes[i] <= episodes[i - 1]) {
      throw DomainError("performance series episodes must be strictly increasing");
    }
  }
}

std::vector<std::size_t> episode_order(std::span<const Trajectory> data) {
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto earlier = [&](std::size_t a, std::size_t b) { return data[a].episode < data[b].episode; };
  if (!std::is_sorted(order.begin(), order.end(), earlier)) {
    std::stable_sort(order.begin(), order.end(), earlier);
  }
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (data[order[i]].episode == data[order[i - 1]].episode) {
      throw DomainError("duplicate episode index " + std::to_string(data[order[i]].episode));
    }
  }
  return order;
}

std::vector<Trajectory> sorted_by_episode(std::span<const Trajectory> data) {
  std::vector<Trajectory> out;
  out.reserve(data.size());
  for (const std::size_t i : episode_order(data)) out.push_back(data[i]);
  return out;
}

PerformanceSeries performance_series(std::span<const Trajectory> data,
                                     const SoftmaxPolicy& policy, double gamma,
                                     const PdisOptions& options) {
  const auto order = episode_order(data);
  PerformanceSeries series;
  series.episodes.reserve(order.size());
  series.estimates.resize(static_cast<Eigen::Index>(order.size()));
  for (std::size_t i = 0; i < order.size(); ++i) {
    const Trajectory& t = data[order[i]];
    series.episodes.push_back(t.episode);
    series.estimates(static_cast<Eigen::Index>(i)) = pdis(t, policy, gamma, options);
  }
  return series;
}

SeriesWithGrad performance_series_with_grad(std::span<const Trajectory> data,
                                            const SoftmaxPolicy& policy, double gamma,
                                            const PdisOptions& options) {
  const auto order = episode_order(data);
  SeriesWithGrad out;
  out.series.episodes.reserve(order.size());
  out.series.estimates.resize(static_cast<Eigen::Index>(order.size()));
  out.grads.reserve(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const Trajectory& t = data[order[i]];
    auto vg = pdis_with_grad(t, policy, gamma, options);
    out.series.episodes.push_back(t.episode);
    out.series.estimates(static_cast<Eigen::Index>(i)) = vg.value;
    out.grads.push_back(std::move(vg.grad));
  }
  return out;
}

}  // namespace spin
