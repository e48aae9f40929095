#pragma once

#include "spin/forecast.hpp"
#include "spin/ope.hpp"
#include "spin/policy.hpp"
#include "spin/rng.hpp"
#include "spin/wildboot.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace spin {

struct SearchConfig {
  int n_steps = 10;
  double learning_rate = 0.1;
  double entropy_coeff = 0.0;
  double alpha = 0.05;  // safety level; the search bound is taken at alpha / 2
  int replicates = 200;
  FourierBasis basis{0, 1.0};
  std::vector<Episode> horizon;  // future episodes tau
  double gamma = 0.0;
  double temperature = 1.0;
  PdisOptions pdis;

  void validate() const;
};

struct ObjectiveValue {
  double value = 0.0;  // lower bound + entropy_coeff * entropy
  Eigen::MatrixXd grad;
  double lower_bound = 0.0;
  double entropy = 0.0;
  int selected_replicate = 0;
};

/// Precomputed state for optimizing one training set: sorted trajectories,
/// the regression design and the frozen replicate coefficient rows.
/// Only the targets change with theta, so every evaluation is linear
/// algebra on cached matrices.
class SearchProblem {
 public:
  SearchProblem(std::span<const Trajectory> train, const SearchConfig& config,
                BootstrapDraws draws);

  ObjectiveValue evaluate(const Eigen::MatrixXd& theta) const;

  const std::vector<Trajectory>& train() const noexcept { return train_; }
  const BootstrapDraws& draws() const noexcept { return draws_; }
  const SearchConfig& config() const noexcept { return config_; }

 private:
  std::vector<Trajectory> train_;
  std::vector<int> visited_states_;
  SearchConfig config_;
  BootstrapDraws draws_;
  int lower_position_ = 0;
  Eigen::MatrixXd coefficients_;  // B x k
};

/// Percentile lower bound plus entropy bonus, and its gradient. The sort is
/// differentiated straight through: the gradient is that of the replicate
/// sitting at the lower order statistic.
ObjectiveValue objective_with_grad(const Eigen::MatrixXd& theta,
                                   std::span<const Trajectory> train, const SearchConfig& config,
                                   const BootstrapDraws& frozen_draws);

/// Plain gradient ascent for config.n_steps steps with the sign draws frozen
/// for the whole search, started from whichever of `starts` scores best.
/// Returns the best iterate seen (the start itself if no step improves).
Eigen::MatrixXd candidate_search(std::span<const Eigen::MatrixXd> starts,
                                 std::span<const Trajectory> train, const SearchConfig& config,
                                 Rng& rng);

/// Single-start form.
Eigen::MatrixXd candidate_search(const Eigen::MatrixXd& theta_init,
                                 std::span<const Trajectory> train, const SearchConfig& config,
                                 Rng& rng);

}  // namespace spin
