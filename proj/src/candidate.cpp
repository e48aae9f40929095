#include "spin/candidate.hpp"

#include "spin/errors.hpp"

#include <string>

namespace spin {

void SearchConfig::validate() const {
  if (n_steps < 1) throw DomainError("candidate search needs at least one gradient step");
  if (!(learning_rate >= 0.0)) throw DomainError("learning rate must be non-negative");
  if (!(entropy_coeff >= 0.0)) throw DomainError("entropy coefficient must be non-negative");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  if (replicates < 1) throw DomainError("need at least one bootstrap replicate");
  if (horizon.empty()) throw DomainError("search horizon is empty");
}

SearchProblem::SearchProblem(std::span<const Trajectory> train, const SearchConfig& config,
                             BootstrapDraws draws)
    : train_(sorted_by_episode(train)), config_(config), draws_(std::move(draws)) {
  if (train_.empty()) throw DomainError("candidate search needs training data");
  if (draws_.length() != static_cast<int>(train_.size())) {
    throw DomainError("frozen draws have length " + std::to_string(draws_.length()) +
                      ", training set has " + std::to_string(train_.size()));
  }
  const double search_alpha = config_.alpha / 2.0;
  if (static_cast<double>(draws_.replicates()) * search_alpha < 2.0 - 1e-12) {
    throw DomainError("need B >= 2/alpha replicates for the search bound");
  }
  for (const auto& t : train_) {
    for (const auto& st : t.steps) visited_states_.push_back(st.state);
  }

  PerformanceSeries design_only;
  for (const auto& t : train_) design_only.episodes.push_back(t.episode);
  design_only.estimates = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(train_.size()));
  const RegressionFit f = fit(config_.basis, design_only);
  const Eigen::RowVectorXd c = forecast_weights(f, config_.basis, config_.horizon);
  coefficients_ = LinearReplicates(f, c, draws_).coefficients();
  lower_position_ = order_positions(search_alpha, draws_.replicates()).lower;
}

ObjectiveValue SearchProblem::evaluate(const Eigen::MatrixXd& theta) const {
  const SoftmaxPolicy policy(theta, config_.temperature);
  const auto k = static_cast<Eigen::Index>(train_.size());
  Eigen::VectorXd estimates(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    estimates(i) = pdis(train_[static_cast<std::size_t>(i)], policy, config_.gamma, config_.pdis);
  }

  const Eigen::VectorXd rho_star = coefficients_ * estimates;
  const auto order = stable_order(rho_star);
  const int sel = order[static_cast<std::size_t>(lower_position_)];

  // Straight through the sort: only the selected replicate's row carries
  // gradient, and it is linear in the per-episode estimates.
  ObjectiveValue out;
  out.selected_replicate = sel;
  out.lower_bound = rho_star(sel);
  out.grad = Eigen::MatrixXd::Zero(theta.rows(), theta.cols());
  for (Eigen::Index i = 0; i < k; ++i) {
    pdis_accumulate_grad(train_[static_cast<std::size_t>(i)], policy, config_.gamma, config_.pdis,
                         coefficients_(sel, i), out.grad);
  }
  out.value = out.lower_bound;
  if (!visited_states_.empty()) {
    const ValueAndGrad h = entropy(policy, visited_states_);
    out.entropy = h.value;
    out.value += config_.entropy_coeff * h.value;
    out.grad += config_.entropy_coeff * h.grad;
  }
  return out;
}

ObjectiveValue objective_with_grad(const Eigen::MatrixXd& theta,
                                   std::span<const Trajectory> train, const SearchConfig& config,
                                   const BootstrapDraws& frozen_draws) {
  return SearchProblem(train, config, frozen_draws).evaluate(theta);
}

Eigen::MatrixXd candidate_search(std::span<const Eigen::MatrixXd> starts,
                                 std::span<const Trajectory> train, const SearchConfig& config,
                                 Rng& rng) {
  config.validate();
  if (starts.empty()) throw DomainError("candidate search needs a starting point");
  BootstrapDraws draws = draw_rademacher(rng, config.replicates, static_cast<int>(train.size()));
  const SearchProblem problem(train, config, std::move(draws));

  // Ascend from the best start and keep the best iterate seen.
  Eigen::MatrixXd theta;
  ObjectiveValue current;
  for (const auto& start : starts) {
    ObjectiveValue v = problem.evaluate(start);
    if (theta.size() == 0 || v.value > current.value) {
      theta = start;
      current = std::move(v);
    }
  }
  Eigen::MatrixXd best = theta;
  double best_value = current.value;
  for (int step = 0; step < config.n_steps; ++step) {
    theta += config.learning_rate * current.grad;
    current = problem.evaluate(theta);
    if (current.value > best_value) {
      best_value = current.value;
      best = theta;
    }
  }
  return best;
}

Eigen::MatrixXd candidate_search(const Eigen::MatrixXd& theta_init,
                                 std::span<const Trajectory> train, const SearchConfig& config,
                                 Rng& rng) {
  return candidate_search(std::span<const Eigen::MatrixXd>(&theta_init, 1), train, config, rng);
}

}  // namespace spin
