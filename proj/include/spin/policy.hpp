#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <span>

namespace spin {

/// A scalar together with its gradient over a policy parameter matrix.
struct ValueAndGrad {
  double value = 0.0;
  Eigen::MatrixXd grad;
};

/// Tabular softmax policy, pi(a|s) = exp(theta[s,a]/T) / sum_b exp(theta[s,b]/T).
///
/// Immutable once built. Log-probabilities are computed at construction
/// with a row-max shift and log-sum-exp, so every probability is finite
/// and strictly positive for finite theta.
class SoftmaxPolicy {
 public:
  explicit SoftmaxPolicy(Eigen::MatrixXd theta, double temperature = 1.0);

  static SoftmaxPolicy uniform(int n_states, int n_actions);

  /// Policy whose probabilities reproduce `probs` (rows must be positive
  /// and sum to one).
  static SoftmaxPolicy from_probabilities(const Eigen::MatrixXd& probs,
                                          double temperature = 1.0);

  int n_states() const noexcept { return static_cast<int>(theta_.rows()); }
  int n_actions() const noexcept { return static_cast<int>(theta_.cols()); }
  const Eigen::MatrixXd& theta() const noexcept { return theta_; }
  double temperature() const noexcept { return temperature_; }

  double action_prob(int s, int a) const { return probs_(s, a); }
  double log_prob(int s, int a) const { return log_probs_(s, a); }
  Eigen::VectorXd probs(int s) const { return probs_.row(s).transpose(); }
  const Eigen::MatrixXd& prob_matrix() const noexcept { return probs_; }

  /// d log pi(a|s) / d theta; only row s is non-zero.
  Eigen::MatrixXd grad_log_prob(int s, int a) const;

  /// grad += scale * d log pi(a|s) / d theta, touching row s only.
  void accumulate_grad_log_prob(int s, int a, double scale,
                                Eigen::MatrixXd& grad) const;

 private:
  Eigen::MatrixXd theta_;
  double temperature_;
  Eigen::MatrixXd log_probs_;
  Eigen::MatrixXd probs_;
};

/// Mean Shannon entropy of pi(.|s) over a multiset of states, with its exact
/// gradient. Throws DomainError on an empty multiset.
ValueAndGrad entropy(const SoftmaxPolicy& policy, std::span<const int> states);

/// Comma-separated matrix, one row per line, round-trip exact.
void write_theta_csv(std::ostream& out, const Eigen::MatrixXd& theta);
Eigen::MatrixXd read_theta_csv(std::istream& in);

}  // namespace spin
