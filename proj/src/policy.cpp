#include "spin/policy.hpp"

#include "spin/errors.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace spin {

SoftmaxPolicy::SoftmaxPolicy(Eigen::MatrixXd theta, double temperature)
    : theta_(std::move(theta)), temperature_(temperature) {
  if (!(temperature_ > 0.0) || !std::isfinite(temperature_)) {
    throw DomainError("softmax temperature must be positive and finite");
  }
  if (theta_.rows() == 0 || theta_.cols() == 0) {
    throw DomainError("policy parameters must have at least one state and one action");
  }
  if (!theta_.allFinite()) throw DomainError("policy parameters must be finite");

  log_probs_.resize(theta_.rows(), theta_.cols());
  for (Eigen::Index s = 0; s < theta_.rows(); ++s) {
    const Eigen::RowVectorXd z = theta_.row(s) / temperature_;
    const double zmax = z.maxCoeff();
    // log(sum exp(z - zmax)); the max term contributes exactly 1, so log1p
    // keeps precision when the rest are tiny.
    double rest = 0.0;
    bool seen_max = false;
    for (Eigen::Index a = 0; a < z.size(); ++a) {
      if (!seen_max && z(a) == zmax) {
        seen_max = true;
        continue;
      }
      rest += std::exp(z(a) - zmax);
    }
    // Shift first so the log-sum-exp correction survives even when it is
    // far below the magnitude of zmax.
    log_probs_.row(s) = (z.array() - zmax) - std::log1p(rest);
  }
  // exp underflows for gaps beyond ~745 nats; the floor keeps every action
  // reachable, matching the softmax's full support.
  probs_.resize(theta_.rows(), theta_.cols());
  for (Eigen::Index i = 0; i < log_probs_.size(); ++i) {
    probs_.data()[i] = std::max(std::exp(log_probs_.data()[i]), std::numeric_limits<double>::min());
  }
}

SoftmaxPolicy SoftmaxPolicy::uniform(int n_states, int n_actions) {
  return SoftmaxPolicy(Eigen::MatrixXd::Zero(n_states, n_actions));
}

SoftmaxPolicy SoftmaxPolicy::from_probabilities(const Eigen::MatrixXd& probs,
                                                double temperature) {
  if ((probs.array() <= 0.0).any()) {
    throw DomainError("target probabilities must be strictly positive");
  }
  for (Eigen::Index s = 0; s < probs.rows(); ++s) {
    if (std::abs(probs.row(s).sum() - 1.0) > 1e-9) {
      throw DomainError("target probabilities must sum to one per state");
    }
  }
  return SoftmaxPolicy(probs.array().log().matrix() * temperature, temperature);
}

Eigen::MatrixXd SoftmaxPolicy::grad_log_prob(int s, int a) const {
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(theta_.rows(), theta_.cols());
  accumulate_grad_log_prob(s, a, 1.0, grad);
  return grad;
}

void SoftmaxPolicy::accumulate_grad_log_prob(int s, int a, double scale,
                                             Eigen::MatrixXd& grad) const {
  const double k = scale / temperature_;
  grad.row(s) -= k * probs_.row(s);
  grad(s, a) += k;
}

ValueAndGrad entropy(const SoftmaxPolicy& policy, std::span<const int> states) {
  if (states.empty()) throw DomainError("entropy needs a non-empty multiset of states");

  std::vector<int> counts(static_cast<std::size_t>(policy.n_states()), 0);
  for (int s : states) {
    if (s < 0 || s >= policy.n_states()) throw DomainError("state index out of range");
    ++counts[static_cast<std::size_t>(s)];
  }

  const double inv_n = 1.0 / static_cast<double>(states.size());
  const double inv_t = 1.0 / policy.temperature();
  ValueAndGrad out{0.0, Eigen::MatrixXd::Zero(policy.n_states(), policy.n_actions())};
  for (int s = 0; s < policy.n_states(); ++s) {
    if (counts[static_cast<std::size_t>(s)] == 0) continue;
    const double w = counts[static_cast<std::size_t>(s)] * inv_n;
    double h = 0.0;
    for (int a = 0; a < policy.n_actions(); ++a) {
      h -= policy.action_prob(s, a) * policy.log_prob(s, a);
    }
    out.value += w * h;
    // dH/dtheta[s,b] = -pi(b|s) (log pi(b|s) + H) / T
    for (int b = 0; b < policy.n_actions(); ++b) {
      out.grad(s, b) -= w * inv_t * policy.action_prob(s, b) * (policy.log_prob(s, b) + h);
    }
  }
  return out;
}

void write_theta_csv(std::ostream& out, const Eigen::MatrixXd& theta) {
  std::ostringstream buf;
  buf << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index r = 0; r < theta.rows(); ++r) {
    for (Eigen::Index c = 0; c < theta.cols(); ++c) {
      if (c > 0) buf << ',';
      buf << theta(r, c);
    }
    buf << '\n';
  }
  out << buf.str();
}

Eigen::MatrixXd read_theta_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw DomainError("malformed theta CSV cell '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw DomainError("ragged theta CSV");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DomainError("empty theta CSV");
  Eigen::MatrixXd theta(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      theta(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return theta;
}

}  // namespace spin
