#include "spin/envsim.hpp"

#include "spin/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace spin {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_policy_shape(const SoftmaxPolicy& policy, int n_states, int n_actions) {
  if (policy.n_states() != n_states || policy.n_actions() != n_actions) {
    throw DomainError("policy shape " + std::to_string(policy.n_states()) + "x" +
                      std::to_string(policy.n_actions()) + " does not match environment " +
                      std::to_string(n_states) + "x" + std::to_string(n_actions));
  }
}

void check_full_support(const SoftmaxPolicy& policy) {
  if ((policy.prob_matrix().array() <= 0.0).any()) {
    throw FullSupportError("acting policy assigns zero probability to some action");
  }
}

int sample_action(const SoftmaxPolicy& policy, int s, Rng& rng) {
  const Eigen::RowVectorXd row = policy.prob_matrix().row(s);
  return static_cast<int>(
      rng.categorical(std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))));
}

Trajectory rollout_tabular(const TabularNSMDP& env, const SoftmaxPolicy& policy, Episode k,
                           Rng& rng) {
  Trajectory traj;
  traj.episode = k;
  traj.steps.reserve(static_cast<std::size_t>(env.horizon));
  int s = static_cast<int>(rng.categorical(env.start_dist));
  for (int t = 0; t < env.horizon; ++t) {
    const int a = sample_action(policy, s, rng);
    double r = 0.0;
    if (env.reward_sampler) {
      r = env.reward_sampler(k, s, a, rng);
    } else {
      r = env.mean_reward(k, s, a);
      if (env.noise_half_width > 0.0) r += rng.uniform(-env.noise_half_width, env.noise_half_width);
    }
    traj.steps.push_back({s, a, policy.action_prob(s, a), r});
    if (t + 1 < env.horizon) {
      const std::vector<double> next = env.transition(k, s, a);
      s = static_cast<int>(rng.categorical(next));
    }
  }
  return traj;
}

Trajectory rollout_reco(const SeasonalRecoSys& env, const SoftmaxPolicy& policy, Episode k,
                        Rng& rng) {
  Trajectory traj;
  traj.episode = k;
  const int a = sample_action(policy, 0, rng);
  double r = env.mean_reward(a, k);
  if (env.noise_scale > 0.0) r += rng.uniform(-env.noise_scale, env.noise_scale);
  traj.steps.push_back({0, a, policy.action_prob(0, a), r});
  return traj;
}

Trajectory rollout_sim(const SimulatorEnv& env, const SoftmaxPolicy& policy, Episode k, Rng& rng) {
  Trajectory traj;
  traj.episode = k;
  int s = env.reset(k, rng);
  for (int t = 0; t < env.horizon; ++t) {
    const int a = sample_action(policy, s, rng);
    const StepOutcome out = env.step(k, s, a, rng);
    traj.steps.push_back({s, a, policy.action_prob(s, a), out.reward});
    if (out.done) break;
    s = out.next_state;
  }
  return traj;
}

// Backward induction over the horizon. Without a policy the action value is
// maximized instead of averaged under the policy.
double tabular_value(const TabularNSMDP& env, const SoftmaxPolicy* policy, Episode k) {
  const auto ns = static_cast<std::size_t>(env.n_states);
  std::vector<double> next(ns, 0.0);
  std::vector<double> cur(ns, 0.0);
  // Transition and reward tables for episode k are fixed across t.
  std::vector<std::vector<double>> p(ns * static_cast<std::size_t>(env.n_actions));
  std::vector<double> r(ns * static_cast<std::size_t>(env.n_actions));
  for (int s = 0; s < env.n_states; ++s) {
    for (int a = 0; a < env.n_actions; ++a) {
      const std::size_t idx = static_cast<std::size_t>(s * env.n_actions + a);
      p[idx] = env.transition(k, s, a);
      r[idx] = env.mean_reward(k, s, a);
    }
  }
  for (int t = env.horizon - 1; t >= 0; --t) {
    for (int s = 0; s < env.n_states; ++s) {
      double v = policy ? 0.0 : -std::numeric_limits<double>::infinity();
      for (int a = 0; a < env.n_actions; ++a) {
        const std::size_t idx = static_cast<std::size_t>(s * env.n_actions + a);
        double q = r[idx];
        if (t + 1 < env.horizon) {
          double cont = 0.0;
          for (std::size_t s2 = 0; s2 < ns; ++s2) cont += p[idx][s2] * next[s2];
          q += env.gamma * cont;
        }
        if (policy) {
          v += policy->action_prob(s, a) * q;
        } else {
          v = std::max(v, q);
        }
      }
      cur[static_cast<std::size_t>(s)] = v;
    }
    std::swap(cur, next);
  }
  double rho = 0.0;
  for (std::size_t s = 0; s < ns; ++s) rho += env.start_dist[s] * next[s];
  return rho;
}

}  // namespace

std::vector<int> Trajectory::states() const {
  std::vector<int> out;
  out.reserve(steps.size());
  for (const auto& st : steps) out.push_back(st.state);
  return out;
}

double Trajectory::discounted_return(double gamma) const {
  double g = 0.0;
  double disc = 1.0;
  for (const auto& st : steps) {
    g += disc * st.reward;
    disc *= gamma;
  }
  return g;
}

void TabularNSMDP::validate(Episode k) const {
  if (n_states < 1 || n_actions < 1) throw DomainError("MDP needs at least one state and action");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw DomainError("gamma must lie in [0, 1)");
  if (!(r_max > 0.0)) throw DomainError("r_max must be positive");
  if (horizon < 1) throw DomainError("horizon must be at least 1");
  if (start_dist.size() != static_cast<std::size_t>(n_states)) {
    throw DomainError("start distribution has wrong length");
  }
  auto check_simplex = [&](const std::vector<double>& p, const char* what) {
    if (p.size() != static_cast<std::size_t>(n_states)) {
      throw DomainError(std::string(what) + " has wrong length");
    }
    double sum = 0.0;
    for (double x : p) {
      if (x < 0.0) throw DomainError(std::string(what) + " has a negative entry");
      sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw DomainError(std::string(what) + " does not sum to 1");
  };
  check_simplex(start_dist, "start distribution");
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      check_simplex(transition(k, s, a), "transition vector");
      if (std::abs(mean_reward(k, s, a)) > r_max) {
        throw DomainError("mean reward exceeds r_max");
      }
    }
  }
}

double SeasonalRecoSys::mean_reward(int item, Episode k) const {
  const auto j = static_cast<std::size_t>(item);
  const double arg = 2.0 * std::numbers::pi * speed * static_cast<double>(k) / season_length;
  return base_reward[j] + amplitude[j] * (std::sin(arg + phase[j]) - std::sin(phase[j]));
}

std::vector<double> SeasonalRecoSys::mean_rewards(Episode k) const {
  std::vector<double> out(base_reward.size());
  for (int j = 0; j < n_items(); ++j) out[static_cast<std::size_t>(j)] = mean_reward(j, k);
  return out;
}

void SeasonalRecoSys::validate() const {
  if (base_reward.empty()) throw DomainError("recommender needs at least one item");
  if (amplitude.size() != base_reward.size() || phase.size() != base_reward.size()) {
    throw DomainError("recommender item vectors differ in length");
  }
  if (speed < 0) throw DomainError("speed must be non-negative");
  if (!(season_length > 0.0)) throw DomainError("season length must be positive");
  if (noise_scale < 0.0) throw DomainError("noise scale must be non-negative");
}

int env_states(const Environment& env) {
  return std::visit(Overloaded{[](const TabularNSMDP& e) { return e.n_states; },
                               [](const SeasonalRecoSys&) { return 1; },
                               [](const SimulatorEnv& e) { return e.n_states; }},
                    env);
}

int env_actions(const Environment& env) {
  return std::visit(Overloaded{[](const TabularNSMDP& e) { return e.n_actions; },
                               [](const SeasonalRecoSys& e) { return e.n_items(); },
                               [](const SimulatorEnv& e) { return e.n_actions; }},
                    env);
}

double env_gamma(const Environment& env) {
  return std::visit(Overloaded{[](const TabularNSMDP& e) { return e.gamma; },
                               [](const SeasonalRecoSys&) { return 0.0; },
                               [](const SimulatorEnv& e) { return e.gamma; }},
                    env);
}

bool has_oracle(const Environment& env) { return !std::holds_alternative<SimulatorEnv>(env); }

Trajectory rollout(const Environment& env, const SoftmaxPolicy& policy, Episode k, Rng& rng) {
  check_policy_shape(policy, env_states(env), env_actions(env));
  check_full_support(policy);
  return std::visit(
      Overloaded{[&](const TabularNSMDP& e) { return rollout_tabular(e, policy, k, rng); },
                 [&](const SeasonalRecoSys& e) { return rollout_reco(e, policy, k, rng); },
                 [&](const SimulatorEnv& e) { return rollout_sim(e, policy, k, rng); }},
      env);
}

double true_performance(const Environment& env, const SoftmaxPolicy& policy, Episode k) {
  check_policy_shape(policy, env_states(env), env_actions(env));
  return std::visit(
      Overloaded{[&](const TabularNSMDP& e) { return tabular_value(e, &policy, k); },
                 [&](const SeasonalRecoSys& e) {
                   double rho = 0.0;
                   for (int j = 0; j < e.n_items(); ++j) {
                     rho += policy.action_prob(0, j) * e.mean_reward(j, k);
                   }
                   return rho;
                 },
                 [](const SimulatorEnv&) -> double {
                   throw UnsupportedOracleError("simulator environments have no exact oracle");
                 }},
      env);
}

double optimal_performance(const Environment& env, Episode k) {
  return std::visit(
      Overloaded{[&](const TabularNSMDP& e) { return tabular_value(e, nullptr, k); },
                 [&](const SeasonalRecoSys& e) {
                   const auto r = e.mean_rewards(k);
                   return *std::max_element(r.begin(), r.end());
                 },
                 [](const SimulatorEnv&) -> double {
                   throw UnsupportedOracleError("simulator environments have no exact oracle");
                 }},
      env);
}

double lipschitz_bound(double gamma, double r_max, double eps_p, double eps_r, double delta) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw DomainError("gamma must lie in [0, 1)");
  if (r_max < 0.0 || eps_p < 0.0 || eps_r < 0.0) {
    throw DomainError("r_max and drift constants must be non-negative");
  }
  if (delta < 1.0) throw DomainError("delta must be at least 1");
  const double one_minus = 1.0 - gamma;
  return delta * (gamma * r_max * eps_p / (one_minus * one_minus) + eps_r / one_minus);
}

DriftConstants drift_constants(const TabularNSMDP& env, Episode k) {
  DriftConstants d;
  for (int s = 0; s < env.n_states; ++s) {
    for (int a = 0; a < env.n_actions; ++a) {
      const auto p0 = env.transition(k, s, a);
      const auto p1 = env.transition(k + 1, s, a);
      double l1 = 0.0;
      for (std::size_t i = 0; i < p0.size(); ++i) l1 += std::abs(p0[i] - p1[i]);
      d.eps_p = std::max(d.eps_p, l1);
      d.eps_r = std::max(d.eps_r, std::abs(env.mean_reward(k, s, a) - env.mean_reward(k + 1, s, a)));
    }
  }
  return d;
}

TabularNSMDP two_state_drop_env() {
  TabularNSMDP env;
  env.n_states = 2;
  env.n_actions = 1;
  env.gamma = 0.0;
  env.r_max = 1.0;
  env.horizon = 2;
  env.start_dist = {1.0, 0.0};
  env.transition = [](Episode k, int s, int) -> std::vector<double> {
    if (s == 1) return {0.0, 1.0};
    if (k <= 1) return {0.0, 1.0};
    return {0.1, 0.9};
  };
  env.mean_reward = [](Episode k, int s, int) {
    if (s == 1) return 0.0;
    return k <= 1 ? 1.0 : 0.8;
  };
  env.reward_sampler = [](Episode k, int s, int, Rng& rng) {
    if (s == 1) return 0.0;
    if (k <= 1) return 1.0;
    return rng.uniform() < 0.9 ? 1.0 : -1.0;
  };
  return env;
}

TabularNSMDP make_drifting_tabular(int n_states, int n_actions, int horizon, double gamma,
                                   double drift, std::uint64_t seed) {
  Rng rng(seed);
  const auto n_sa = static_cast<std::size_t>(n_states * n_actions);
  const auto ns = static_cast<std::size_t>(n_states);
  std::vector<double> logits(n_sa * ns), logit_phase(n_sa * ns);
  std::vector<double> base(n_sa), reward_phase(n_sa);
  for (auto& x : logits) x = rng.uniform(-1.5, 1.5);
  for (auto& x : logit_phase) x = rng.uniform(0.0, 2.0 * std::numbers::pi);
  for (auto& x : base) x = rng.uniform(-1.0, 1.0);
  for (auto& x : reward_phase) x = rng.uniform(0.0, 2.0 * std::numbers::pi);

  TabularNSMDP env;
  env.n_states = n_states;
  env.n_actions = n_actions;
  env.gamma = gamma;
  env.r_max = 1.0;
  env.horizon = horizon;
  env.noise_half_width = 0.05;
  env.start_dist.assign(ns, 0.0);
  double z = 0.0;
  for (auto& x : env.start_dist) {
    x = rng.uniform(0.2, 1.0);
    z += x;
  }
  for (auto& x : env.start_dist) x /= z;

  env.transition = [=](Episode k, int s, int a) {
    const std::size_t off = static_cast<std::size_t>(s * n_actions + a) * ns;
    std::vector<double> p(ns);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ns; ++i) {
      p[i] = logits[off + i] + std::sin(drift * static_cast<double>(k) + logit_phase[off + i]);
      mx = std::max(mx, p[i]);
    }
    double sum = 0.0;
    for (auto& x : p) {
      x = std::exp(x - mx);
      sum += x;
    }
    for (auto& x : p) x /= sum;
    return p;
  };
  env.mean_reward = [=](Episode k, int s, int a) {
    const auto i = static_cast<std::size_t>(s * n_actions + a);
    return 0.5 * (base[i] + std::sin(drift * static_cast<double>(k) + reward_phase[i]));
  };
  return env;
}

}  // namespace spin
