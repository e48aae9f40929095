#include "spin/errors.hpp"
#include "spin/harness.hpp"

#include <cmath>
#include <numbers>

namespace spin {

namespace {

// Two headline items swap places over a season; the rest are low-interest
// fillers with a small seasonal wobble.
constexpr double kHeadlineBase = 0.5;
constexpr double kHeadlineAmplitude = 0.45;
constexpr double kFillerBase = 0.15;
constexpr double kFillerAmplitude = 0.05;

// Myopic preference for high immediate reward in the first episode.
Eigen::MatrixXd tabular_safe_theta(const TabularNSMDP& env) {
  Eigen::MatrixXd theta(env.n_states, env.n_actions);
  for (int s = 0; s < env.n_states; ++s) {
    for (int a = 0; a < env.n_actions; ++a) theta(s, a) = 2.0 * env.mean_reward(1, s, a);
  }
  return theta;
}

}  // namespace

SeasonalRecoSys make_recosys(int n_items, int speed, double season_length, double noise_scale) {
  if (n_items < 2) throw DomainError("recommender needs at least two items");
  SeasonalRecoSys env;
  env.speed = speed;
  env.season_length = season_length;
  env.noise_scale = noise_scale;
  const double pi = std::numbers::pi;
  env.amplitude = {kHeadlineAmplitude, kHeadlineAmplitude};
  env.phase = {pi / 2.0, 3.0 * pi / 2.0};
  const int fillers = n_items - 2;
  for (int j = 0; j < fillers; ++j) {
    env.amplitude.push_back(kFillerAmplitude);
    env.phase.push_back(2.0 * pi * j / fillers);
  }
  // base_reward is the episode-0 value, where the cycle sits at its phase.
  for (int j = 0; j < n_items; ++j) {
    const double centre = j < 2 ? kHeadlineBase : kFillerBase;
    const auto i = static_cast<std::size_t>(j);
    env.base_reward.push_back(centre + env.amplitude[i] * std::sin(env.phase[i]));
  }
  env.validate();
  return env;
}

Experiment build_experiment(const ExperimentConfig& config) {
  switch (config.domain) {
    case Domain::RecoSys: {
      SeasonalRecoSys env =
          make_recosys(config.n_items, config.speed, config.season_length, config.noise_scale);
      // Recommend items in proportion to their first-episode appeal.
      Eigen::MatrixXd theta(1, env.n_items());
      for (int j = 0; j < env.n_items(); ++j) theta(0, j) = std::log(env.mean_reward(j, 1));
      return {Environment(std::move(env)), theta};
    }
    case Domain::Tabular: {
      TabularNSMDP env = make_drifting_tabular(config.n_states, config.n_actions, config.horizon,
                                               config.gamma, config.drift_rate * config.speed,
                                               config.seed ^ 0x7ab1eULL);
      Eigen::MatrixXd theta = tabular_safe_theta(env);
      return {Environment(std::move(env)), theta};
    }
    case Domain::TwoState: {
      TabularNSMDP env = two_state_drop_env();
      Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(env.n_states, env.n_actions);
      return {Environment(std::move(env)), theta};
    }
  }
  throw ConfigError("domain", "unhandled domain");
}

DeploymentLog run_algorithm(const ExperimentConfig& config, const Experiment& experiment,
                            const EpisodeSink& sink) {
  const RunConfig run = config.run_config();
  const Rng rng(config.seed);
  if (config.algorithm == Algorithm::Spin) {
    return spin_run(experiment.env, experiment.safe_theta, run, rng, sink);
  }
  return baseline_run(experiment.env, experiment.safe_theta, run, rng, sink);
}

double evaluate_safety(const DeploymentLog& log, const Environment& env) {
  if (!has_oracle(env)) throw UnsupportedOracleError("safety evaluation needs an exact oracle");
  if (log.decisions.empty()) return 0.0;
  if (log.policies.empty()) throw DomainError("log has no safe policy");
  const SoftmaxPolicy safe(log.policies.front(), log.temperature);
  int unsafe = 0;
  for (const auto& d : log.decisions) {
    if (!d.passed || d.deployed_policy_id == 0) continue;
    const auto id = static_cast<std::size_t>(d.deployed_policy_id);
    if (id >= log.policies.size()) throw DomainError("decision refers to an unknown policy");
    const SoftmaxPolicy candidate(log.policies[id], log.temperature);
    double perf_candidate = 0.0;
    double perf_safe = 0.0;
    int n = 0;
    for (const auto& e : log.episodes) {
      if (e.episode <= d.k || e.episode > d.k + log.delta || e.policy_id != d.deployed_policy_id) {
        continue;
      }
      perf_candidate += true_performance(env, candidate, e.episode);
      perf_safe += true_performance(env, safe, e.episode);
      ++n;
    }
    if (n > 0 && perf_candidate < perf_safe) ++unsafe;
  }
  return static_cast<double>(unsafe) / static_cast<double>(log.decisions.size());
}

double deploy_rate(const DeploymentLog& log) {
  if (log.decisions.empty()) return 0.0;
  int passed = 0;
  for (const auto& d : log.decisions) passed += d.passed ? 1 : 0;
  return static_cast<double>(passed) / static_cast<double>(log.decisions.size());
}

double normalized_improvement(const DeploymentLog& log, const Environment& env) {
  if (!has_oracle(env)) throw UnsupportedOracleError("improvement needs an exact oracle");
  if (log.episodes.empty()) return 0.0;
  std::vector<SoftmaxPolicy> policies;
  for (const auto& theta : log.policies) policies.emplace_back(theta, log.temperature);
  double sum = 0.0;
  for (const auto& e : log.episodes) {
    const auto id = static_cast<std::size_t>(e.policy_id);
    if (id >= policies.size()) throw DomainError("episode refers to an unknown policy");
    const double safe = true_performance(env, policies.front(), e.episode);
    const double gap = optimal_performance(env, e.episode) - safe;
    if (gap <= 1e-12) continue;
    const double deployed = id == 0 ? safe : true_performance(env, policies[id], e.episode);
    sum += (deployed - safe) / gap;
  }
  return sum / static_cast<double>(log.episodes.size());
}

MetricsRow compute_metrics(const ExperimentConfig& config, const DeploymentLog& log,
                           const Environment& env) {
  MetricsRow row;
  row.algorithm = to_string(config.algorithm);
  row.speed = config.speed;
  row.seed = config.seed;
  row.error = log.abort_error;
  row.deploy_rate = deploy_rate(log);
  row.violation_rate = evaluate_safety(log, env);
  row.mean_normalized_improvement = normalized_improvement(log, env);
  return row;
}

}  // namespace spin
