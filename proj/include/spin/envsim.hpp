#pragma once

#include "spin/policy.hpp"
#include "spin/rng.hpp"

#include <cstdint>
#include <functional>
#include <utility>
#include <variant>
#include <vector>

namespace spin {

/// Episode number. Episodes are counted from 1.
using Episode = std::int64_t;

struct Step {
  int state = 0;
  int action = 0;
  double behavior_prob = 1.0;  // probability the acting policy gave `action`
  double reward = 0.0;
};

/// One episode of interaction, with the acting policy's probabilities
/// recorded per step so importance weights never depend on later updates.
struct Trajectory {
  Episode episode = 0;
  std::vector<Step> steps;
  int policy_id = 0;  // behavior snapshot

  std::vector<int> states() const;
  double discounted_return(double gamma) const;
};

/// Finite-horizon non-stationary MDP given by per-episode transition and
/// mean-reward functions.
///
/// Rewards are mean_reward(k, s, a) plus zero-mean uniform noise of half
/// width `noise_half_width`, unless `reward_sampler` is set, in which case it
/// draws the full reward (its mean must equal mean_reward).
struct TabularNSMDP {
  int n_states = 1;
  int n_actions = 1;
  double gamma = 0.0;
  double r_max = 1.0;
  int horizon = 1;
  std::vector<double> start_dist;
  std::function<std::vector<double>(Episode, int, int)> transition;
  std::function<double(Episode, int, int)> mean_reward;
  double noise_half_width = 0.0;
  std::function<double(Episode, int, int, Rng&)> reward_sampler;

  /// Checks shapes, probability vectors and reward bounds at episode k.
  void validate(Episode k) const;
};

/// Single-step recommender: the action is the recommended item and the
/// reward is that item's seasonal mean plus uniform noise.
struct SeasonalRecoSys {
  std::vector<double> base_reward;
  std::vector<double> amplitude;
  std::vector<double> phase;
  int speed = 0;
  double season_length = 1000.0;
  double noise_scale = 0.0;

  int n_items() const noexcept { return static_cast<int>(base_reward.size()); }

  /// base[j] + amplitude[j] * (sin(2 pi speed k / season_length + phase[j]) - sin(phase[j])),
  /// so base[j] is the reward at episode 0 and at every episode when speed is 0.
  double mean_reward(int item, Episode k) const;

  std::vector<double> mean_rewards(Episode k) const;

  void validate() const;
};

/// Outcome of one simulator step.
struct StepOutcome {
  double reward = 0.0;
  int next_state = 0;
  bool done = false;
};

/// Generative environment with no closed-form performance. It can be rolled
/// out but not evaluated exactly.
struct SimulatorEnv {
  int n_states = 1;
  int n_actions = 1;
  double gamma = 0.0;
  int horizon = 1;
  std::function<int(Episode, Rng&)> reset;
  std::function<StepOutcome(Episode, int, int, Rng&)> step;
};

using Environment = std::variant<TabularNSMDP, SeasonalRecoSys, SimulatorEnv>;

int env_states(const Environment& env);
int env_actions(const Environment& env);
double env_gamma(const Environment& env);
bool has_oracle(const Environment& env);

/// Run `policy` for one episode. Throws FullSupportError if the policy gives
/// any action probability <= 0.
Trajectory rollout(const Environment& env, const SoftmaxPolicy& policy, Episode k, Rng& rng);

/// Exact expected discounted return of `policy` in episode k.
/// Throws UnsupportedOracleError for SimulatorEnv.
double true_performance(const Environment& env, const SoftmaxPolicy& policy, Episode k);

/// Best achievable expected return in episode k (per-step greedy dynamic
/// programming; for the recommender, the best item's mean reward).
double optimal_performance(const Environment& env, Episode k);

/// delta * (gamma r_max eps_p / (1-gamma)^2 + eps_r / (1-gamma)).
double lipschitz_bound(double gamma, double r_max, double eps_p, double eps_r, double delta);

struct DriftConstants {
  double eps_p = 0.0;
  double eps_r = 0.0;
};

/// Largest L1 change of P(.|s,a) and largest absolute change of the mean
/// reward between episodes k and k+1.
DriftConstants drift_constants(const TabularNSMDP& env, Episode k);

/// Two states, one action, gamma = 0, start in s1. Episode 1 pays +1 in s1
/// and moves to s2; later episodes pay +1 w.p. 0.9 and -1 w.p. 0.1 in s1 and
/// stay in s1 w.p. 0.1. The performance drop between episodes 1 and 2 equals
/// the Lipschitz bound exactly.
TabularNSMDP two_state_drop_env();

/// Random tabular NS-MDP whose transition logits and mean rewards drift
/// sinusoidally with the episode index at rate `drift`.
TabularNSMDP make_drifting_tabular(int n_states, int n_actions, int horizon, double gamma,
                                   double drift, std::uint64_t seed);

}  // namespace spin
