#pragma once

#include "spin/candidate.hpp"
#include "spin/envsim.hpp"
#include "spin/forecast.hpp"
#include "spin/ope.hpp"
#include "spin/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace spin {

struct RunConfig {
  double alpha = 0.05;
  int delta = 4;
  int n_steps = 20;
  double learning_rate = 0.1;
  double entropy_coeff = 1e-2;
  int replicates_search = 200;
  int replicates_safety = 500;
  int fourier_order = 3;
  double time_scale = 0.0;  // <= 0 means episode_budget
  double train_fraction = 0.5;
  Episode episode_budget = 1000;
  bool reuse_test_data = true;
  bool warm_start = true;  // start each search from the previous candidate
  double temperature = 1.0;
  PdisOptions pdis;

  FourierBasis basis() const;
  void validate() const;
};

struct EpisodeRecord {
  Episode episode = 0;
  int policy_id = 0;
  double ret = 0.0;
  double true_perf = std::numeric_limits<double>::quiet_NaN();
  double safe_true_perf = std::numeric_limits<double>::quiet_NaN();
};

struct DecisionRecord {
  Episode k = 0;  // last episode before the decision
  bool passed = false;
  double lb_candidate = std::numeric_limits<double>::quiet_NaN();
  double ub_safe = std::numeric_limits<double>::quiet_NaN();
  int deployed_policy_id = 0;
  Eigen::MatrixXd candidate_theta;  // empty when no search ran
  std::string error;
};

/// Everything a run did. policies[id] holds theta of policy `id`; id 0 is the
/// safe policy and id i >= 1 is the i-th deployed candidate.
struct DeploymentLog {
  int delta = 0;
  double temperature = 1.0;
  std::vector<EpisodeRecord> episodes;
  std::vector<DecisionRecord> decisions;
  std::vector<Eigen::MatrixXd> policies;
  std::string abort_error;
};

/// Random partition into (train, test) of sizes round(n * fraction) and the
/// rest. Both parts are sorted by episode. Throws BatchTooSmallError when
/// either part would be empty.
std::pair<std::vector<Trajectory>, std::vector<Trajectory>> split_batch(
    std::vector<Trajectory> batch, double train_fraction, Rng& rng);

struct SafetyTestResult {
  bool passed = false;
  double lb_candidate = std::numeric_limits<double>::quiet_NaN();
  double ub_safe = std::numeric_limits<double>::quiet_NaN();
  std::string error;
};

struct SafetyTestConfig {
  double alpha = 0.05;
  int replicates = 500;
  FourierBasis basis{0, 1.0};
  std::vector<Episode> horizon;
  double gamma = 0.0;
  double temperature = 1.0;
  PdisOptions pdis;
};

/// Passes iff the candidate's t-statistic lower bound at alpha/2 is strictly
/// above the safe policy's upper bound at alpha/2. Estimation failures fail
/// the test and are reported in `error`.
SafetyTestResult safety_test(std::span<const Trajectory> test_data,
                             const Eigen::MatrixXd& theta_candidate,
                             const Eigen::MatrixXd& theta_safe, const SafetyTestConfig& config,
                             Rng& rng);

/// Bare comparison used by safety_test.
inline bool passes_safety(double lb_candidate, double ub_safe) { return lb_candidate > ub_safe; }

/// Called with every episode record as soon as it is produced.
using EpisodeSink = std::function<void(const EpisodeRecord&)>;

/// Deployment loop: run the current policy for delta episodes, split the
/// batch into the accumulated train/test sets, search for a candidate,
/// safety-test it and deploy it for the next delta episodes only if it
/// passes. Random streams are children of `rng`'s seed: episode k uses
/// rng.child(k), so a logged episode can be re-simulated from the seed.
DeploymentLog spin_run(const Environment& env, const Eigen::MatrixXd& safe_theta,
                       const RunConfig& config, const Rng& rng, const EpisodeSink& sink = {});

/// spin_run with the constant basis (order 0): forecasts reduce to the mean
/// of past estimates, i.e. a stationarity assumption.
DeploymentLog baseline_run(const Environment& env, const Eigen::MatrixXd& safe_theta,
                           const RunConfig& config, const Rng& rng, const EpisodeSink& sink = {});

/// Stream tag of episode k's rollout stream.
inline std::uint64_t episode_stream(Episode k) { return static_cast<std::uint64_t>(k); }

}  // namespace spin
