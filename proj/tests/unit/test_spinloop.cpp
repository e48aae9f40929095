#include "spin/errors.hpp"
#include "spin/harness.hpp"
#include "spin/spinloop.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

namespace spin {
namespace {

std::vector<Trajectory> numbered_batch(int n, Episode first = 1) {
  std::vector<Trajectory> batch(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    batch[static_cast<std::size_t>(i)].episode = first + i;
    batch[static_cast<std::size_t>(i)].steps.push_back({0, 0, 0.5, static_cast<double>(i)});
  }
  return batch;
}

TEST(Split, EvenPair) {
  Rng rng(1);
  const auto [a, b] = split_batch(numbered_batch(2), 0.5, rng);
  EXPECT_EQ(a.size(), 1U);
  EXPECT_EQ(b.size(), 1U);
}

TEST(Split, SeventyFivePercent) {
  Rng rng(2);
  const auto [a, b] = split_batch(numbered_batch(8), 0.75, rng);
  EXPECT_EQ(a.size(), 6U);
  EXPECT_EQ(b.size(), 2U);
}

TEST(Split, PartitionProperty) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(20));
    const double frac = rng.uniform(0.2, 0.8);
    if (n * std::min(frac, 1.0 - frac) < 1.0) continue;
    const auto [a, b] = split_batch(numbered_batch(n, 100), frac, rng);
    std::set<Episode> seen;
    for (const auto& t : a) seen.insert(t.episode);
    for (const auto& t : b) EXPECT_TRUE(seen.insert(t.episode).second);
    EXPECT_EQ(seen.size(), static_cast<std::size_t>(n));
    EXPECT_TRUE(std::is_sorted(a.begin(), a.end(),
                               [](const auto& x, const auto& y) { return x.episode < y.episode; }));
  }
}

TEST(Split, TooSmall) {
  Rng rng(4);
  EXPECT_THROW(split_batch(numbered_batch(1), 0.5, rng), BatchTooSmallError);
  EXPECT_THROW(split_batch(numbered_batch(4), 0.9, rng), BatchTooSmallError);
}

TEST(Safety, StrictComparison) {
  EXPECT_TRUE(passes_safety(1.2, 1.0));
  EXPECT_FALSE(passes_safety(1.0, 1.0));
  EXPECT_FALSE(passes_safety(0.9, 1.0));
}

std::vector<Trajectory> recosys_data(int n, const Eigen::MatrixXd& behavior, std::uint64_t seed) {
  const Environment env(make_recosys(4, 0, 100.0, 0.05));
  Rng rng(seed);
  std::vector<Trajectory> data;
  for (int k = 1; k <= n; ++k) data.push_back(rollout(env, SoftmaxPolicy(behavior), k, rng));
  return data;
}

SafetyTestConfig safety_config(int n, double alpha) {
  SafetyTestConfig c;
  c.alpha = alpha;
  c.replicates = 400;
  c.basis = FourierBasis(1, 100.0);
  c.horizon = future_episodes(n, 4);
  return c;
}

TEST(Safety, IdenticalPoliciesRarelyPass) {
  const Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(1, 4);
  int passed = 0;
  const int seeds = 60;
  for (int s = 0; s < seeds; ++s) {
    const auto data = recosys_data(40, theta, static_cast<std::uint64_t>(s));
    Rng rng(static_cast<std::uint64_t>(s) + 1000);
    passed += safety_test(data, theta, theta, safety_config(40, 0.05), rng).passed ? 1 : 0;
  }
  EXPECT_LE(passed, static_cast<int>(0.05 * seeds));
}

TEST(Safety, MonotoneInAlpha) {
  const Eigen::MatrixXd behavior = Eigen::MatrixXd::Zero(1, 4);
  Eigen::MatrixXd better(1, 4);
  better << 3.0, 3.0, 0.0, 0.0;  // the two headline items
  for (int s = 0; s < 20; ++s) {
    const auto data = recosys_data(40, behavior, static_cast<std::uint64_t>(s));
    Rng strict_rng(7), loose_rng(7);
    const bool strict = safety_test(data, better, behavior, safety_config(40, 0.02), strict_rng).passed;
    const bool loose = safety_test(data, better, behavior, safety_config(40, 0.99), loose_rng).passed;
    EXPECT_TRUE(!strict || loose);
  }
}

TEST(Safety, EstimationFailureFailsTest) {
  const Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(1, 4);
  const auto data = recosys_data(3, theta, 1);
  Rng rng(1);
  const SafetyTestResult r = safety_test(data, theta, theta, safety_config(3, 0.05), rng);
  EXPECT_FALSE(r.passed);
  EXPECT_FALSE(r.error.empty());
}

RunConfig small_run() {
  RunConfig c;
  c.delta = 4;
  c.episode_budget = 200;
  c.fourier_order = 1;
  c.time_scale = 100.0;
  c.n_steps = 5;
  c.replicates_search = 100;
  c.replicates_safety = 200;
  return c;
}

Experiment recosys_experiment(int speed) {
  ExperimentConfig cfg;
  cfg.n_items = 4;
  cfg.speed = speed;
  cfg.season_length = 100.0;
  return build_experiment(cfg);
}

TEST(Loop, BudgetBelowDelta) {
  const Experiment ex = recosys_experiment(0);
  RunConfig c = small_run();
  c.episode_budget = 3;
  const DeploymentLog log = spin_run(ex.env, ex.safe_theta, c, Rng(1));
  EXPECT_TRUE(log.decisions.empty());
  ASSERT_EQ(log.episodes.size(), 3U);
  for (const auto& e : log.episodes) EXPECT_EQ(e.policy_id, 0);
}

TEST(Loop, EpisodeCountAndDecisionCadence) {
  const Experiment ex = recosys_experiment(1);
  const RunConfig c = small_run();
  const DeploymentLog log = spin_run(ex.env, ex.safe_theta, c, Rng(2));
  ASSERT_EQ(log.episodes.size(), 200U);
  ASSERT_EQ(log.decisions.size(), 49U);
  for (std::size_t i = 0; i < log.decisions.size(); ++i) {
    EXPECT_EQ(log.decisions[i].k, static_cast<Episode>(4 * (i + 1)));
  }
  EXPECT_TRUE(log.abort_error.empty());
}

TEST(Loop, DeploymentFollowsDecisions) {
  const Experiment ex = recosys_experiment(0);
  const DeploymentLog log = spin_run(ex.env, ex.safe_theta, small_run(), Rng(3));
  for (const auto& d : log.decisions) {
    if (!d.passed) EXPECT_EQ(d.deployed_policy_id, 0);
    for (const auto& e : log.episodes) {
      if (e.episode > d.k && e.episode <= d.k + log.delta) EXPECT_EQ(e.policy_id, d.deployed_policy_id);
    }
  }
}

TEST(Loop, LoggedReturnsReplay) {
  const Experiment ex = recosys_experiment(1);
  const Rng rng(4);
  const DeploymentLog log = spin_run(ex.env, ex.safe_theta, small_run(), rng);
  for (std::size_t i = 0; i < log.episodes.size(); i += 13) {
    const EpisodeRecord& e = log.episodes[i];
    const SoftmaxPolicy p(log.policies[static_cast<std::size_t>(e.policy_id)]);
    Rng replay = rng.child(episode_stream(e.episode));
    EXPECT_EQ(rollout(ex.env, p, e.episode, replay).discounted_return(0.0), e.ret);
    EXPECT_EQ(true_performance(ex.env, p, e.episode), e.true_perf);
  }
}

TEST(Loop, Deterministic) {
  const Experiment ex = recosys_experiment(2);
  const DeploymentLog a = spin_run(ex.env, ex.safe_theta, small_run(), Rng(5));
  const DeploymentLog b = spin_run(ex.env, ex.safe_theta, small_run(), Rng(5));
  ASSERT_EQ(a.decisions.size(), b.decisions.size());
  for (std::size_t i = 0; i < a.decisions.size(); ++i) {
    EXPECT_EQ(a.decisions[i].passed, b.decisions[i].passed);
    EXPECT_EQ(std::isnan(a.decisions[i].lb_candidate), std::isnan(b.decisions[i].lb_candidate));
    if (!std::isnan(a.decisions[i].lb_candidate)) {
      EXPECT_EQ(a.decisions[i].lb_candidate, b.decisions[i].lb_candidate);
    }
  }
  for (std::size_t i = 0; i < a.episodes.size(); ++i) EXPECT_EQ(a.episodes[i].ret, b.episodes[i].ret);
}

TEST(Loop, BaselineIsConstantBasisRun) {
  const Experiment ex = recosys_experiment(1);
  RunConfig c = small_run();
  const DeploymentLog base = baseline_run(ex.env, ex.safe_theta, c, Rng(6));
  c.fourier_order = 0;
  const DeploymentLog spin0 = spin_run(ex.env, ex.safe_theta, c, Rng(6));
  ASSERT_EQ(base.decisions.size(), spin0.decisions.size());
  for (std::size_t i = 0; i < base.decisions.size(); ++i) {
    EXPECT_EQ(base.decisions[i].passed, spin0.decisions[i].passed);
    EXPECT_EQ(base.decisions[i].error, spin0.decisions[i].error);
    if (!std::isnan(base.decisions[i].lb_candidate)) {
      EXPECT_EQ(base.decisions[i].lb_candidate, spin0.decisions[i].lb_candidate);
    }
  }
}

TEST(Loop, EarlyDecisionsReportInsufficientData) {
  const Experiment ex = recosys_experiment(0);
  const DeploymentLog log = spin_run(ex.env, ex.safe_theta, small_run(), Rng(7));
  // Order 1 needs 4 points in each half; two decisions supply 4 each.
  EXPECT_EQ(log.decisions[0].error, "insufficient data");
  EXPECT_FALSE(log.decisions[0].passed);
}

TEST(Loop, IndependentTestModeRuns) {
  const Experiment ex = recosys_experiment(0);
  RunConfig c = small_run();
  c.reuse_test_data = false;
  const DeploymentLog log = spin_run(ex.env, ex.safe_theta, c, Rng(8));
  EXPECT_EQ(log.episodes.size(), 200U);
  EXPECT_TRUE(log.abort_error.empty());
}

TEST(Loop, SimulatorRunsWithoutOracle) {
  SimulatorEnv sim;
  sim.n_actions = 2;
  sim.reset = [](Episode, Rng&) { return 0; };
  sim.step = [](Episode, int, int a, Rng& rng) {
    return StepOutcome{a == 0 ? rng.uniform(0.5, 1.0) : rng.uniform(0.0, 0.5), 0, true};
  };
  RunConfig c = small_run();
  c.episode_budget = 40;
  const DeploymentLog log = spin_run(Environment(sim), Eigen::MatrixXd::Zero(1, 2), c, Rng(9));
  EXPECT_EQ(log.episodes.size(), 40U);
  EXPECT_TRUE(std::isnan(log.episodes[0].true_perf));
}

}  // namespace
}  // namespace spin
