#include "spin/candidate.hpp"
#include "spin/errors.hpp"
#include "spin/harness.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace spin {
namespace {

using testing::numeric_grad;
using testing::rel_error;

struct Fixture {
  std::vector<Trajectory> train;
  SearchConfig config;
  Eigen::MatrixXd theta;
};

// Trajectories from a seasonal recommender under a random behavior policy.
Fixture recosys_fixture(std::uint64_t seed, int n = 60, int order = 2) {
  const Environment env(make_recosys(5, 1, 100.0, 0.05));
  Rng rng(seed);
  Eigen::MatrixXd behavior(1, 5);
  for (int j = 0; j < 5; ++j) behavior(0, j) = rng.uniform(-0.5, 0.5);
  Fixture f;
  for (int k = 1; k <= n; ++k) f.train.push_back(rollout(env, SoftmaxPolicy(behavior), k, rng));
  f.config.basis = FourierBasis(order, 100.0);
  f.config.horizon = future_episodes(n, 4);
  f.config.alpha = 0.1;
  f.config.replicates = 200;
  f.config.entropy_coeff = 0.05;
  f.theta = Eigen::MatrixXd(1, 5);
  for (int j = 0; j < 5; ++j) f.theta(0, j) = rng.uniform(-1.0, 1.0);
  return f;
}

TEST(Objective, DegenerateCaseIsForecastGradient) {
  // Every trajectory has the same estimate, so all replicates coincide.
  std::vector<Trajectory> train;
  for (int k = 1; k <= 6; ++k) {
    Trajectory t;
    t.episode = k;
    t.steps.push_back({0, 0, 0.5, 1.0});
    train.push_back(t);
  }
  SearchConfig cfg;
  cfg.horizon = {7, 8};
  cfg.alpha = 0.2;
  cfg.replicates = 40;
  Rng rng(1);
  const BootstrapDraws d = draw_rademacher(rng, 40, 6);
  Eigen::MatrixXd theta(1, 3);
  theta << 0.4, -0.1, 0.2;
  const ObjectiveValue v = objective_with_grad(theta, train, cfg, d);
  const SoftmaxPolicy p(theta);
  EXPECT_NEAR(v.lower_bound, 2.0 * p.action_prob(0, 0), 1e-14);
  const Eigen::MatrixXd expected = pdis_with_grad(train[0], p, 0.0).grad;
  EXPECT_LT((v.grad - expected).norm(), 1e-13);
}

TEST(Objective, GradientMatchesFiniteDifferences) {
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Fixture f = recosys_fixture(seed);
    Rng rng(seed + 50);
    const BootstrapDraws d =
        draw_rademacher(rng, f.config.replicates, static_cast<int>(f.train.size()));
    const SearchProblem problem(f.train, f.config, d);
    const ObjectiveValue v = problem.evaluate(f.theta);
    // Skip fixtures whose finite-difference stencil crosses a sort tie.
    bool same_piece = true;
    const auto value = [&](const Eigen::MatrixXd& th) {
      const ObjectiveValue o = problem.evaluate(th);
      if (o.selected_replicate != v.selected_replicate) same_piece = false;
      return o.value;
    };
    const Eigen::MatrixXd fd = numeric_grad(value, f.theta, 1e-5);
    if (!same_piece) continue;
    ++checked;
    EXPECT_LT(rel_error(v.grad, fd), 1e-3) << "seed " << seed;
  }
  EXPECT_GE(checked, 8);
}

TEST(Objective, SelectionStableUnderTinyPerturbation) {
  const Fixture f = recosys_fixture(3);
  Rng rng(9);
  const BootstrapDraws d = draw_rademacher(rng, 200, 60);
  const SearchProblem problem(f.train, f.config, d);
  const ObjectiveValue v = problem.evaluate(f.theta);
  Eigen::MatrixXd nudged = f.theta;
  nudged(0, 2) += 1e-9;
  EXPECT_EQ(problem.evaluate(nudged).selected_replicate, v.selected_replicate);
}

TEST(Objective, SearchBoundUsesHalfAlpha) {
  const Fixture f = recosys_fixture(4);
  Rng rng(10);
  const BootstrapDraws d = draw_rademacher(rng, 200, 60);
  const ObjectiveValue v = objective_with_grad(f.theta, f.train, f.config, d);
  // Same draws, alpha/2 percentile interval of the same estimates.
  const PerformanceSeries s = performance_series(f.train, SoftmaxPolicy(f.theta), 0.0);
  const auto pi = prediction_interval_percentile(s, f.config.basis, f.config.horizon,
                                                 f.config.alpha / 2.0, d);
  EXPECT_NEAR(v.lower_bound, pi.interval.lb, 1e-12);
  EXPECT_EQ(v.selected_replicate, pi.lower_replicate);
}

TEST(Search, ZeroStepsRejected) {
  Fixture f = recosys_fixture(5);
  f.config.n_steps = 0;
  Rng rng(1);
  EXPECT_THROW(candidate_search(f.theta, f.train, f.config, rng), DomainError);
}

TEST(Search, ZeroLearningRateReturnsStart) {
  Fixture f = recosys_fixture(6);
  f.config.n_steps = 1;
  f.config.learning_rate = 0.0;
  Rng rng(1);
  EXPECT_EQ(candidate_search(f.theta, f.train, f.config, rng), f.theta);
}

TEST(Search, EndpointNotWorseThanStart) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Fixture f = recosys_fixture(seed);
    f.config.n_steps = 20;
    f.config.learning_rate = 0.1;
    Rng rng(seed), replay(seed);
    const Eigen::MatrixXd out = candidate_search(f.theta, f.train, f.config, rng);
    const BootstrapDraws d = draw_rademacher(replay, f.config.replicates, 60);
    const SearchProblem problem(f.train, f.config, d);
    EXPECT_GE(problem.evaluate(out).value, problem.evaluate(f.theta).value - 1e-9);
  }
}

TEST(Search, DeterministicForSeed) {
  const Fixture f = recosys_fixture(7);
  Rng a(3), b(3);
  EXPECT_EQ(candidate_search(f.theta, f.train, f.config, a),
            candidate_search(f.theta, f.train, f.config, b));
}

TEST(Search, PicksBestStart) {
  Fixture f = recosys_fixture(8);
  f.config.n_steps = 1;
  f.config.learning_rate = 0.0;
  const Eigen::MatrixXd bad = Eigen::MatrixXd::Constant(1, 5, 0.0).array() +
                              (Eigen::ArrayXXd(1, 5) << 0, 0, 6, 6, 6).finished();
  const std::vector<Eigen::MatrixXd> starts{bad, f.theta};
  Rng rng(2), replay(2);
  const Eigen::MatrixXd out = candidate_search(starts, f.train, f.config, rng);
  const SearchProblem problem(f.train, f.config,
                              draw_rademacher(replay, f.config.replicates, 60));
  const Eigen::MatrixXd expected =
      problem.evaluate(bad).value > problem.evaluate(f.theta).value ? bad : f.theta;
  EXPECT_EQ(out, expected);
}

TEST(Search, BanditAscentFavorsBetterArm) {
  int monotone = 0;
  const int seeds = 20;
  for (int seed = 0; seed < seeds; ++seed) {
    SeasonalRecoSys reco;
    reco.base_reward = {1.0, 0.0};
    reco.amplitude = {0.0, 0.0};
    reco.phase = {0.0, 0.0};
    reco.noise_scale = 0.1;
    const Environment env(reco);
    Rng rng(static_cast<std::uint64_t>(seed));
    std::vector<Trajectory> train;
    for (int k = 1; k <= 40; ++k) train.push_back(rollout(env, SoftmaxPolicy::uniform(1, 2), k, rng));
    SearchConfig cfg;
    cfg.horizon = future_episodes(40, 4);
    cfg.replicates = 200;
    cfg.learning_rate = 0.1;
    const SearchProblem problem(train, cfg, draw_rademacher(rng, 200, 40));
    Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(1, 2);
    double prev = 0.5;
    bool up = true;
    for (int step = 0; step < 10; ++step) {
      theta += cfg.learning_rate * problem.evaluate(theta).grad;
      const double p0 = SoftmaxPolicy(theta).action_prob(0, 0);
      if (!(p0 > prev)) up = false;
      prev = p0;
    }
    monotone += up ? 1 : 0;
  }
  EXPECT_GE(monotone, static_cast<int>(0.9 * seeds));
}

TEST(Search, EntropyKeepsSupport) {
  Fixture f = recosys_fixture(9);
  f.config.entropy_coeff = 0.1;
  f.config.n_steps = 200;
  f.config.learning_rate = 0.5;
  Rng rng(4);
  const Eigen::MatrixXd out = candidate_search(f.theta, f.train, f.config, rng);
  EXPECT_GT(SoftmaxPolicy(out).prob_matrix().minCoeff(), 1e-6);
}

}  // namespace
}  // namespace spin
