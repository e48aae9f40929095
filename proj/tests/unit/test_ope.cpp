#include "spin/envsim.hpp"
#include "spin/errors.hpp"
#include "spin/ope.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace spin {
namespace {

using testing::numeric_grad;
using testing::rel_error;

Trajectory one_step(double pi_b, int action, double reward) {
  Trajectory t;
  t.episode = 1;
  t.steps.push_back({0, action, pi_b, reward});
  return t;
}

Eigen::MatrixXd random_theta(Rng& rng, int s, int a, double scale = 1.5) {
  Eigen::MatrixXd theta(s, a);
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta.data()[i] = rng.uniform(-scale, scale);
  return theta;
}

TEST(Pdis, OnPolicyIsDiscountedReturn) {
  const TabularNSMDP mdp = make_drifting_tabular(3, 2, 4, 0.9, 0.1, 5);
  Rng rng(1);
  const SoftmaxPolicy p(random_theta(rng, 3, 2));
  const Trajectory t = rollout(Environment(mdp), p, 3, rng);
  EXPECT_NEAR(pdis(t, p, 0.9), t.discounted_return(0.9), 1e-14);
}

TEST(Pdis, OneStepRatio) {
  Eigen::MatrixXd probs(1, 2);
  probs << 0.6, 0.4;
  const auto pi = SoftmaxPolicy::from_probabilities(probs);
  EXPECT_NEAR(pdis(one_step(0.3, 0, 2.0), pi, 0.5), 4.0, 1e-14);
}

TEST(Pdis, UnbiasedOnEnumerableMdp) {
  const TabularNSMDP mdp = testing::small_mdp(0.9);
  Rng rng(3);
  for (int pair = 0; pair < 20; ++pair) {
    const SoftmaxPolicy behavior(random_theta(rng, 2, 2));
    const SoftmaxPolicy target(random_theta(rng, 2, 2));
    double mean = 0.0;
    testing::enumerate_paths(mdp, behavior, 1, [&](const std::vector<Step>& path, double prob) {
      Trajectory t;
      t.episode = 1;
      t.steps = path;
      mean += prob * pdis(t, target, mdp.gamma);
    });
    EXPECT_NEAR(mean, true_performance(Environment(mdp), target, 1), 1e-10);
  }
}

TEST(Pdis, LinearInRewards) {
  Trajectory t;
  t.episode = 2;
  t.steps = {{0, 1, 0.4, 0.7}, {1, 0, 0.5, -0.2}, {0, 0, 0.9, 1.1}};
  Trajectory scaled = t;
  for (auto& s : scaled.steps) s.reward *= -3.0;
  Rng rng(2);
  const SoftmaxPolicy p(random_theta(rng, 2, 2));
  EXPECT_NEAR(pdis(scaled, p, 0.8), -3.0 * pdis(t, p, 0.8), 1e-13);
}

TEST(Pdis, RejectsTinyBehaviorProbability) {
  const SoftmaxPolicy p = SoftmaxPolicy::uniform(1, 2);
  EXPECT_THROW(pdis(one_step(1e-9, 0, 1.0), p, 0.0), FullSupportError);
  EXPECT_THROW(pdis(one_step(0.0, 0, 1.0), p, 0.0), FullSupportError);
  EXPECT_NO_THROW(pdis(one_step(1e-8, 0, 1.0), p, 0.0));
}

TEST(Pdis, LongHorizonStaysFinite) {
  Trajectory t;
  t.episode = 1;
  for (int i = 0; i < 2000; ++i) t.steps.push_back({0, 0, 0.01, 1.0});
  Eigen::MatrixXd theta(1, 2);
  theta << 0.0, 30.0;
  const double v = pdis(t, SoftmaxPolicy(theta), 0.99);
  EXPECT_TRUE(std::isfinite(v));
}

TEST(Pdis, WeightCap) {
  const SoftmaxPolicy p = SoftmaxPolicy::uniform(1, 2);
  PdisOptions capped;
  capped.weight_cap = 2.0;
  // Uncapped weight 0.5 / 0.1 = 5.
  EXPECT_NEAR(pdis(one_step(0.1, 0, 1.0), p, 0.0), 5.0, 1e-14);
  EXPECT_NEAR(pdis(one_step(0.1, 0, 1.0), p, 0.0, capped), 2.0, 1e-15);
  const ValueAndGrad g = pdis_with_grad(one_step(0.1, 0, 1.0), p, 0.0, capped);
  EXPECT_EQ(g.grad.norm(), 0.0);
}

TEST(PdisGrad, ZeroRewardsZeroGradient) {
  Trajectory t;
  t.episode = 1;
  t.steps = {{0, 0, 0.5, 0.0}, {1, 1, 0.5, 0.0}};
  const ValueAndGrad g = pdis_with_grad(t, SoftmaxPolicy::uniform(2, 2), 0.9);
  EXPECT_EQ(g.value, 0.0);
  EXPECT_EQ(g.grad.norm(), 0.0);
}

TEST(PdisGrad, SingleStepClosedForm) {
  Eigen::MatrixXd theta(1, 3);
  theta << 0.2, -0.5, 1.0;
  const SoftmaxPolicy p(theta);
  const Trajectory t = one_step(0.25, 1, 1.7);
  const Eigen::MatrixXd expected = p.action_prob(0, 1) / 0.25 * 1.7 * p.grad_log_prob(0, 1);
  EXPECT_LT((pdis_with_grad(t, p, 0.0).grad - expected).norm(), 1e-14);
}

TEST(PdisGrad, MatchesFiniteDifferences) {
  const TabularNSMDP mdp = make_drifting_tabular(3, 3, 5, 0.9, 0.1, 2);
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const SoftmaxPolicy behavior(random_theta(rng, 3, 3));
    const Trajectory t = rollout(Environment(mdp), behavior, trial + 1, rng);
    const Eigen::MatrixXd theta = random_theta(rng, 3, 3);
    const ValueAndGrad g = pdis_with_grad(t, SoftmaxPolicy(theta), 0.9);
    const auto f = [&](const Eigen::MatrixXd& th) { return pdis(t, SoftmaxPolicy(th), 0.9); };
    EXPECT_LT(rel_error(g.grad, numeric_grad(f, theta)), 1e-4);
    // Value bits agree with the plain estimator.
    EXPECT_EQ(g.value, pdis(t, SoftmaxPolicy(theta), 0.9));
  }
}

TEST(PdisGrad, AccumulateAddsScaledGradient) {
  Trajectory t;
  t.episode = 1;
  t.steps = {{0, 1, 0.3, 0.5}, {1, 0, 0.6, 1.0}};
  Rng rng(4);
  const SoftmaxPolicy p(random_theta(rng, 2, 2));
  Eigen::MatrixXd grad = Eigen::MatrixXd::Ones(2, 2);
  const double v = pdis_accumulate_grad(t, p, 0.7, {}, -2.0, grad);
  const ValueAndGrad ref = pdis_with_grad(t, p, 0.7);
  EXPECT_EQ(v, ref.value);
  EXPECT_LT((grad - (Eigen::MatrixXd::Ones(2, 2) - 2.0 * ref.grad)).norm(), 1e-14);
  Eigen::MatrixXd wrong(3, 2);
  EXPECT_THROW(pdis_accumulate_grad(t, p, 0.7, {}, 1.0, wrong), DomainError);
}

TEST(Series, OrderedByEpisode) {
  std::vector<Trajectory> data;
  for (Episode k : {5, 2, 9}) {
    Trajectory t = one_step(0.5, 0, static_cast<double>(k));
    t.episode = k;
    data.push_back(t);
  }
  const PerformanceSeries s = performance_series(data, SoftmaxPolicy::uniform(1, 2), 0.0);
  ASSERT_EQ(s.size(), 3U);
  EXPECT_EQ(s.episodes, (std::vector<Episode>{2, 5, 9}));
  EXPECT_DOUBLE_EQ(s.estimates(0), 2.0);
  EXPECT_DOUBLE_EQ(s.estimates(2), 9.0);
  data[1].episode = 5;
  EXPECT_THROW(performance_series(data, SoftmaxPolicy::uniform(1, 2), 0.0), DomainError);
}

}  // namespace
}  // namespace spin
