#include "spin/errors.hpp"
#include "spin/wildboot.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace spin {
namespace {

PerformanceSeries series_of(std::vector<double> y) {
  PerformanceSeries s;
  for (std::size_t i = 0; i < y.size(); ++i) s.episodes.push_back(static_cast<Episode>(i + 1));
  s.estimates = Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  return s;
}

PerformanceSeries seasonal_series(int k, std::uint64_t seed, double time_scale) {
  Rng rng(seed);
  std::vector<double> y(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const double x = (i + 1) / time_scale;
    y[static_cast<std::size_t>(i)] = std::cos(2.0 * std::numbers::pi * x) + rng.uniform(-0.5, 0.5);
  }
  return series_of(y);
}

TEST(Draws, SignsOnly) {
  Rng rng(1);
  const BootstrapDraws d = draw_rademacher(rng, 10000, 10);
  EXPECT_TRUE((d.signs.array().abs() == 1.0).all());
  EXPECT_LT(std::abs(d.signs.mean()), 0.03);
}

TEST(Draws, Deterministic) {
  Rng a(5), b(5);
  EXPECT_EQ(draw_rademacher(a, 50, 7).signs, draw_rademacher(b, 50, 7).signs);
}

TEST(Draws, ColumnsLookIndependent) {
  Rng rng(2);
  const BootstrapDraws d = draw_rademacher(rng, 20000, 3);
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      EXPECT_LT(std::abs(d.signs.col(i).dot(d.signs.col(j)) / 20000.0), 0.03);
    }
  }
}

TEST(OrderPositions, Convention) {
  const OrderPositions p = order_positions(0.05, 400);
  EXPECT_EQ(p.lower, 9);
  EXPECT_EQ(p.upper, 389);
  const OrderPositions q = order_positions(0.5, 4);
  EXPECT_EQ(q.lower, 0);
  EXPECT_EQ(q.upper, 2);
  const OrderPositions r = order_positions(0.9, 3);
  EXPECT_EQ(r.lower, 0);
}

TEST(OrderPositions, StableTies) {
  Eigen::VectorXd v(5);
  v << 2.0, 1.0, 2.0, 1.0, 0.5;
  EXPECT_EQ(stable_order(v), (std::vector<int>{4, 1, 3, 0, 2}));
}

TEST(Percentile, FourValueOrderStatistic) {
  Eigen::VectorXd v(4);
  v << 1.0, 3.0, 2.0, 4.0;
  const auto order = stable_order(v);
  const int sel = order[static_cast<std::size_t>(order_positions(0.5, 4).lower)];
  EXPECT_EQ(sel, 0);
  EXPECT_EQ(v(sel), 1.0);
}

TEST(Percentile, SelectedReplicateOnConstructedDraws) {
  // y = (0, 2): fitted mean 1, residuals (-1, 1).
  BootstrapDraws d;
  d.signs.resize(4, 2);
  d.signs << 1, -1, -1, 1, 1, 1, -1, -1;
  const FourierBasis b(0, 1.0);
  const std::vector<Episode> tau{3};
  const PercentileInterval pi = prediction_interval_percentile(series_of({0, 2}), b, tau, 0.5, d);
  const Eigen::VectorXd expected = (Eigen::VectorXd(4) << 0, 2, 1, 1).finished();
  EXPECT_LT((pi.replicate_forecasts - expected).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_EQ(pi.lower_replicate, 0);
  EXPECT_NEAR(pi.interval.lb, 0.0, 1e-14);
  // Position 2 of the sorted values 0, 1, 1, 2 is one of the tied middle replicates.
  EXPECT_TRUE(pi.upper_replicate == 2 || pi.upper_replicate == 3);
  EXPECT_NEAR(pi.interval.ub, 1.0, 1e-14);
}

TEST(Percentile, ZeroResiduals) {
  Rng rng(3);
  const BootstrapDraws d = draw_rademacher(rng, 100, 5);
  const std::vector<Episode> tau{6, 7};
  const auto pi = prediction_interval_percentile(series_of({2, 2, 2, 2, 2}), FourierBasis(0, 1.0),
                                                 tau, 0.1, d);
  EXPECT_NEAR(pi.interval.lb, 2.0, 1e-14);
  EXPECT_NEAR(pi.interval.ub, 2.0, 1e-14);
}

TEST(TInterval, ZeroResidualsCollapse) {
  Rng rng(4);
  const FourierBasis b(1, 20.0);
  std::vector<double> y;
  for (int i = 1; i <= 10; ++i) y.push_back(1.0 + 0.5 * b.row(i)(0) - 0.2 * b.row(i)(1));
  const std::vector<Episode> tau{11, 12};
  const PredictionInterval pi = prediction_interval_t(series_of(y), b, tau, 0.1, 200, rng);
  EXPECT_NEAR(pi.lb, pi.rho_hat, 1e-12);
  EXPECT_NEAR(pi.ub, pi.rho_hat, 1e-12);
  EXPECT_TRUE(std::isfinite(pi.lb));
}

TEST(TInterval, ExhaustiveReplicatesAverageToForecast) {
  const PerformanceSeries s = series_of({0.3, 1.9, -0.4});
  const FourierBasis b(0, 1.0);
  BootstrapDraws d;
  d.signs.resize(8, 3);
  for (int r = 0; r < 8; ++r) {
    for (int j = 0; j < 3; ++j) d.signs(r, j) = (r >> j & 1) != 0 ? 1.0 : -1.0;
  }
  const std::vector<Episode> tau{4};
  const auto pi = prediction_interval_percentile(s, b, tau, 0.5, d);
  EXPECT_NEAR(pi.replicate_forecasts.mean(), pi.interval.rho_hat, 1e-12);
  EXPECT_NEAR(pi.interval.rho_hat, 0.6, 1e-15);
}

TEST(TInterval, LinearityAgainstRefit) {
  const FourierBasis b(2, 60.0);
  const PerformanceSeries s = seasonal_series(30, 6, 60.0);
  const RegressionFit f = fit(b, s);
  const auto tau = future_episodes(30, 4);
  Rng rng(7);
  const BootstrapDraws d = draw_rademacher(rng, 64, 30);
  const PercentileInterval pi = prediction_interval_percentile(s, b, tau, 0.1, d);
  const Eigen::RowVectorXd c = forecast_weights(f, b, tau);
  const LinearReplicates lin(f, c, d);
  const Eigen::VectorXd via_lin = lin.forecasts(s.estimates);
  for (int r = 0; r < d.replicates(); ++r) {
    const Eigen::VectorXd y_star =
        f.y_hat + f.residuals.cwiseProduct(d.signs.row(r).transpose());
    const double refitted = forecast(refit(f, y_star), b, tau).rho_hat;
    EXPECT_NEAR(pi.replicate_forecasts(r), refitted, 1e-10);
    EXPECT_NEAR(via_lin(r), refitted, 1e-10);
  }
}

TEST(TInterval, MonotoneInAlpha) {
  const FourierBasis b(1, 40.0);
  const PerformanceSeries s = seasonal_series(25, 8, 40.0);
  const auto tau = future_episodes(25, 3);
  Rng rng(9);
  const BootstrapDraws d = draw_rademacher(rng, 400, 25);
  double prev_lb = -INFINITY, prev_ub = INFINITY;
  for (double alpha : {0.01, 0.05, 0.1, 0.3, 0.6}) {
    const PredictionInterval t = prediction_interval_t(s, b, tau, alpha, d);
    EXPECT_GE(t.lb, prev_lb);
    EXPECT_LE(t.ub, prev_ub);
    EXPECT_LE(t.lb, t.ub);
    prev_lb = t.lb;
    prev_ub = t.ub;
  }
}

TEST(TInterval, DeterministicForSeed) {
  const FourierBasis b(2, 50.0);
  const PerformanceSeries s = seasonal_series(20, 10, 50.0);
  const auto tau = future_episodes(20, 2);
  Rng r1(11), r2(11);
  const PredictionInterval a = prediction_interval_t(s, b, tau, 0.05, 500, r1);
  const PredictionInterval c = prediction_interval_t(s, b, tau, 0.05, 500, r2);
  EXPECT_EQ(a.lb, c.lb);
  EXPECT_EQ(a.ub, c.ub);
}

TEST(TInterval, PercentileBracketsForecastForSymmetricNoise) {
  // Residuals come in +/- pairs, so replicate forecasts are symmetric about rho_hat.
  const PerformanceSeries s = series_of({1.0, 3.0, 0.5, 3.5, 2.0, 2.0, 1.2, 2.8});
  const FourierBasis b(0, 1.0);
  const std::vector<Episode> tau{9};
  Rng rng(12);
  const BootstrapDraws d = draw_rademacher(rng, 1000, 8);
  const PredictionInterval t = prediction_interval_t(s, b, tau, 0.1, d);
  const PredictionInterval p = prediction_interval_percentile(s, b, tau, 0.1, d).interval;
  EXPECT_LT(p.lb, t.rho_hat);
  EXPECT_GT(p.ub, t.rho_hat);
  EXPECT_LT(t.lb, t.rho_hat);
  EXPECT_GT(t.ub, t.rho_hat);
}

TEST(TInterval, ArgumentChecks) {
  const PerformanceSeries s = series_of({1, 2, 3, 4});
  const FourierBasis b(0, 1.0);
  const std::vector<Episode> tau{5};
  Rng rng(1);
  EXPECT_THROW(prediction_interval_t(s, b, tau, 0.0, 100, rng), DomainError);
  EXPECT_THROW(prediction_interval_t(s, b, tau, 0.05, 20, rng), DomainError);
  const BootstrapDraws wrong = draw_rademacher(rng, 100, 3);
  EXPECT_THROW(prediction_interval_t(s, b, tau, 0.05, wrong), DomainError);
}

}  // namespace
}  // namespace spin
