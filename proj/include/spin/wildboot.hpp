#pragma once

#include "spin/forecast.hpp"
#include "spin/ope.hpp"
#include "spin/rng.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace spin {

/// B x k matrix of Rademacher signs, one row per bootstrap replicate.
struct BootstrapDraws {
  Eigen::MatrixXd signs;

  int replicates() const noexcept { return static_cast<int>(signs.rows()); }
  int length() const noexcept { return static_cast<int>(signs.cols()); }
};

BootstrapDraws draw_rademacher(Rng& rng, int replicates, int length);

enum class IntervalMethod { TStatistic, Percentile };

struct PredictionInterval {
  double lb = 0.0;
  double ub = 0.0;
  double rho_hat = 0.0;
  IntervalMethod method = IntervalMethod::TStatistic;
};

/// 0-based positions of the alpha/2 and 1 - alpha/2 order statistics among B
/// sorted values: floor(alpha/2 B) - 1 and ceil((1 - alpha/2) B) - 1, clamped
/// to [0, B - 1].
struct OrderPositions {
  int lower = 0;
  int upper = 0;
};

OrderPositions order_positions(double alpha, int replicates);

/// Replicate indices sorted by (value, index).
std::vector<int> stable_order(const Eigen::VectorXd& values);

/// Wild-bootstrap t-statistic interval for the mean performance over tau.
/// Each replicate refits Y* = Y_hat + residuals .* sigma*_b on the cached
/// design and studentizes (rho*_b - rho_hat) / sqrt(V*_b); V*_b = 0 gives
/// t*_b = 0.
PredictionInterval prediction_interval_t(const PerformanceSeries& series,
                                         const FourierBasis& basis,
                                         std::span<const Episode> tau, double alpha,
                                         const BootstrapDraws& draws);

/// As above, drawing B sign vectors from `rng`.
PredictionInterval prediction_interval_t(const PerformanceSeries& series,
                                         const FourierBasis& basis,
                                         std::span<const Episode> tau, double alpha, int replicates,
                                         Rng& rng);

struct PercentileInterval {
  PredictionInterval interval;
  int lower_replicate = 0;  // replicate sitting at the lower order statistic
  int upper_replicate = 0;
  Eigen::VectorXd replicate_forecasts;
};

/// Percentile interval from the replicate forecasts rho*_b themselves.
PercentileInterval prediction_interval_percentile(const PerformanceSeries& series,
                                                  const FourierBasis& basis,
                                                  std::span<const Episode> tau, double alpha,
                                                  const BootstrapDraws& draws);

/// Replicate forecasts as linear maps of the targets on a fixed design:
/// rho*_b = coefficients.row(b) * Y, where row b = c + M (c .* sigma_b),
/// c the forecast weights and M = I - phi H the residual projector.
class LinearReplicates {
 public:
  LinearReplicates(const RegressionFit& fit, const Eigen::RowVectorXd& weights,
                   const BootstrapDraws& draws);

  const Eigen::MatrixXd& coefficients() const noexcept { return coefficients_; }
  Eigen::VectorXd forecasts(const Eigen::VectorXd& y) const { return coefficients_ * y; }

 private:
  Eigen::MatrixXd coefficients_;  // B x k
};

}  // namespace spin
