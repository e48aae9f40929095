#pragma once

#include "spin/envsim.hpp"
#include "spin/ope.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace spin {

/// Normalized Fourier features of an episode index.
///
/// Episode i maps to x = i / time_scale and the row is
///   [sin(2 pi n x) / C]_{n=1..order} ++ [cos(2 pi n x) / C]_{n=1..order} ++ [1 / C]
/// with C = sqrt(order + 1), so every row has unit norm. Order 0 is the
/// constant basis [1].
class FourierBasis {
 public:
  FourierBasis(int order, double time_scale);

  int order() const noexcept { return order_; }
  double time_scale() const noexcept { return time_scale_; }
  int dim() const noexcept { return 2 * order_ + 1; }

  Eigen::RowVectorXd row(Episode episode) const;
  Eigen::MatrixXd design(std::span<const Episode> episodes) const;

 private:
  int order_;
  double time_scale_;
};

/// Least-squares fit of a performance series on a fixed design.
struct RegressionFit {
  std::vector<Episode> episodes;
  Eigen::MatrixXd phi;        // k x p
  Eigen::VectorXd y;          // targets
  Eigen::VectorXd w_hat;      // p
  Eigen::VectorXd y_hat;      // phi * w_hat
  Eigen::VectorXd residuals;  // y - y_hat
  Eigen::MatrixXd hat_core;   // H = (phi^T phi)^{-1} phi^T, p x k

  Eigen::Index size() const noexcept { return phi.rows(); }
};

/// Column-pivoted QR least squares. Requires more points than parameters
/// and a numerically full-rank design (pivot ratio above 1e-10); throws
/// SingularDesignError otherwise.
RegressionFit fit(const FourierBasis& basis, const PerformanceSeries& series);

/// Same design, new targets: reuses phi and hat_core.
RegressionFit refit(const RegressionFit& base, const Eigen::VectorXd& y);

struct Forecast {
  double rho_hat = 0.0;     // mean over tau of phi(tau_j) w_hat
  double variance = 0.0;    // mean of phi_tau H Omega H^T phi_tau^T, Omega = diag(residual^2)
  Eigen::VectorXd residuals;
};

/// Row vector c with rho_hat = c * y for any targets on this design:
/// c = mean_j phi(tau_j) * H. Validates tau.
Eigen::RowVectorXd forecast_weights(const RegressionFit& fit, const FourierBasis& basis,
                                    std::span<const Episode> tau);

/// Mean forecast over the future episodes tau and its heteroscedasticity
/// consistent variance. tau must be non-empty and lie after the last fitted
/// episode.
Forecast forecast(const RegressionFit& fit, const FourierBasis& basis,
                  std::span<const Episode> tau);

/// Same as forecast() with the weights already computed.
Forecast forecast_with_weights(const RegressionFit& fit, const Eigen::RowVectorXd& weights);

/// tau = [k+1, ..., k+delta].
std::vector<Episode> future_episodes(Episode last, int delta);

}  // namespace spin
