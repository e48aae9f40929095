#include "spin/forecast.hpp"

#include "spin/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace spin {

namespace {

constexpr double kRankTolerance = 1e-10;

}  // namespace

FourierBasis::FourierBasis(int order, double time_scale)
    : order_(order), time_scale_(time_scale) {
  if (order < 0) throw DomainError("Fourier order must be non-negative");
  if (!(time_scale > 0.0) || !std::isfinite(time_scale)) {
    throw DomainError("Fourier time scale must be positive");
  }
}

Eigen::RowVectorXd FourierBasis::row(Episode episode) const {
  if (episode < 0) throw DomainError("episode index must be non-negative");
  const double x = static_cast<double>(episode) / time_scale_;
  const double inv_c = 1.0 / std::sqrt(static_cast<double>(order_) + 1.0);
  Eigen::RowVectorXd r(dim());
  for (int n = 1; n <= order_; ++n) {
    const double arg = 2.0 * std::numbers::pi * n * x;
    r(n - 1) = std::sin(arg) * inv_c;
    r(order_ + n - 1) = std::cos(arg) * inv_c;
  }
  r(2 * order_) = inv_c;
  return r;
}

Eigen::MatrixXd FourierBasis::design(std::span<const Episode> episodes) const {
  Eigen::MatrixXd phi(static_cast<Eigen::Index>(episodes.size()), dim());
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    phi.row(static_cast<Eigen::Index>(i)) = row(episodes[i]);
  }
  return phi;
}

RegressionFit fit(const FourierBasis& basis, const PerformanceSeries& series) {
  series.validate();
  const auto k = static_cast<Eigen::Index>(series.size());
  const Eigen::Index p = basis.dim();
  if (k < p + 1) {
    throw SingularDesignError("least squares with " + std::to_string(p) + " parameters needs at least " +
                              std::to_string(p + 1) + " points, got " + std::to_string(k));
  }

  RegressionFit out;
  out.episodes = series.episodes;
  out.phi = basis.design(series.episodes);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(out.phi);
  qr.setThreshold(kRankTolerance);
  if (qr.rank() < p) {
    throw SingularDesignError("design matrix has rank " + std::to_string(qr.rank()) + " < " +
                              std::to_string(p));
  }
  // H = P R^-1 Q1^T with Q1 the thin orthonormal factor.
  const Eigen::MatrixXd q1 = qr.householderQ() * Eigen::MatrixXd::Identity(k, p);
  const Eigen::MatrixXd r_inv_q1t = qr.matrixR()
                                        .topLeftCorner(p, p)
                                        .triangularView<Eigen::Upper>()
                                        .solve(q1.transpose());
  out.hat_core = qr.colsPermutation() * r_inv_q1t;
  return refit(out, series.estimates);
}

RegressionFit refit(const RegressionFit& base, const Eigen::VectorXd& y) {
  if (y.size() != base.phi.rows()) throw DomainError("target length does not match design");
  RegressionFit out;
  out.episodes = base.episodes;
  out.phi = base.phi;
  out.hat_core = base.hat_core;
  out.y = y;
  out.w_hat = out.hat_core * y;
  out.y_hat = out.phi * out.w_hat;
  out.residuals = y - out.y_hat;
  return out;
}

Eigen::RowVectorXd forecast_weights(const RegressionFit& fit, const FourierBasis& basis,
                                    std::span<const Episode> tau) {
  if (tau.empty()) throw DomainError("forecast needs at least one future episode");
  const Episode last = fit.episodes.empty() ? 0 : fit.episodes.back();
  Eigen::RowVectorXd mean_row = Eigen::RowVectorXd::Zero(basis.dim());
  for (Episode t : tau) {
    if (t <= last) {
      throw DomainError("forecast episode " + std::to_string(t) +
                        " is not after the last fitted episode " + std::to_string(last));
    }
    mean_row += basis.row(t);
  }
  mean_row /= static_cast<double>(tau.size());
  return mean_row * fit.hat_core;
}

Forecast forecast_with_weights(const RegressionFit& fit, const Eigen::RowVectorXd& weights) {
  // mean(phi_tau H Omega H^T phi_tau^T) over all |tau|^2 entries equals
  // c Omega c^T with c the averaged row times H.
  Forecast out;
  out.rho_hat = weights.dot(fit.y);
  out.variance = (weights.array().square() * fit.residuals.transpose().array().square()).sum();
  out.residuals = fit.residuals;
  return out;
}

Forecast forecast(const RegressionFit& fit, const FourierBasis& basis,
                  std::span<const Episode> tau) {
  return forecast_with_weights(fit, forecast_weights(fit, basis, tau));
}

std::vector<Episode> future_episodes(Episode last, int delta) {
  std::vector<Episode> tau;
  tau.reserve(static_cast<std::size_t>(std::max(delta, 0)));
  for (int j = 1; j <= delta; ++j) tau.push_back(last + j);
  return tau;
}

}  // namespace spin
