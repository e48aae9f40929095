#include "spin/wildboot.hpp"

#include "spin/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace spin {

namespace {

void check_interval_args(double alpha, int replicates, int draw_length, std::size_t k) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  if (replicates < 1) throw DomainError("need at least one bootstrap replicate");
  if (static_cast<double>(replicates) * alpha < 2.0 - 1e-12) {
    throw DomainError("need B >= 2/alpha replicates, got B = " + std::to_string(replicates));
  }
  if (static_cast<std::size_t>(draw_length) != k) {
    throw DomainError("bootstrap draws have length " + std::to_string(draw_length) +
                      " but the series has " + std::to_string(k) + " points");
  }
}

}  // namespace

BootstrapDraws draw_rademacher(Rng& rng, int replicates, int length) {
  if (replicates < 1 || length < 1) throw DomainError("draw sizes must be positive");
  BootstrapDraws d;
  d.signs.resize(replicates, length);
  // One 64-bit draw supplies 64 signs, filled in storage (column) order.
  double* out = d.signs.data();
  const Eigen::Index total = d.signs.size();
  for (Eigen::Index i = 0; i < total; i += 64) {
    std::uint64_t bits = rng.next_u64();
    const Eigen::Index end = std::min<Eigen::Index>(total, i + 64);
    for (Eigen::Index j = i; j < end; ++j, bits >>= 1) out[j] = (bits & 1U) != 0 ? 1.0 : -1.0;
  }
  return d;
}

OrderPositions order_positions(double alpha, int replicates) {
  const double b = static_cast<double>(replicates);
  // Tiny slack so that e.g. 0.025 * 400 lands on 10, not 9.999...
  const auto lo = static_cast<long>(std::floor(alpha / 2.0 * b + 1e-9)) - 1;
  const auto hi = static_cast<long>(std::ceil((1.0 - alpha / 2.0) * b - 1e-9)) - 1;
  OrderPositions pos;
  pos.lower = static_cast<int>(std::clamp<long>(lo, 0, replicates - 1));
  pos.upper = static_cast<int>(std::clamp<long>(hi, 0, replicates - 1));
  return pos;
}

std::vector<int> stable_order(const Eigen::VectorXd& values) {
  std::vector<int> idx(static_cast<std::size_t>(values.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (values(a) != values(b)) return values(a) < values(b);
    return a < b;
  });
  return idx;
}

PredictionInterval prediction_interval_t(const PerformanceSeries& series,
                                         const FourierBasis& basis,
                                         std::span<const Episode> tau, double alpha,
                                         const BootstrapDraws& draws) {
  check_interval_args(alpha, draws.replicates(), draws.length(), series.size());
  const RegressionFit f = fit(basis, series);
  const Eigen::RowVectorXd c = forecast_weights(f, basis, tau);
  const Forecast base = forecast_with_weights(f, c);
  const Eigen::RowVectorXd c2 = c.array().square().matrix();

  // All replicates at once: row b of y_star is y_hat + residuals .* sigma_b,
  // refitted through the same hat matrix.
  const int b_count = draws.replicates();
  Eigen::MatrixXd y_star = draws.signs.array().rowwise() * f.residuals.transpose().array();
  y_star.rowwise() += f.y_hat.transpose();
  const Eigen::VectorXd rho_star = y_star * c.transpose();
  const Eigen::MatrixXd w_star = y_star * f.hat_core.transpose();
  y_star.noalias() -= w_star * f.phi.transpose();
  const Eigen::VectorXd v_star = y_star.array().square().matrix() * c2.transpose();
  Eigen::VectorXd t_star(b_count);
  for (int b = 0; b < b_count; ++b) {
    t_star(b) = v_star(b) > 0.0 ? (rho_star(b) - base.rho_hat) / std::sqrt(v_star(b)) : 0.0;
  }

  const auto order = stable_order(t_star);
  const auto pos = order_positions(alpha, b_count);
  const double s_hat = std::sqrt(base.variance);
  PredictionInterval pi;
  pi.method = IntervalMethod::TStatistic;
  pi.rho_hat = base.rho_hat;
  pi.lb = base.rho_hat - t_star(order[static_cast<std::size_t>(pos.upper)]) * s_hat;
  pi.ub = base.rho_hat - t_star(order[static_cast<std::size_t>(pos.lower)]) * s_hat;
  return pi;
}

PredictionInterval prediction_interval_t(const PerformanceSeries& series,
                                         const FourierBasis& basis,
                                         std::span<const Episode> tau, double alpha, int replicates,
                                         Rng& rng) {
  const BootstrapDraws draws =
      draw_rademacher(rng, replicates, static_cast<int>(std::max<std::size_t>(series.size(), 1)));
  return prediction_interval_t(series, basis, tau, alpha, draws);
}

PercentileInterval prediction_interval_percentile(const PerformanceSeries& series,
                                                  const FourierBasis& basis,
                                                  std::span<const Episode> tau, double alpha,
                                                  const BootstrapDraws& draws) {
  check_interval_args(alpha, draws.replicates(), draws.length(), series.size());
  const RegressionFit f = fit(basis, series);
  const Eigen::RowVectorXd c = forecast_weights(f, basis, tau);

  PercentileInterval out;
  Eigen::MatrixXd y_star = draws.signs.array().rowwise() * f.residuals.transpose().array();
  y_star.rowwise() += f.y_hat.transpose();
  out.replicate_forecasts = y_star * c.transpose();
  const auto order = stable_order(out.replicate_forecasts);
  const auto pos = order_positions(alpha, draws.replicates());
  out.lower_replicate = order[static_cast<std::size_t>(pos.lower)];
  out.upper_replicate = order[static_cast<std::size_t>(pos.upper)];
  out.interval.method = IntervalMethod::Percentile;
  out.interval.rho_hat = c.dot(f.y);
  out.interval.lb = out.replicate_forecasts(out.lower_replicate);
  out.interval.ub = out.replicate_forecasts(out.upper_replicate);
  return out;
}

LinearReplicates::LinearReplicates(const RegressionFit& fit, const Eigen::RowVectorXd& weights,
                                   const BootstrapDraws& draws) {
  if (draws.length() != fit.phi.rows()) throw DomainError("draws do not match the design");
  // u_b = c .* sigma_b; row_b = c + u_b - (phi H u_b)^T.
  const Eigen::MatrixXd u = draws.signs.array().rowwise() * weights.array();
  coefficients_ = u - (u * fit.hat_core.transpose()) * fit.phi.transpose();
  coefficients_.rowwise() += weights;
}

}  // namespace spin
