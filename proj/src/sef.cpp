#include "sef/sef.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "sef/error.hpp"

namespace sef {

namespace {

// floor/ceil that ignore round-off of a few ulps around an integer, so that
// e.g. 0.975 * 1000 yields 975 rather than 976.
double snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) <= 1e-9 * std::max(1.0, std::abs(v)) ? r : v;
}

}  // namespace

void check_gamma(double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw DomainError(fmt::format("gamma must lie in (0, 1), got {}", gamma));
  }
}

void IntervalPrediction::check() const {
  if (point.size() != lower.size() || point.size() != upper.size()) {
    throw ShapeError("interval prediction vectors differ in length");
  }
  if (!point.allFinite() || !lower.allFinite() || !upper.allFinite()) {
    throw DataError("interval prediction contains NaN or Inf");
  }
}

Residuals compute_residuals(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size()) {
    throw ShapeError("predictions and targets differ in length");
  }
  if (predictions.empty()) throw DataError("no residuals to compute");
  Residuals r;
  r.values.resize(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) r.values[i] = predictions[i] - targets[i];
  r.sorted = r.values;
  std::stable_sort(r.sorted.begin(), r.sorted.end());
  return r;
}

QuantileIndices quantile_indices(std::size_t n, double gamma) {
  check_gamma(gamma);
  if (n == 0) throw DataError("quantile indices of an empty sample");
  const auto nd = static_cast<double>(n);
  auto m1 = static_cast<std::size_t>(std::floor(snap((1.0 - gamma) / 2.0 * nd)));
  auto m2 = static_cast<std::size_t>(std::ceil(snap((1.0 + gamma) / 2.0 * nd)));
  m1 = std::max<std::size_t>(m1, 1);
  m2 = std::min(m2, n);
  return {m1, m2};
}

ShiftConstant compute_mu(const Residuals& residuals, double gamma) {
  if (residuals.sorted.empty()) throw DataError("no residuals");
  const auto [m1, m2] = quantile_indices(residuals.sorted.size(), gamma);
  const double mu = std::max(std::abs(residuals.sorted[m1 - 1]), std::abs(residuals.sorted[m2 - 1]));
  return {mu, m1, m2, gamma};
}

SefModel fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double gamma,
             const NetworkConfig& config) {
  check_gamma(gamma);
  SefModel model;
  model.config = config;

  NetworkConfig cfg = config;
  auto approx = train(cfg, x, y, 0.0);
  model.approx = std::move(approx.network);
  model.approx_report = approx.report;

  const Eigen::VectorXd fitted = sef::predict(model.approx, x);
  const auto residuals = compute_residuals(std::span<const double>(fitted.data(), fitted.size()),
                                           std::span<const double>(y.data(), y.size()));
  model.shift = compute_mu(residuals, gamma);

  cfg.seed = config.seed + 1;
  auto lower = train(cfg, x, y, -model.shift.mu);
  model.lower = std::move(lower.network);
  model.lower_report = lower.report;

  cfg.seed = config.seed + 2;
  auto upper = train(cfg, x, y, model.shift.mu);
  model.upper = std::move(upper.network);
  model.upper_report = upper.report;
  return model;
}

IntervalPrediction predict(const SefModel& model, const Eigen::MatrixXd& x) {
  IntervalPrediction out{sef::predict(model.approx, x), sef::predict(model.lower, x),
                         sef::predict(model.upper, x)};
  return out;
}

}  // namespace sef
