#pragma once

// Shifted-error-function prediction intervals: one point network, a
// displacement constant mu taken from the sorted training residuals, and two
// bound networks trained against y - mu and y + mu.

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sef/nn_core.hpp"

namespace sef {

struct Residuals {
  std::vector<double> values;  // prediction - target
  std::vector<double> sorted;  // ascending
};

struct QuantileIndices {
  std::size_t m1 = 1;  // 1-based
  std::size_t m2 = 1;  // 1-based
};

struct ShiftConstant {
  double mu = 0.0;
  std::size_t m1 = 1;
  std::size_t m2 = 1;
  double gamma = 0.95;
};

struct SefModel {
  Network approx;
  Network lower;
  Network upper;
  ShiftConstant shift;
  NetworkConfig config;
  TrainReport approx_report;
  TrainReport lower_report;
  TrainReport upper_report;
};

struct IntervalPrediction {
  Eigen::VectorXd point;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  std::size_t size() const { return static_cast<std::size_t>(point.size()); }
  /// Throws ShapeError/DataError if lengths differ or any entry is not finite.
  void check() const;
};

Residuals compute_residuals(std::span<const double> predictions, std::span<const double> targets);

/// m1 = floor((1-gamma)/2 * n) raised to 1 when it is 0;
/// m2 = ceil((1+gamma)/2 * n) clamped to n.
QuantileIndices quantile_indices(std::size_t n, double gamma);

/// mu = max(|delta_m1|, |delta_m2|) over the sorted residuals.
ShiftConstant compute_mu(const Residuals& residuals, double gamma);

/// Steps run in order: point network (shift 0), mu from its residuals on the
/// whole training partition, lower network (shift -mu), upper network
/// (shift +mu). The three trainings use config.seed, +1 and +2.
SefModel fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double gamma,
             const NetworkConfig& config);

IntervalPrediction predict(const SefModel& model, const Eigen::MatrixXd& x);

/// Throws DomainError unless gamma lies strictly inside (0, 1).
void check_gamma(double gamma);

}  // namespace sef
