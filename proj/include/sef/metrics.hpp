#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sef/sef.hpp"

namespace sef {

struct MetricReport {
  double picp = 0.0;
  double mpiw = 0.0;
  double nmpiw = 0.0;
  double two_mu = 0.0;
  std::size_t crossings = 0;
  std::size_t n = 0;
  double range_r = 0.0;
};

/// k_i = 1 iff lower_i <= y_i <= upper_i.
std::vector<std::uint8_t> coverage_vector(std::span<const double> targets,
                                          std::span<const double> lower,
                                          std::span<const double> upper);

double picp(std::span<const std::uint8_t> coverage);

/// Mean of upper - lower. Crossed bounds contribute negative widths.
double mpiw(std::span<const double> lower, std::span<const double> upper);

/// mpiw divided by the range of the given targets.
double nmpiw(double mpiw_value, std::span<const double> targets);

/// Number of rows with lower > upper.
std::size_t crossing_count(std::span<const double> lower, std::span<const double> upper);

MetricReport evaluate(std::span<const double> targets, const IntervalPrediction& prediction,
                      double mu);

}  // namespace sef
