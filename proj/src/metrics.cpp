#include "sef/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "sef/error.hpp"

namespace sef {

namespace {
std::span<const double> view(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}
}  // namespace

std::vector<std::uint8_t> coverage_vector(std::span<const double> targets,
                                          std::span<const double> lower,
                                          std::span<const double> upper) {
  if (targets.size() != lower.size() || targets.size() != upper.size()) {
    throw ShapeError("targets and bounds differ in length");
  }
  std::vector<std::uint8_t> k(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    k[i] = (lower[i] <= targets[i] && targets[i] <= upper[i]) ? 1 : 0;
  }
  return k;
}

double picp(std::span<const std::uint8_t> coverage) {
  if (coverage.empty()) throw DataError("PICP of an empty coverage vector");
  const auto covered = std::count(coverage.begin(), coverage.end(), std::uint8_t{1});
  return static_cast<double>(covered) / static_cast<double>(coverage.size());
}

double mpiw(std::span<const double> lower, std::span<const double> upper) {
  if (lower.size() != upper.size()) throw ShapeError("bounds differ in length");
  if (lower.empty()) throw DataError("MPIW of an empty interval set");
  double sum = 0.0;
  for (std::size_t i = 0; i < lower.size(); ++i) sum += upper[i] - lower[i];
  return sum / static_cast<double>(lower.size());
}

double nmpiw(double mpiw_value, std::span<const double> targets) {
  if (targets.empty()) throw DataError("NMPIW needs targets");
  const auto [lo, hi] = std::minmax_element(targets.begin(), targets.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) throw DomainError("target range is zero; NMPIW undefined");
  return mpiw_value / range;
}

std::size_t crossing_count(std::span<const double> lower, std::span<const double> upper) {
  if (lower.size() != upper.size()) throw ShapeError("bounds differ in length");
  std::size_t count = 0;
  for (std::size_t i = 0; i < lower.size(); ++i) count += lower[i] > upper[i] ? 1 : 0;
  return count;
}

MetricReport evaluate(std::span<const double> targets, const IntervalPrediction& prediction,
                      double mu) {
  if (targets.empty()) throw DataError("cannot evaluate on an empty test set");
  if (prediction.size() != targets.size()) {
    throw ShapeError("prediction and target lengths differ");
  }
  const auto lower = view(prediction.lower);
  const auto upper = view(prediction.upper);
  MetricReport r;
  r.n = targets.size();
  const auto k = coverage_vector(targets, lower, upper);
  r.picp = picp(k);
  r.mpiw = mpiw(lower, upper);
  const auto [lo, hi] = std::minmax_element(targets.begin(), targets.end());
  r.range_r = *hi - *lo;
  r.nmpiw = nmpiw(r.mpiw, targets);
  r.two_mu = 2.0 * mu;
  r.crossings = crossing_count(lower, upper);
  return r;
}

}  // namespace sef
