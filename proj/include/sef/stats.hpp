#pragma once

// Friedman rank test with tie correction and two post-hoc pairwise tests
// (Nemenyi, Dunn) over a blocks x methods score table.

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sef {

enum class Direction { HigherBetter, LowerBetter };

const char* to_string(Direction d);

struct RankMatrix {
  Eigen::MatrixXd scores;  // blocks x methods
  Direction direction = Direction::HigherBetter;
  std::vector<std::string> methods;

  std::size_t blocks() const { return static_cast<std::size_t>(scores.rows()); }
  std::size_t methods_count() const { return static_cast<std::size_t>(scores.cols()); }
  /// Throws ConfigError/DataError on shape or NaN problems.
  void check() const;
};

struct PairwiseResult {
  std::size_t first = 0;
  std::size_t second = 0;
  double statistic = 0.0;
  double p_value = 1.0;
};

struct TestOutcome {
  double statistic = 0.0;
  double p_value = 1.0;
  std::vector<PairwiseResult> pairwise;  // (i, j) with i < j, lexicographic
  std::vector<double> rank_sums;
  double tie_correction = 1.0;
  std::size_t df = 0;
};

enum class Adjustment { None, Bonferroni };

/// Within-block ranks; rank 1 is best under the direction, ties get mid-ranks.
Eigen::MatrixXd rank_blocks(const RankMatrix& m);

TestOutcome friedman(const RankMatrix& m);

/// Pairwise p-values from the studentized range distribution with k groups
/// and infinite degrees of freedom.
TestOutcome nemenyi(const RankMatrix& m);

TestOutcome dunn(const RankMatrix& m, Adjustment adjustment);

/// Upper tail of chi-squared with df degrees of freedom.
double chi2_sf(double x, std::size_t df);

/// 1 - Phi(z).
double normal_sf(double z);

/// Inverse of the standard normal CDF.
double normal_quantile(double p);

/// P(range of k iid standard normals <= w), by quadrature.
double studentized_range_cdf(double w, std::size_t k);

struct StatsReport {
  std::string text;
  std::string csv;
};

/// Friedman always; Nemenyi and Dunn (Bonferroni) only when with_post_hoc.
/// Output depends only on the inputs, so identical matrices give identical bytes.
StatsReport stats_report(const RankMatrix& m, const std::string& metric, bool with_post_hoc);

}  // namespace sef
