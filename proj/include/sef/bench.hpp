#pragma once

// Experiment harness: SEF under repeated holdout or k-fold protocols, two
// baseline interval methods, and multi-method comparison tables that feed
// the rank tests in stats.hpp.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "sef/datasets.hpp"
#include "sef/metrics.hpp"
#include "sef/nn_core.hpp"
#include "sef/sef.hpp"
#include "sef/stats.hpp"

namespace sef {

enum class Method { Sef, Conformal, Gaussian };

const char* to_string(Method m);
/// Accepts "sef", "conformal", "gaussian" (any case). Throws ConfigError.
Method parse_method(std::string_view name);

struct ExperimentResult {
  Method method = Method::Sef;
  std::string dataset;
  std::string protocol;
  std::size_t block = 0;  // 1-based split or fold number
  MetricReport metrics;
  std::optional<double> mu;
  double wall_time_s = 0.0;
  IntervalPrediction prediction;
  Eigen::VectorXd targets;
};

/// One line of the results CSV. Mean rows carry block "mean".
struct ResultRow {
  std::string dataset;
  std::string protocol;
  std::string block;
  std::string method;
  double picp = 0.0;
  double mpiw = 0.0;
  double nmpiw = 0.0;
  std::optional<double> mu;
  double two_mu = 0.0;
  double crossings = 0.0;
  double wall_time_s = 0.0;
};

ResultRow to_row(const ExperimentResult& r);
/// Arithmetic mean of every numeric column; block is "mean".
ResultRow mean_row(std::span<const ExperimentResult> runs);

struct ProtocolResult {
  std::vector<ExperimentResult> runs;
  ResultRow mean;
};

struct BaselineResult {
  IntervalPrediction prediction;
  double half_width = 0.0;
};

/// Number of worker threads for independent runs; 0 picks the hardware count.
struct Parallelism {
  std::size_t threads = 1;
};

/// Fits SEF on every training side of the plan and evaluates on its test side.
/// Split i trains with seed derive_seed(config.seed, i).
ProtocolResult run_sef_protocol(const Dataset& data, const SplitPlan& plan, double gamma,
                                const NetworkConfig& config, Parallelism par = {});

/// Split-conformal width: the ceil((m + 1) * gamma)-th smallest absolute
/// calibration residual, capped at the largest one.
double conformal_quantile(std::span<const double> abs_residuals, double gamma);

/// Point network on a proper-training slice, constant half-width from the
/// held-out calibration slice.
BaselineResult baseline_conformal(const Dataset& train, const Dataset& test, double gamma,
                                  const NetworkConfig& config, double calibration_fraction = 0.2);

/// Point network on all of train, half-width z_{(1+gamma)/2} * sd(training residuals).
BaselineResult baseline_gaussian(const Dataset& train, const Dataset& test, double gamma,
                                 const NetworkConfig& config);

enum class Metric { Picp, Nmpiw };

struct ComparisonTable {
  std::vector<Method> methods;
  std::vector<std::string> blocks;  // row labels
  Eigen::MatrixXd picp;             // blocks x methods
  Eigen::MatrixXd nmpiw;            // blocks x methods
  std::vector<ExperimentResult> runs;
  std::vector<ResultRow> means;     // one per method

  RankMatrix rank_matrix(Metric metric) const;
};

/// Every method runs on the same (dataset, split) blocks. Blocks are the
/// splits of each dataset in order; block b seeds its networks with
/// derive_seed(config.seed, b) for every method.
ComparisonTable compare_methods(std::span<const Dataset> datasets, const SplitPlan& plan,
                                double gamma, const NetworkConfig& config,
                                std::span<const Method> methods, Parallelism par = {});

std::string results_csv_header();
/// wall_time_s is left empty unless include_wall_time is set, which keeps the
/// file reproducible byte for byte.
std::string results_csv(std::span<const ResultRow> rows, bool include_wall_time);
std::vector<ResultRow> parse_results_csv(std::string_view text);

/// Rebuilds PICP and NMPIW matrices from non-mean rows of a results CSV.
ComparisonTable comparison_from_rows(std::span<const ResultRow> rows);

/// Markdown in the layout "Block | mu | PICP | MPIW | 2mu" with a mean row.
std::string protocol_markdown(const ProtocolResult& result);
/// Markdown "Block | <method> PICP | <method> NMPIW | ..." with a mean row.
std::string comparison_markdown(const ComparisonTable& table);

}  // namespace sef
