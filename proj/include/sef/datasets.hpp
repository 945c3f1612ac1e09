#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sef {

struct Dataset {
  Eigen::MatrixXd x;  // n x d
  Eigen::VectorXd y;
  std::string name;
  std::uint64_t seed = 0;

  std::size_t size() const { return static_cast<std::size_t>(y.size()); }
  std::size_t dim() const { return static_cast<std::size_t>(x.cols()); }
  /// Throws DataError on empty data, mismatched rows or non-finite values.
  void check() const;
};

/// 1.5 * sin(x)
double trig_mean(double x);
/// 10 + 3t + t * sin(2t)
double hetero_mean(double t);
/// Noise standard deviation sqrt(t + 0.01) of the heteroscedastic benchmark.
double hetero_noise_sd(double t);

/// x ~ U[-2pi, 2pi], y = 1.5 sin(x) + N(0, noise_sd^2). noise_sd is a
/// standard deviation.
Dataset gen_homoscedastic(std::size_t n, double noise_sd, std::uint64_t seed,
                          bool sorted = false);

/// t ~ U[0, 4pi], y = 10 + 3t + t sin(2t) + N(0, t + 0.01).
Dataset gen_heteroscedastic(std::size_t n, std::uint64_t seed, bool sorted = false);

/// Header x1,...,xd,y then one numeric row per sample.
Dataset load_csv(const std::filesystem::path& path);
void save_csv(const Dataset& data, const std::filesystem::path& path);

Dataset subset(const Dataset& data, std::span<const std::size_t> rows);

struct SplitPlan {
  enum class Kind { RandomHoldout, KFold };
  Kind kind = Kind::KFold;
  double train_fraction = 0.8;  // RandomHoldout
  std::size_t repeats = 1;      // RandomHoldout: independent random splits
  std::size_t k = 5;            // KFold
  std::uint64_t seed = 0;

  static SplitPlan holdout(double train_fraction, std::size_t repeats, std::uint64_t seed);
  static SplitPlan kfold(std::size_t k, std::uint64_t seed);

  /// Short label such as "kfold5" or "holdout0.8x5".
  std::string describe() const;
};

struct Split {
  std::vector<std::size_t> train;  // ascending
  std::vector<std::size_t> test;   // ascending
};

std::vector<Split> split(std::size_t n, const SplitPlan& plan);

}  // namespace sef
