#include "sef/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <fmt/format.h>

#include "sef/error.hpp"

namespace sef {

namespace {

void require_friedman_shape(const RankMatrix& m) {
  m.check();
  if (m.methods_count() < 3) {
    throw ConfigError(fmt::format("Friedman test needs at least 3 methods, got {}",
                                  m.methods_count()));
  }
}

double pair_scale(std::size_t n, std::size_t k) {
  const auto kd = static_cast<double>(k);
  return std::sqrt(kd * (kd + 1.0) / (6.0 * static_cast<double>(n)));
}

std::vector<double> rank_means(const Eigen::MatrixXd& ranks) {
  std::vector<double> means(static_cast<std::size_t>(ranks.cols()));
  for (Eigen::Index j = 0; j < ranks.cols(); ++j) {
    means[static_cast<std::size_t>(j)] = ranks.col(j).mean();
  }
  return means;
}

std::vector<double> rank_sums_of(const Eigen::MatrixXd& ranks) {
  std::vector<double> sums(static_cast<std::size_t>(ranks.cols()));
  for (Eigen::Index j = 0; j < ranks.cols(); ++j) {
    sums[static_cast<std::size_t>(j)] = ranks.col(j).sum();
  }
  return sums;
}

double standard_normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double standard_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

const char* to_string(Direction d) {
  return d == Direction::HigherBetter ? "higher_better" : "lower_better";
}

void RankMatrix::check() const {
  if (blocks() < 2) throw ConfigError("rank matrix needs at least 2 blocks");
  if (methods_count() < 2) throw ConfigError("rank matrix needs at least 2 methods");
  if (!methods.empty() && methods.size() != methods_count()) {
    throw ConfigError("method names do not match the score columns");
  }
  if (scores.hasNaN()) throw DataError("rank matrix contains NaN");
}

Eigen::MatrixXd rank_blocks(const RankMatrix& m) {
  m.check();
  const auto k = m.scores.cols();
  Eigen::MatrixXd ranks(m.scores.rows(), k);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
  for (Eigen::Index b = 0; b < m.scores.rows(); ++b) {
    const auto row = m.scores.row(b);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index c) {
      return m.direction == Direction::HigherBetter ? row(a) > row(c) : row(a) < row(c);
    });
    std::size_t i = 0;
    while (i < order.size()) {
      std::size_t j = i;
      while (j + 1 < order.size() && row(order[j + 1]) == row(order[i])) ++j;
      const double mid = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (std::size_t t = i; t <= j; ++t) ranks(b, order[t]) = mid;
      i = j + 1;
    }
  }
  return ranks;
}

TestOutcome friedman(const RankMatrix& m) {
  require_friedman_shape(m);
  const Eigen::MatrixXd ranks = rank_blocks(m);
  const auto n = static_cast<double>(m.blocks());
  const auto k = static_cast<double>(m.methods_count());

  TestOutcome out;
  out.rank_sums = rank_sums_of(ranks);
  out.df = m.methods_count() - 1;
  double sum_sq = 0.0;
  for (double r : out.rank_sums) sum_sq += r * r;
  const double raw = 12.0 / (n * k * (k + 1.0)) * sum_sq - 3.0 * n * (k + 1.0);

  // Tie groups are runs of equal mid-ranks within a block.
  double tie_sum = 0.0;
  for (Eigen::Index b = 0; b < ranks.rows(); ++b) {
    std::vector<double> row(ranks.row(b).begin(), ranks.row(b).end());
    std::sort(row.begin(), row.end());
    std::size_t i = 0;
    while (i < row.size()) {
      std::size_t j = i;
      while (j + 1 < row.size() && row[j + 1] == row[i]) ++j;
      const auto t = static_cast<double>(j - i + 1);
      tie_sum += t * t * t - t;
      i = j + 1;
    }
  }
  out.tie_correction = 1.0 - tie_sum / (n * (k * k * k - k));
  // Every block fully tied: no evidence against the null.
  out.statistic = out.tie_correction > 0.0 ? raw / out.tie_correction : 0.0;
  out.p_value = chi2_sf(out.statistic, out.df);
  return out;
}

TestOutcome nemenyi(const RankMatrix& m) {
  TestOutcome out = friedman(m);
  const Eigen::MatrixXd ranks = rank_blocks(m);
  const auto means = rank_means(ranks);
  const std::size_t k = m.methods_count();
  const double scale = pair_scale(m.blocks(), k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      const double q = std::abs(means[i] - means[j]) / scale;
      const double p = std::clamp(1.0 - studentized_range_cdf(q * std::numbers::sqrt2, k), 0.0, 1.0);
      out.pairwise.push_back({i, j, q, p});
    }
  }
  return out;
}

TestOutcome dunn(const RankMatrix& m, Adjustment adjustment) {
  TestOutcome out = friedman(m);
  const Eigen::MatrixXd ranks = rank_blocks(m);
  const auto means = rank_means(ranks);
  const std::size_t k = m.methods_count();
  const double scale = pair_scale(m.blocks(), k);
  const double pairs = static_cast<double>(k * (k - 1) / 2);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      const double z = (means[i] - means[j]) / scale;
      double p = 2.0 * normal_sf(std::abs(z));
      if (adjustment == Adjustment::Bonferroni) p = std::min(1.0, p * pairs);
      out.pairwise.push_back({i, j, z, p});
    }
  }
  return out;
}

double chi2_sf(double x, std::size_t df) {
  if (df == 0) throw DomainError("chi-squared needs df >= 1");
  if (!(x >= 0.0)) throw DomainError("chi-squared statistic must be non-negative");
  if (x == 0.0) return 1.0;
  return boost::math::gamma_q(static_cast<double>(df) / 2.0, x / 2.0);
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("normal quantile needs p in (0, 1)");
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double studentized_range_cdf(double w, std::size_t k) {
  if (k < 2) throw DomainError("studentized range needs k >= 2");
  if (!(w > 0.0)) return 0.0;
  // k * integral phi(z) [Phi(z + w) - Phi(z)]^(k-1) dz, composite Simpson.
  constexpr double lo = -9.0;
  const double hi = 9.0;
  constexpr int intervals = 4000;
  const double h = (hi - lo) / intervals;
  const auto integrand = [&](double z) {
    const double inner = standard_normal_cdf(z + w) - standard_normal_cdf(z);
    return standard_normal_pdf(z) * std::pow(inner, static_cast<double>(k - 1));
  };
  double sum = integrand(lo) + integrand(hi);
  for (int i = 1; i < intervals; ++i) {
    sum += integrand(lo + i * h) * ((i % 2 == 1) ? 4.0 : 2.0);
  }
  return std::clamp(static_cast<double>(k) * sum * h / 3.0, 0.0, 1.0);
}

StatsReport stats_report(const RankMatrix& m, const std::string& metric, bool with_post_hoc) {
  const auto f = friedman(m);
  const std::size_t k = m.methods_count();
  std::vector<std::string> names = m.methods;
  if (names.empty()) {
    for (std::size_t j = 0; j < k; ++j) names.push_back(fmt::format("m{}", j + 1));
  }
  const Eigen::MatrixXd ranks = rank_blocks(m);

  StatsReport r;
  r.text += fmt::format("metric: {} ({})\n", metric, to_string(m.direction));
  r.text += fmt::format("blocks: {}  methods: {}\n", m.blocks(), k);
  r.text += "mean ranks:";
  for (std::size_t j = 0; j < k; ++j) {
    r.text += fmt::format(" {}={:.4f}", names[j], ranks.col(static_cast<Eigen::Index>(j)).mean());
  }
  r.text += "\nrank sums:";
  for (std::size_t j = 0; j < k; ++j) r.text += fmt::format(" {}={:.4f}", names[j], f.rank_sums[j]);
  r.text += fmt::format("\nfriedman: statistic={:.4f} df={} tie_correction={:.4f} p={:.4f}\n",
                        f.statistic, f.df, f.tie_correction, f.p_value);
  r.csv = "metric,test,first,second,statistic,p_value\n";
  r.csv += fmt::format("{},friedman,,,{:.6f},{:.6f}\n", metric, f.statistic, f.p_value);

  if (with_post_hoc) {
    const auto nem = nemenyi(m);
    const auto dun = dunn(m, Adjustment::Bonferroni);
    r.text += "nemenyi:\n";
    for (const auto& p : nem.pairwise) {
      r.text += fmt::format("  {} vs {}: q={:.4f} p={:.4f}\n", names[p.first], names[p.second],
                            p.statistic, p.p_value);
      r.csv += fmt::format("{},nemenyi,{},{},{:.6f},{:.6f}\n", metric, names[p.first],
                           names[p.second], p.statistic, p.p_value);
    }
    r.text += "dunn (bonferroni):\n";
    for (const auto& p : dun.pairwise) {
      r.text += fmt::format("  {} vs {}: z={:.4f} p={:.4f}\n", names[p.first], names[p.second],
                            p.statistic, p.p_value);
      r.csv += fmt::format("{},dunn_bonferroni,{},{},{:.6f},{:.6f}\n", metric, names[p.first],
                           names[p.second], p.statistic, p.p_value);
    }
  }
  return r;
}

}  // namespace sef
