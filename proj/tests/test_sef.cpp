#include <gtest/gtest.h>

#include <algorithm>
#include <vector>

#include "sef/datasets.hpp"
#include "sef/error.hpp"
#include "sef/metrics.hpp"
#include "sef/random.hpp"
#include "sef/sef.hpp"
#include "test_support.hpp"

namespace sef {
namespace {

TEST(Residuals, Examples) {
  const auto zero = compute_residuals(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3});
  EXPECT_EQ(zero.values, (std::vector<double>{0, 0, 0}));

  const auto r = compute_residuals(std::vector<double>{2, 0}, std::vector<double>{1, 3});
  EXPECT_EQ(r.values, (std::vector<double>{1, -3}));
  EXPECT_EQ(r.sorted, (std::vector<double>{-3, 1}));

  // Underestimation gives a negative residual.
  const auto under = compute_residuals(std::vector<double>{5}, std::vector<double>{7});
  EXPECT_EQ(under.values, (std::vector<double>{-2}));

  EXPECT_THROW(compute_residuals(std::vector<double>{}, std::vector<double>{}), DataError);
  EXPECT_THROW(compute_residuals(std::vector<double>{1}, std::vector<double>{}), ShapeError);
}

TEST(QuantileIndices, Examples) {
  const auto a = quantile_indices(1000, 0.95);
  EXPECT_EQ(a.m1, 25u);
  EXPECT_EQ(a.m2, 975u);
  const auto b = quantile_indices(10, 0.95);
  EXPECT_EQ(b.m1, 1u);
  EXPECT_EQ(b.m2, 10u);
  const auto c = quantile_indices(5, 0.6);
  EXPECT_EQ(c.m1, 1u);
  EXPECT_EQ(c.m2, 4u);
  EXPECT_THROW(quantile_indices(5, 1.0), DomainError);
  EXPECT_THROW(quantile_indices(5, 0.0), DomainError);
}

TEST(QuantileIndices, MatchIntegerArithmetic) {
  for (int g : {50, 80, 90, 95, 99}) {
    for (long n = 1; n <= 2000; ++n) {
      const auto q = quantile_indices(static_cast<std::size_t>(n), g / 100.0);
      const long m1 = std::max(((100 - g) * n) / 200, 1L);
      const long m2 = std::min(((100 + g) * n + 199) / 200, n);
      ASSERT_EQ(static_cast<long>(q.m1), m1) << "n=" << n << " g=" << g;
      ASSERT_EQ(static_cast<long>(q.m2), m2) << "n=" << n << " g=" << g;
    }
  }
}

TEST(ComputeMu, Examples) {
  Residuals r{{-3, -1, 0, 1, 2}, {-3, -1, 0, 1, 2}};
  const auto s = compute_mu(r, 0.6);
  EXPECT_EQ(s.m1, 1u);
  EXPECT_EQ(s.m2, 4u);
  EXPECT_DOUBLE_EQ(s.mu, 3.0);

  const auto zeros = compute_residuals(std::vector<double>(20, 1.0), std::vector<double>(20, 1.0));
  EXPECT_DOUBLE_EQ(compute_mu(zeros, 0.95).mu, 0.0);

  std::vector<double> sym;
  for (int i = -10; i <= 10; ++i) sym.push_back(0.5 * i);
  const auto rs = compute_residuals(sym, std::vector<double>(sym.size(), 0.0));
  EXPECT_LE(compute_mu(rs, 0.5).mu, 5.0);
  EXPECT_DOUBLE_EQ(compute_mu(rs, 0.999).mu, 5.0);
}

TEST(ComputeMu, Properties) {
  Rng rng(314);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.below(200);
    std::vector<double> d(n);
    for (auto& v : d) v = rng.normal(rng.uniform(-1, 1), rng.uniform(0.1, 3));
    const auto res = compute_residuals(d, std::vector<double>(n, 0.0));
    const auto s95 = compute_mu(res, 0.95);

    const auto covered = std::count_if(d.begin(), d.end(), [&](double v) {
      return std::abs(v) <= s95.mu;
    });
    EXPECT_GE(static_cast<std::size_t>(covered), s95.m2 - s95.m1 + 1);

    auto shuffled = d;
    rng.shuffle(std::span<double>(shuffled));
    EXPECT_EQ(compute_mu(compute_residuals(shuffled, std::vector<double>(n, 0.0)), 0.95).mu,
              s95.mu);

    double last = 0.0;
    for (double g : {0.5, 0.8, 0.9, 0.95, 0.99}) {
      const double mu = compute_mu(res, g).mu;
      EXPECT_GE(mu, last);
      last = mu;
    }

    for (int g : {80, 90, 95, 99}) {
      EXPECT_EQ(compute_mu(res, g / 100.0).mu, testing_support::brute_force_mu(d, g));
    }
  }
}

NetworkConfig small_config(std::uint64_t seed) {
  NetworkConfig c;
  c.hidden_sizes = {32, 16};
  c.learning_rate = 3e-3;
  c.max_epochs = 300;
  c.patience = 30;
  c.seed = seed;
  return c;
}

TEST(SefFit, LinearDataWithGaussianNoise) {
  // Noise sd 0.1: the residual quantile should sit near 1.96 * 0.1, far above
  // the fitting error of the bound networks.
  constexpr Eigen::Index n = 400;
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXd y(n);
  Rng rng(5);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = rng.uniform(-1, 1);
    y(i) = x(i, 0) + rng.normal(0, 0.1);
  }
  const auto model = fit(x, y, 0.95, small_config(3));
  EXPECT_GT(model.shift.mu, 0.15);
  EXPECT_LT(model.shift.mu, 0.27);
  const auto pred = predict(model, x);
  const auto report = evaluate(std::span<const double>(y.data(), n), pred, model.shift.mu);
  EXPECT_GE(report.picp, 0.9);
  EXPECT_EQ(report.crossings, 0u);
  // Both bound networks converge to y -/+ mu, so the width is about 2 mu.
  const Eigen::VectorXd width = pred.upper - pred.lower;
  EXPECT_NEAR(width.mean(), 2.0 * model.shift.mu, 0.05);
}

TEST(SefFit, IsDeterministic) {
  const auto d = gen_homoscedastic(120, 0.2, 9);
  auto cfg = small_config(4);
  cfg.max_epochs = 15;
  const auto a = fit(d.x, d.y, 0.9, cfg);
  const auto b = fit(d.x, d.y, 0.9, cfg);
  EXPECT_EQ(a.shift.mu, b.shift.mu);
  const auto pa = predict(a, d.x);
  const auto pb = predict(b, d.x);
  EXPECT_EQ(pa.point, pb.point);
  EXPECT_EQ(pa.lower, pb.lower);
  EXPECT_EQ(pa.upper, pb.upper);
}

TEST(SefFit, BoundNetworksUseDistinctSeeds) {
  const auto d = gen_homoscedastic(60, 0.2, 9);
  auto cfg = small_config(10);
  cfg.max_epochs = 0;
  const auto m = fit(d.x, d.y, 0.9, cfg);
  EXPECT_NE(m.approx.layers[0].weights, m.lower.layers[0].weights);
  EXPECT_NE(m.lower.layers[0].weights, m.upper.layers[0].weights);
  auto seeded = cfg;
  seeded.seed = 12;
  EXPECT_EQ(m.upper.layers[0].weights, init_network(seeded).layers[0].weights);
}

TEST(SefFit, RejectsBadGamma) {
  const auto d = gen_homoscedastic(60, 0.2, 9);
  EXPECT_THROW(fit(d.x, d.y, 1.5, small_config(1)), DomainError);
}

TEST(SefPredict, DegenerateModelGivesZeroWidth) {
  NetworkConfig cfg = small_config(1);
  SefModel m;
  m.approx = init_network(cfg);
  m.lower = m.approx;
  m.upper = m.approx;
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(9, 1);
  const auto p = predict(m, x);
  EXPECT_EQ(p.lower, p.point);
  EXPECT_EQ(p.upper, p.point);
  EXPECT_THROW(predict(m, Eigen::MatrixXd::Zero(3, 2)), ShapeError);
}

TEST(SefPredict, CrossingsAreReportedNotRepaired) {
  IntervalPrediction p;
  p.point = Eigen::Vector3d(0, 0, 0);
  p.lower = Eigen::Vector3d(-1, 0.5, -1);
  p.upper = Eigen::Vector3d(1, -0.5, 1);
  const std::vector<double> y{0, 0, 3};
  const auto r = evaluate(y, p, 1.0);
  EXPECT_EQ(r.crossings, 1u);
  EXPECT_DOUBLE_EQ(p.lower(1), 0.5);
  EXPECT_NEAR(r.mpiw, (2.0 - 1.0 + 2.0) / 3.0, 1e-15);
}

}  // namespace
}  // namespace sef
