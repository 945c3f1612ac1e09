// Acceptance suite: one PASS/FAIL line per criterion.
//
//   sef_acceptance            run everything
//   sef_acceptance --only 4   run a single criterion
//
// Exit status is non-zero if any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "reference_tables.hpp"
#include "sef/bench.hpp"
#include "sef/cli.hpp"
#include "sef/metrics.hpp"
#include "sef/random.hpp"
#include "sef/sef.hpp"
#include "sef/stats.hpp"
#include "test_support.hpp"

namespace {

using namespace sef;
namespace fs = std::filesystem;

struct Verdict {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, std::string note) {
    pass = pass && ok;
    notes.push_back((ok ? "" : "!") + std::move(note));
  }
};

bool within(double value, double lo, double hi) { return value >= lo && value <= hi; }

bool within_rel(double value, double target, double rel) {
  return std::abs(value - target) <= rel * std::abs(target);
}

std::string str(double v) { return fmt::format("{:.4f}", v); }

// 1. Friedman statistics on the published comparison tables.
Verdict friedman_exactness() {
  Verdict v;
  auto expect = [&](const char* label, const RankMatrix& m, double stat, double p) {
    const auto r = friedman(m);
    if (stat > 0) {
      v.check(std::abs(r.statistic - stat) <= 1e-3, fmt::format("{} Q={}", label, str(r.statistic)));
    }
    v.check(std::abs(r.p_value - p) <= 1e-3, fmt::format("{} p={}", label, str(r.p_value)));
  };
  expect("trig PICP", testing::trig_picp(), 5.2, 0.0743);
  expect("trig NMPIW", testing::trig_nmpiw(), 8.4, 0.015);
  expect("hetero PICP", testing::hetero_picp(), -1, 0.2415);
  expect("hetero NMPIW", testing::hetero_nmpiw(), -1, 0.0743);
  return v;
}

// 2. compute_mu against a brute-force oracle, plus the coverage invariant.
Verdict mu_oracle() {
  Verdict v;
  Rng rng(20240601);
  const int gammas[] = {80, 90, 95, 99};
  std::size_t mismatches = 0, coverage_failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 5 + rng.below(196);
    const int g = gammas[rng.below(4)];
    std::vector<double> d(n);
    for (auto& x : d) x = rng.normal(rng.uniform(-1, 1), rng.uniform(0.1, 3));
    const std::vector<double> zeros(n, 0.0);
    const auto residuals = compute_residuals(d, zeros);
    const auto shift = compute_mu(residuals, g / 100.0);
    if (shift.mu != testing_support::brute_force_mu(d, g)) ++mismatches;
    const auto covered = static_cast<std::size_t>(
        std::count_if(d.begin(), d.end(), [&](double x) { return std::abs(x) <= shift.mu; }));
    if (covered < shift.m2 - shift.m1 + 1) ++coverage_failures;
  }
  v.check(mismatches == 0, fmt::format("{} oracle mismatches", mismatches));
  v.check(coverage_failures == 0, fmt::format("{} coverage violations", coverage_failures));
  return v;
}

// 3. Backpropagation against central finite differences.
Verdict gradient_checks() {
  Verdict v;
  Rng rng(31337);
  double worst = 0.0;
  std::size_t components = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto r = testing_support::random_gradient_check(rng, 1e-6);
    worst = std::max(worst, r.max_relative_error);
    components += r.components;
  }
  v.check(worst < 1e-5, fmt::format("max rel err {:.2e} over {} components", worst, components));
  return v;
}

NetworkConfig default_net(std::size_t first, std::size_t second, std::uint64_t seed) {
  NetworkConfig c;
  c.hidden_sizes = {first, second};
  c.seed = seed;
  return c;
}

Parallelism all_cores() { return {0}; }

// 4. Trig benchmark, 5-fold CV at five noise levels.
Verdict homoscedastic() {
  Verdict v;
  const double sigmas[] = {0.1, 0.2, 0.3, 0.4, 0.5};
  const double mu_ref[] = {0.223, 0.407, 0.641, 0.869, 1.043};
  const double mpiw_ref[] = {0.452, 0.808, 1.268, 1.737, 2.052};
  for (int i = 0; i < 5; ++i) {
    const auto data = gen_homoscedastic(1000, sigmas[i], 1);
    const auto res = run_sef_protocol(data, SplitPlan::kfold(5, 1), 0.95, default_net(100, 50, 1),
                                      all_cores());
    const double mu = res.mean.mu.value_or(0.0);
    v.check(within_rel(mu, mu_ref[i], 0.25), fmt::format("s={} mu={}", sigmas[i], str(mu)));
    v.check(within_rel(res.mean.mpiw, mpiw_ref[i], 0.25),
            fmt::format("s={} MPIW={}", sigmas[i], str(res.mean.mpiw)));
    v.check(within(res.mean.picp, 0.93, 0.99),
            fmt::format("s={} PICP={}", sigmas[i], str(res.mean.picp)));
  }
  return v;
}

// 5. Heteroscedastic benchmark: five random 80/20 splits, then 5-fold CV.
Verdict heteroscedastic() {
  Verdict v;
  const auto data = gen_heteroscedastic(500, 1);
  const auto cfg = default_net(200, 100, 1);
  const auto holdout = run_sef_protocol(data, SplitPlan::holdout(0.8, 5, 1), 0.95, cfg, all_cores());
  const double mu = holdout.mean.mu.value_or(0.0);
  v.check(within_rel(mu, 33.9, 0.25), fmt::format("holdout mu={}", str(mu)));
  v.check(holdout.mean.picp >= 0.95, fmt::format("holdout PICP={}", str(holdout.mean.picp)));
  v.check(within_rel(holdout.mean.mpiw, 12.7, 0.25),
          fmt::format("holdout MPIW={}", str(holdout.mean.mpiw)));
  const auto kfold = run_sef_protocol(data, SplitPlan::kfold(5, 1), 0.95, cfg, all_cores());
  const double ratio = kfold.mean.two_mu / kfold.mean.mpiw;
  v.check(within(ratio, 3.0, 10.0), fmt::format("5-fold 2mu/MPIW={}", str(ratio)));
  return v;
}

IntervalPrediction make_band(const std::vector<double>& lo, const std::vector<double>& hi) {
  IntervalPrediction p;
  p.lower = Eigen::Map<const Eigen::VectorXd>(lo.data(), static_cast<Eigen::Index>(lo.size()));
  p.upper = Eigen::Map<const Eigen::VectorXd>(hi.data(), static_cast<Eigen::Index>(hi.size()));
  p.point = (p.lower + p.upper) / 2.0;
  return p;
}

// 6. PICP/MPIW/NMPIW permutation invariance and affine equivariance.
Verdict metric_algebra() {
  Verdict v;
  Rng rng(424242);
  std::size_t perm_fail = 0, affine_fail = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n = 2 + rng.below(50);
    std::vector<double> y(n), lo(n), hi(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = rng.normal(0, 3);
      const double c = y[i] + rng.normal(0, 1);
      const double w = rng.normal(1, 1);  // occasionally negative: crossed bounds
      lo[i] = c - w;
      hi[i] = c + w;
    }
    const auto base = evaluate(y, make_band(lo, hi), 0.0);

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(perm));
    std::vector<double> py(n), pl(n), ph(n);
    for (std::size_t i = 0; i < n; ++i) {
      py[i] = y[perm[i]];
      pl[i] = lo[perm[i]];
      ph[i] = hi[perm[i]];
    }
    const auto p = evaluate(py, make_band(pl, ph), 0.0);
    const bool perm_ok = p.picp == base.picp && p.crossings == base.crossings &&
                         std::abs(p.mpiw - base.mpiw) <= 1e-12 * std::max(1.0, std::abs(base.mpiw)) &&
                         std::abs(p.nmpiw - base.nmpiw) <= 1e-12 * std::max(1.0, std::abs(base.nmpiw));
    if (!perm_ok) ++perm_fail;

    // Power-of-two scale and integer offset keep the map exact in binary.
    const double a = std::ldexp(1.0, static_cast<int>(rng.below(9)) - 4);
    const double b = static_cast<double>(rng.below(200)) - 100.0;
    std::vector<double> ay(n), al(n), ah(n);
    for (std::size_t i = 0; i < n; ++i) {
      ay[i] = a * y[i] + b;
      al[i] = a * lo[i] + b;
      ah[i] = a * hi[i] + b;
    }
    const auto t = evaluate(ay, make_band(al, ah), 0.0);
    const double mpiw_scale = std::max(1.0, std::abs(a * base.mpiw));
    const bool affine_ok =
        t.picp == base.picp && std::abs(t.mpiw - a * base.mpiw) <= 1e-12 * mpiw_scale * 8 &&
        std::abs(t.nmpiw - base.nmpiw) <= 1e-12 * std::max(1.0, std::abs(base.nmpiw)) * 8;
    if (!affine_ok) ++affine_fail;
  }
  v.check(perm_fail == 0, fmt::format("{} permutation failures", perm_fail));
  v.check(affine_fail == 0, fmt::format("{} affine failures", affine_fail));
  return v;
}

// 7. Baselines on n = 1000 trig data, 5-fold.
Verdict baselines() {
  Verdict v;
  const auto data = gen_homoscedastic(1000, 0.2, 1);
  const auto folds = split(data.size(), SplitPlan::kfold(5, 1));
  std::vector<double> gauss_mpiw(folds.size()), conf_cov(folds.size());
  std::vector<std::jthread> workers;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    workers.emplace_back([&, f] {
      const auto train = subset(data, folds[f].train);
      const auto test = subset(data, folds[f].test);
      const auto cfg = default_net(100, 50, derive_seed(1, f));
      const std::span<const double> y(test.y.data(), test.size());
      gauss_mpiw[f] = evaluate(y, baseline_gaussian(train, test, 0.95, cfg).prediction, 0.0).mpiw;
      conf_cov[f] = evaluate(y, baseline_conformal(train, test, 0.95, cfg).prediction, 0.0).picp;
    });
  }
  workers.clear();
  const double mpiw = std::accumulate(gauss_mpiw.begin(), gauss_mpiw.end(), 0.0) / 5.0;
  const double cov = std::accumulate(conf_cov.begin(), conf_cov.end(), 0.0) / 5.0;
  v.check(within_rel(mpiw, 0.784, 0.15), fmt::format("gaussian MPIW={}", str(mpiw)));
  v.check(std::abs(cov - 0.95) <= 0.05, fmt::format("conformal coverage={}", str(cov)));
  return v;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 8. Two compare invocations with the same seed give identical bytes.
Verdict determinism() {
  Verdict v;
  const auto root = fs::temp_directory_path() / "sef_acceptance_determinism";
  fs::remove_all(root);
  auto invoke = [&](const std::string& dir, const std::string& threads) {
    const std::vector<std::string> args{
        "sef",      "compare", "--blocks",  "noise:0.1..0.5", "--n",        "200",
        "--seed",   "11",      "--hidden",  "32,16",          "--epochs",   "60",
        "--threads", threads,  "--out-dir", (root / dir).string()};
    std::ostringstream out, err;
    return sef::cli::run(args, out, err);
  };
  const int a = invoke("a", "1");
  const int b = invoke("b", "0");
  v.check(a == 0 && b == 0, fmt::format("exit codes {} {}", a, b));
  for (const char* f : {"comparison.csv", "stats.txt", "stats.csv", "comparison.md"}) {
    const auto x = slurp(root / "a" / f);
    const auto y = slurp(root / "b" / f);
    v.check(!x.empty() && x == y, fmt::format("{} identical", f));
  }
  return v;
}

struct Criterion {
  int id;
  const char* name;
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  int only = 0;
  app.add_option("--only", only, "Run a single criterion (1-8)");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {1, "friedman-exactness", friedman_exactness},
      {2, "mu-oracle", mu_oracle},
      {3, "gradient-check", gradient_checks},
      {4, "homoscedastic-reproduction", homoscedastic},
      {5, "heteroscedastic-reproduction", heteroscedastic},
      {6, "metric-algebra", metric_algebra},
      {7, "baseline-sanity", baselines},
      {8, "determinism", determinism},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v.check(false, fmt::format("exception: {}", e.what()));
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string detail;
    for (const auto& n : v.notes) detail += (detail.empty() ? "" : "; ") + n;
    std::cout << fmt::format("[{}] criterion {} {} ({:.1f}s): {}\n", v.pass ? "PASS" : "FAIL", c.id,
                             c.name, secs, detail)
              << std::flush;
    if (!v.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
