#include "sef/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

#include "sef/error.hpp"
#include "sef/random.hpp"

namespace sef {

namespace {

constexpr double kPi = std::numbers::pi;

void sort_by_first_column(Dataset& d) {
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return d.x(static_cast<Eigen::Index>(a), 0) <
                                                d.x(static_cast<Eigen::Index>(b), 0); });
  d = subset(d, order);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

void Dataset::check() const {
  if (y.size() == 0) throw DataError(fmt::format("dataset '{}' is empty", name));
  if (x.rows() != y.size()) throw DataError(fmt::format("dataset '{}' has ragged rows", name));
  if (!x.allFinite() || !y.allFinite()) {
    throw DataError(fmt::format("dataset '{}' contains NaN or Inf", name));
  }
}

double trig_mean(double x) { return 1.5 * std::sin(x); }

double hetero_mean(double t) { return 10.0 + 3.0 * t + t * std::sin(2.0 * t); }

double hetero_noise_sd(double t) { return std::sqrt(t + 0.01); }

Dataset gen_homoscedastic(std::size_t n, double noise_sd, std::uint64_t seed, bool sorted) {
  if (n == 0) throw DataError("n must be at least 1");
  if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) {
    throw DomainError(fmt::format("noise level must be non-negative, got {}", noise_sd));
  }
  Dataset d;
  d.name = fmt::format("trig_noise{}", noise_sd);
  d.seed = seed;
  d.x.resize(static_cast<Eigen::Index>(n), 1);
  d.y.resize(static_cast<Eigen::Index>(n));
  Rng rng(seed);
  for (Eigen::Index i = 0; i < d.y.size(); ++i) {
    const double x = rng.uniform(-2.0 * kPi, 2.0 * kPi);
    d.x(i, 0) = x;
    d.y(i) = trig_mean(x) + noise_sd * rng.normal();
  }
  if (sorted) sort_by_first_column(d);
  return d;
}

Dataset gen_heteroscedastic(std::size_t n, std::uint64_t seed, bool sorted) {
  if (n == 0) throw DataError("n must be at least 1");
  Dataset d;
  d.name = "hetero";
  d.seed = seed;
  d.x.resize(static_cast<Eigen::Index>(n), 1);
  d.y.resize(static_cast<Eigen::Index>(n));
  Rng rng(seed);
  for (Eigen::Index i = 0; i < d.y.size(); ++i) {
    const double t = rng.uniform(0.0, 4.0 * kPi);
    d.x(i, 0) = t;
    d.y(i) = hetero_mean(t) + hetero_noise_sd(t) * rng.normal();
  }
  if (sorted) sort_by_first_column(d);
  return d;
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
  std::string line;
  if (!std::getline(in, line)) throw DataError(fmt::format("'{}' is empty", path.string()));
  const auto header = split_fields(trim(line));
  if (header.size() < 2) {
    throw DataError(fmt::format("'{}': header needs at least one feature and a target column",
                                path.string()));
  }
  const std::size_t cols = header.size();
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto fields = split_fields(body);
    if (fields.size() != cols) {
      throw DataError(fmt::format("'{}' line {}: expected {} fields, found {}", path.string(),
                                  line_no, cols, fields.size()));
    }
    for (auto field : fields) {
      field = trim(field);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc{} || ptr != field.data() + field.size() || !std::isfinite(v)) {
        throw DataError(fmt::format("'{}' line {}: '{}' is not a finite number", path.string(),
                                    line_no, field));
      }
      values.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw DataError(fmt::format("'{}' has no data rows", path.string()));

  Dataset d;
  d.name = path.stem().string();
  const auto d_cols = static_cast<Eigen::Index>(cols - 1);
  d.x.resize(static_cast<Eigen::Index>(rows), d_cols);
  d.y.resize(static_cast<Eigen::Index>(rows));
  for (std::size_t r = 0; r < rows; ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    for (Eigen::Index c = 0; c < d_cols; ++c) {
      d.x(ri, c) = values[r * cols + static_cast<std::size_t>(c)];
    }
    d.y(ri) = values[r * cols + cols - 1];
  }
  return d;
}

void save_csv(const Dataset& data, const std::filesystem::path& path) {
  data.check();
  std::ofstream out(path);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
  std::string text;
  for (std::size_t j = 0; j < data.dim(); ++j) text += fmt::format("x{},", j + 1);
  text += "y\n";
  for (Eigen::Index i = 0; i < data.y.size(); ++i) {
    for (Eigen::Index j = 0; j < data.x.cols(); ++j) text += fmt::format("{},", data.x(i, j));
    text += fmt::format("{}\n", data.y(i));
  }
  out << text;
  if (!out) throw DataError(fmt::format("failed writing '{}'", path.string()));
}

Dataset subset(const Dataset& data, std::span<const std::size_t> rows) {
  Dataset out;
  out.name = data.name;
  out.seed = data.seed;
  out.x.resize(static_cast<Eigen::Index>(rows.size()), data.x.cols());
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= data.size()) throw ShapeError("subset row index out of range");
    const auto src = static_cast<Eigen::Index>(rows[i]);
    out.x.row(static_cast<Eigen::Index>(i)) = data.x.row(src);
    out.y(static_cast<Eigen::Index>(i)) = data.y(src);
  }
  return out;
}

SplitPlan SplitPlan::holdout(double train_fraction, std::size_t repeats, std::uint64_t seed) {
  SplitPlan p;
  p.kind = Kind::RandomHoldout;
  p.train_fraction = train_fraction;
  p.repeats = repeats;
  p.seed = seed;
  return p;
}

SplitPlan SplitPlan::kfold(std::size_t k, std::uint64_t seed) {
  SplitPlan p;
  p.kind = Kind::KFold;
  p.k = k;
  p.seed = seed;
  return p;
}

std::string SplitPlan::describe() const {
  if (kind == Kind::KFold) return fmt::format("kfold{}", k);
  return fmt::format("holdout{}x{}", train_fraction, repeats);
}

std::vector<Split> split(std::size_t n, const SplitPlan& plan) {
  std::vector<Split> out;
  if (plan.kind == SplitPlan::Kind::RandomHoldout) {
    if (!(plan.train_fraction > 0.0 && plan.train_fraction < 1.0)) {
      throw ConfigError("holdout train fraction must lie in (0, 1)");
    }
    if (plan.repeats == 0) throw ConfigError("holdout needs at least one repeat");
    if (n < 2) throw ConfigError("holdout needs at least 2 samples");
    const auto n_train = static_cast<std::size_t>(
        std::llround(plan.train_fraction * static_cast<double>(n)));
    if (n_train == 0 || n_train >= n) {
      throw ConfigError(fmt::format("holdout {} of {} samples leaves an empty side",
                                    plan.train_fraction, n));
    }
    for (std::size_t r = 0; r < plan.repeats; ++r) {
      auto perm = shuffled_indices(n, plan.seed, r);
      Split s{{perm.begin(), perm.begin() + static_cast<long>(n_train)},
              {perm.begin() + static_cast<long>(n_train), perm.end()}};
      std::sort(s.train.begin(), s.train.end());
      std::sort(s.test.begin(), s.test.end());
      out.push_back(std::move(s));
    }
    return out;
  }

  if (plan.k < 2) throw ConfigError("k-fold needs k >= 2");
  if (n < plan.k) throw ConfigError(fmt::format("k-fold with k={} needs n >= k, got {}", plan.k, n));
  const auto perm = shuffled_indices(n, plan.seed);
  const std::size_t base = n / plan.k;
  const std::size_t extra = n % plan.k;
  std::size_t start = 0;
  for (std::size_t f = 0; f < plan.k; ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    Split s;
    s.test.assign(perm.begin() + static_cast<long>(start),
                  perm.begin() + static_cast<long>(start + size));
    s.train.reserve(n - size);
    s.train.insert(s.train.end(), perm.begin(), perm.begin() + static_cast<long>(start));
    s.train.insert(s.train.end(), perm.begin() + static_cast<long>(start + size), perm.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    out.push_back(std::move(s));
    start += size;
  }
  return out;
}

}  // namespace sef
