#include "sef/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <charconv>
#include <cmath>
#include <exception>
#include <map>
#include <thread>

#include <fmt/format.h>

#include "sef/error.hpp"
#include "sef/random.hpp"

namespace sef {

namespace {

using Clock = std::chrono::steady_clock;

std::span<const double> view(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

// Runs job(i) for i in [0, count) on up to par.threads workers. The first
// failure by index is rethrown after all workers finish.
template <typename Job>
void parallel_for(std::size_t count, Parallelism par, Job&& job) {
  std::size_t threads = par.threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                         : par.threads;
  threads = std::min(threads, count);
  std::vector<std::exception_ptr> errors(count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) {
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> workers;
    for (std::size_t t = 0; t < threads; ++t) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            job(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

ExperimentResult run_one(Method method, const Dataset& data, const Split& split,
                         const std::string& protocol, std::size_t block, double gamma,
                         const NetworkConfig& config) {
  const Dataset train = subset(data, split.train);
  const Dataset test = subset(data, split.test);
  ExperimentResult r;
  r.method = method;
  r.dataset = data.name;
  r.protocol = protocol;
  r.block = block;
  r.targets = test.y;

  const auto start = Clock::now();
  switch (method) {
    case Method::Sef: {
      const SefModel model = fit(train.x, train.y, gamma, config);
      r.prediction = predict(model, test.x);
      r.mu = model.shift.mu;
      break;
    }
    case Method::Conformal: {
      auto b = baseline_conformal(train, test, gamma, config);
      r.prediction = std::move(b.prediction);
      r.mu = b.half_width;
      break;
    }
    case Method::Gaussian: {
      auto b = baseline_gaussian(train, test, gamma, config);
      r.prediction = std::move(b.prediction);
      r.mu = b.half_width;
      break;
    }
  }
  r.wall_time_s = seconds_since(start);
  r.prediction.check();
  r.metrics = evaluate(view(r.targets), r.prediction, r.mu.value_or(0.0));
  return r;
}

BaselineResult symmetric_band(const Network& net, const Dataset& test, double half_width) {
  const Eigen::VectorXd point = predict(net, test.x);
  return {{point, point.array() - half_width, point.array() + half_width}, half_width};
}

std::string format_optional(const std::optional<double>& v) {
  return v ? fmt::format("{}", *v) : std::string{};
}

double parse_double(std::string_view field, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw DataError(fmt::format("results line {}: '{}' is not a number", line, field));
  }
  return v;
}

std::string markdown_number(double v) { return fmt::format("{:.3f}", v); }

}  // namespace

const char* to_string(Method m) {
  switch (m) {
    case Method::Sef:
      return "SEF";
    case Method::Conformal:
      return "Conformal";
    case Method::Gaussian:
      return "Gaussian";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "sef") return Method::Sef;
  if (lower == "conformal" || lower == "conformalbaseline") return Method::Conformal;
  if (lower == "gaussian" || lower == "gaussianbaseline") return Method::Gaussian;
  throw ConfigError(fmt::format("unknown method '{}'", name));
}

ResultRow to_row(const ExperimentResult& r) {
  return {r.dataset,        r.protocol,        std::to_string(r.block),
          to_string(r.method), r.metrics.picp, r.metrics.mpiw,
          r.metrics.nmpiw,  r.mu,              r.metrics.two_mu,
          static_cast<double>(r.metrics.crossings), r.wall_time_s};
}

ResultRow mean_row(std::span<const ExperimentResult> runs) {
  if (runs.empty()) throw DataError("mean of zero runs");
  ResultRow m;
  m.dataset = runs.front().dataset;
  m.protocol = runs.front().protocol;
  m.block = "mean";
  m.method = to_string(runs.front().method);
  double mu_sum = 0.0;
  bool has_mu = true;
  for (const auto& r : runs) {
    m.picp += r.metrics.picp;
    m.mpiw += r.metrics.mpiw;
    m.nmpiw += r.metrics.nmpiw;
    m.two_mu += r.metrics.two_mu;
    m.crossings += static_cast<double>(r.metrics.crossings);
    m.wall_time_s += r.wall_time_s;
    has_mu = has_mu && r.mu.has_value();
    mu_sum += r.mu.value_or(0.0);
  }
  const auto n = static_cast<double>(runs.size());
  m.picp /= n;
  m.mpiw /= n;
  m.nmpiw /= n;
  m.two_mu /= n;
  m.crossings /= n;
  m.wall_time_s /= n;
  if (has_mu) m.mu = mu_sum / n;
  return m;
}

ProtocolResult run_sef_protocol(const Dataset& data, const SplitPlan& plan, double gamma,
                                const NetworkConfig& config, Parallelism par) {
  check_gamma(gamma);
  data.check();
  const auto splits = split(data.size(), plan);
  const std::string protocol = plan.describe();
  ProtocolResult out;
  out.runs.resize(splits.size());
  parallel_for(splits.size(), par, [&](std::size_t i) {
    NetworkConfig cfg = config;
    cfg.input_dim = data.dim();
    cfg.seed = derive_seed(config.seed, i);
    out.runs[i] = run_one(Method::Sef, data, splits[i], protocol, i + 1, gamma, cfg);
  });
  out.mean = mean_row(out.runs);
  return out;
}

double conformal_quantile(std::span<const double> abs_residuals, double gamma) {
  check_gamma(gamma);
  if (abs_residuals.empty()) throw DataError("conformal calibration set is empty");
  std::vector<double> sorted(abs_residuals.begin(), abs_residuals.end());
  std::sort(sorted.begin(), sorted.end());
  const auto m = static_cast<double>(sorted.size());
  double rank = (m + 1.0) * gamma;
  if (std::abs(rank - std::round(rank)) <= 1e-9 * rank) rank = std::round(rank);
  auto k = static_cast<std::size_t>(std::ceil(rank));
  k = std::clamp<std::size_t>(k, 1, sorted.size());
  return sorted[k - 1];
}

BaselineResult baseline_conformal(const Dataset& train, const Dataset& test, double gamma,
                                  const NetworkConfig& config, double calibration_fraction) {
  check_gamma(gamma);
  if (!(calibration_fraction > 0.0 && calibration_fraction < 1.0)) {
    throw ConfigError("calibration fraction must lie in (0, 1)");
  }
  const auto order = shuffled_indices(train.size(), config.seed, /*stream=*/7);
  auto n_cal = static_cast<std::size_t>(
      std::llround(calibration_fraction * static_cast<double>(train.size())));
  n_cal = std::clamp<std::size_t>(n_cal, 1, train.size() - 1);
  const std::span<const std::size_t> all(order);
  const Dataset proper = subset(train, all.first(train.size() - n_cal));
  const Dataset calibration = subset(train, all.last(n_cal));

  NetworkConfig cfg = config;
  cfg.input_dim = train.dim();
  const auto approx = sef::train(cfg, proper.x, proper.y, 0.0);
  const Eigen::VectorXd abs_res = (predict(approx.network, calibration.x) - calibration.y).cwiseAbs();
  return symmetric_band(approx.network, test, conformal_quantile(view(abs_res), gamma));
}

BaselineResult baseline_gaussian(const Dataset& train, const Dataset& test, double gamma,
                                 const NetworkConfig& config) {
  check_gamma(gamma);
  NetworkConfig cfg = config;
  cfg.input_dim = train.dim();
  const auto approx = sef::train(cfg, train.x, train.y, 0.0);
  const Eigen::VectorXd res = predict(approx.network, train.x) - train.y;
  const double mean = res.mean();
  const double sd = res.size() > 1
                        ? std::sqrt((res.array() - mean).square().sum() /
                                    static_cast<double>(res.size() - 1))
                        : 0.0;
  const double z = normal_quantile((1.0 + gamma) / 2.0);
  return symmetric_band(approx.network, test, z * sd);
}

RankMatrix ComparisonTable::rank_matrix(Metric metric) const {
  RankMatrix m;
  m.scores = metric == Metric::Picp ? picp : nmpiw;
  m.direction = metric == Metric::Picp ? Direction::HigherBetter : Direction::LowerBetter;
  for (auto method : methods) m.methods.emplace_back(to_string(method));
  return m;
}

ComparisonTable compare_methods(std::span<const Dataset> datasets, const SplitPlan& plan,
                                double gamma, const NetworkConfig& config,
                                std::span<const Method> methods, Parallelism par) {
  check_gamma(gamma);
  if (methods.size() < 2) throw ConfigError("a comparison needs at least 2 methods");
  if (datasets.empty()) throw ConfigError("a comparison needs at least one dataset");

  struct Block {
    const Dataset* data;
    Split split;
    std::size_t number;
  };
  std::vector<Block> blocks;
  ComparisonTable table;
  table.methods.assign(methods.begin(), methods.end());
  for (const auto& d : datasets) {
    d.check();
    auto splits = split(d.size(), plan);
    for (std::size_t s = 0; s < splits.size(); ++s) {
      std::string label = datasets.size() > 1 ? d.name : std::to_string(s + 1);
      if (datasets.size() > 1 && splits.size() > 1) label += fmt::format("/{}", s + 1);
      table.blocks.push_back(std::move(label));
      blocks.push_back({&d, std::move(splits[s]), s + 1});
    }
  }
  if (blocks.size() < 2) throw ConfigError("a comparison needs at least 2 blocks");

  const std::string protocol = plan.describe();
  const std::size_t k = methods.size();
  table.runs.resize(blocks.size() * k);
  parallel_for(table.runs.size(), par, [&](std::size_t job) {
    const std::size_t b = job / k;
    NetworkConfig cfg = config;
    cfg.input_dim = blocks[b].data->dim();
    cfg.seed = derive_seed(config.seed, b);
    table.runs[job] = run_one(methods[job % k], *blocks[b].data, blocks[b].split, protocol,
                              blocks[b].number, gamma, cfg);
  });

  const auto rows = static_cast<Eigen::Index>(blocks.size());
  table.picp.resize(rows, static_cast<Eigen::Index>(k));
  table.nmpiw.resize(rows, static_cast<Eigen::Index>(k));
  for (std::size_t job = 0; job < table.runs.size(); ++job) {
    const auto b = static_cast<Eigen::Index>(job / k);
    const auto j = static_cast<Eigen::Index>(job % k);
    table.picp(b, j) = table.runs[job].metrics.picp;
    table.nmpiw(b, j) = table.runs[job].metrics.nmpiw;
  }
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<ExperimentResult> per_method;
    for (std::size_t b = 0; b < blocks.size(); ++b) per_method.push_back(table.runs[b * k + j]);
    auto mean = mean_row(per_method);
    if (datasets.size() > 1) mean.dataset = "all";
    table.means.push_back(std::move(mean));
  }
  return table;
}

std::string results_csv_header() {
  return "dataset,protocol,block,method,picp,mpiw,nmpiw,mu,two_mu,crossings,wall_time_s";
}

std::string results_csv(std::span<const ResultRow> rows, bool include_wall_time) {
  std::string out = results_csv_header() + "\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", r.dataset, r.protocol, r.block,
                       r.method, r.picp, r.mpiw, r.nmpiw, format_optional(r.mu), r.two_mu,
                       r.crossings,
                       include_wall_time ? fmt::format("{:.6f}", r.wall_time_s) : std::string{});
  }
  return out;
}

std::vector<ResultRow> parse_results_csv(std::string_view text) {
  std::vector<ResultRow> rows;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != results_csv_header()) {
        throw DataError("results file does not start with the expected header");
      }
      header_seen = true;
      continue;
    }
    std::vector<std::string_view> f;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      f.push_back(line.substr(start, comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (f.size() != 11) {
      throw DataError(fmt::format("results line {}: expected 11 fields, found {}", line_no,
                                  f.size()));
    }
    ResultRow r;
    r.dataset = f[0];
    r.protocol = f[1];
    r.block = f[2];
    r.method = f[3];
    r.picp = parse_double(f[4], line_no);
    r.mpiw = parse_double(f[5], line_no);
    r.nmpiw = parse_double(f[6], line_no);
    if (!f[7].empty()) r.mu = parse_double(f[7], line_no);
    r.two_mu = parse_double(f[8], line_no);
    r.crossings = parse_double(f[9], line_no);
    r.wall_time_s = f[10].empty() ? 0.0 : parse_double(f[10], line_no);
    rows.push_back(std::move(r));
  }
  if (!header_seen) throw DataError("results file is empty");
  return rows;
}

ComparisonTable comparison_from_rows(std::span<const ResultRow> rows) {
  std::vector<std::string> block_keys;
  std::vector<std::string> method_names;
  std::map<std::pair<std::size_t, std::size_t>, const ResultRow*> cells;
  bool multi_dataset = false;
  for (const auto& r : rows) {
    if (r.block == "mean") continue;
    if (!rows.empty() && r.dataset != rows.front().dataset) multi_dataset = true;
  }
  ComparisonTable table;
  for (const auto& r : rows) {
    if (r.block == "mean") continue;
    const std::string key = r.dataset + "/" + r.block;
    auto b = std::find(block_keys.begin(), block_keys.end(), key);
    if (b == block_keys.end()) {
      block_keys.push_back(key);
      table.blocks.push_back(multi_dataset ? r.dataset : r.block);
      b = block_keys.end() - 1;
    }
    auto m = std::find(method_names.begin(), method_names.end(), r.method);
    if (m == method_names.end()) {
      method_names.push_back(r.method);
      m = method_names.end() - 1;
    }
    const auto cell = std::make_pair(static_cast<std::size_t>(b - block_keys.begin()),
                                     static_cast<std::size_t>(m - method_names.begin()));
    if (!cells.emplace(cell, &r).second) {
      throw DataError(fmt::format("duplicate result for block {} method {}", key, r.method));
    }
  }
  if (block_keys.empty()) throw DataError("no per-block rows in results");
  for (const auto& name : method_names) table.methods.push_back(parse_method(name));
  const auto nb = static_cast<Eigen::Index>(block_keys.size());
  const auto nm = static_cast<Eigen::Index>(method_names.size());
  table.picp.resize(nb, nm);
  table.nmpiw.resize(nb, nm);
  for (Eigen::Index b = 0; b < nb; ++b) {
    for (Eigen::Index m = 0; m < nm; ++m) {
      const auto it = cells.find({static_cast<std::size_t>(b), static_cast<std::size_t>(m)});
      if (it == cells.end()) {
        throw DataError(fmt::format("missing result for block {} method {}",
                                    block_keys[static_cast<std::size_t>(b)],
                                    method_names[static_cast<std::size_t>(m)]));
      }
      table.picp(b, m) = it->second->picp;
      table.nmpiw(b, m) = it->second->nmpiw;
    }
  }
  return table;
}

std::string protocol_markdown(const ProtocolResult& result) {
  std::string out = "| Block | mu | PICP | MPIW | 2mu |\n|---|---|---|---|---|\n";
  for (const auto& r : result.runs) {
    out += fmt::format("| {} | {} | {} | {} | {} |\n", r.block, markdown_number(r.mu.value_or(0.0)),
                       markdown_number(r.metrics.picp), markdown_number(r.metrics.mpiw),
                       markdown_number(r.metrics.two_mu));
  }
  const auto& m = result.mean;
  out += fmt::format("| **Mean** | {} | {} | {} | {} |\n", markdown_number(m.mu.value_or(0.0)),
                     markdown_number(m.picp), markdown_number(m.mpiw), markdown_number(m.two_mu));
  return out;
}

std::string comparison_markdown(const ComparisonTable& table) {
  std::string out = "| Block |";
  std::string rule = "|---|";
  for (auto m : table.methods) {
    out += fmt::format(" {0} PICP | {0} NMPIW |", to_string(m));
    rule += "---|---|";
  }
  out += "\n" + rule + "\n";
  for (Eigen::Index b = 0; b < table.picp.rows(); ++b) {
    out += fmt::format("| {} |", table.blocks[static_cast<std::size_t>(b)]);
    for (Eigen::Index j = 0; j < table.picp.cols(); ++j) {
      out += fmt::format(" {} | {} |", markdown_number(table.picp(b, j)),
                         markdown_number(table.nmpiw(b, j)));
    }
    out += "\n";
  }
  out += "| **Mean** |";
  for (Eigen::Index j = 0; j < table.picp.cols(); ++j) {
    out += fmt::format(" {} | {} |", markdown_number(table.picp.col(j).mean()),
                       markdown_number(table.nmpiw.col(j).mean()));
  }
  return out + "\n";
}

}  // namespace sef
