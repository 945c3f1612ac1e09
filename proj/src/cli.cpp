#include "sef/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "sef/bench.hpp"
#include "sef/datasets.hpp"
#include "sef/error.hpp"
#include "sef/stats.hpp"
#include "sef/svg_plot.hpp"

namespace sef::cli {

namespace {

namespace fs = std::filesystem;

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("{}: '{}' is not a number", what, s));
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
  out << text;
  if (!out) throw DataError(fmt::format("failed writing '{}'", path.string()));
}

// Options shared by `run` and `compare`.
struct CommonOptions {
  double gamma = 0.95;
  std::uint64_t seed = 0;
  std::string hidden;
  double learning_rate = 1e-3;
  std::size_t epochs = 500;
  std::size_t batch = 32;
  std::size_t patience = 20;
  double val_frac = 0.10;
  std::size_t threads = 1;
  bool record_time = false;

  std::string data;
  std::string fn;
  std::size_t n = 0;
  double noise = 0.1;
  std::uint64_t data_seed = 0;
  bool data_seed_set = false;

  std::size_t kfold = 0;
  double holdout = 0.0;
  std::size_t repeats = 1;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--gamma", o.gamma, "Confidence level in (0, 1)")->capture_default_str();
  cmd->add_option("--seed", o.seed, "Master seed (default from SEF_SEED, else 0)")
      ->envname("SEF_SEED");
  cmd->add_option("--hidden", o.hidden, "Hidden layer widths, e.g. 100,50");
  cmd->add_option("--lr", o.learning_rate, "Adam learning rate")->capture_default_str();
  cmd->add_option("--epochs", o.epochs, "Maximum training epochs")->capture_default_str();
  cmd->add_option("--batch", o.batch, "Mini-batch size")->capture_default_str();
  cmd->add_option("--patience", o.patience, "Early-stopping patience")->capture_default_str();
  cmd->add_option("--val-frac", o.val_frac, "Internal validation fraction")->capture_default_str();
  cmd->add_option("--threads", o.threads, "Worker threads (0 = hardware)")->capture_default_str();
  cmd->add_flag("--record-time", o.record_time, "Write wall_time_s to results (not reproducible)");
  cmd->add_option("--data", o.data, "Dataset CSV (x1..xd,y)");
  cmd->add_option("--fn", o.fn, "Generate instead of loading: trig | hetero");
  cmd->add_option("--n", o.n, "Generated sample count");
  cmd->add_option("--noise", o.noise, "Noise standard deviation for trig")->capture_default_str();
  cmd->add_option("--data-seed", o.data_seed, "Generator seed (default: --seed)");
  cmd->add_option("--kfold", o.kfold, "k-fold cross-validation");
  cmd->add_option("--holdout", o.holdout, "Random holdout train fraction");
  cmd->add_option("--repeats", o.repeats, "Number of random holdout splits")->capture_default_str();
}

NetworkConfig network_config(const CommonOptions& o, std::size_t default_first,
                             std::size_t default_second) {
  NetworkConfig cfg;
  cfg.hidden_sizes = {default_first, default_second};
  if (!o.hidden.empty()) {
    cfg.hidden_sizes.clear();
    for (const auto& item : split_list(o.hidden, ',')) {
      const double v = to_double(item, "--hidden");
      if (!(v >= 1.0) || v != std::floor(v)) throw ConfigError("--hidden widths must be integers >= 1");
      cfg.hidden_sizes.push_back(static_cast<std::size_t>(v));
    }
  }
  cfg.learning_rate = o.learning_rate;
  cfg.max_epochs = o.epochs;
  cfg.batch_size = o.batch;
  cfg.patience = o.patience;
  cfg.validation_fraction = o.val_frac;
  cfg.seed = o.seed;
  cfg.validate();
  return cfg;
}

Dataset generate(const std::string& fn, std::size_t n, double noise, std::uint64_t seed,
                 bool sorted = false) {
  if (fn == "trig") return gen_homoscedastic(n == 0 ? 1000 : n, noise, seed, sorted);
  if (fn == "hetero") return gen_heteroscedastic(n == 0 ? 500 : n, seed, sorted);
  throw ConfigError(fmt::format("unknown generator '{}' (expected trig or hetero)", fn));
}

Dataset dataset_from(const CommonOptions& o) {
  if (!o.data.empty() && !o.fn.empty()) throw ConfigError("give either --data or --fn, not both");
  if (!o.data.empty()) {
    auto d = load_csv(o.data);
    d.check();
    return d;
  }
  if (o.fn.empty()) throw ConfigError("a dataset is required: --data FILE or --fn trig|hetero");
  return generate(o.fn, o.n, o.noise, o.data_seed_set ? o.data_seed : o.seed);
}

SplitPlan plan_from(const CommonOptions& o, SplitPlan fallback) {
  if (o.kfold != 0 && o.holdout != 0.0) throw ConfigError("give either --kfold or --holdout");
  if (o.kfold != 0) return SplitPlan::kfold(o.kfold, o.seed);
  if (o.holdout != 0.0) return SplitPlan::holdout(o.holdout, o.repeats, o.seed);
  fallback.seed = o.seed;
  return fallback;
}

// "noise:0.1..0.5" (step 0.1), "noise:0.1..0.5:0.05" or "noise:0.1,0.3".
std::vector<double> parse_noise_blocks(const std::string& spec) {
  const std::string prefix = "noise:";
  if (spec.rfind(prefix, 0) != 0) {
    throw ConfigError(fmt::format("--blocks must look like noise:0.1..0.5, got '{}'", spec));
  }
  const std::string body = spec.substr(prefix.size());
  std::vector<double> levels;
  const auto dots = body.find("..");
  if (dots == std::string::npos) {
    for (const auto& item : split_list(body, ',')) levels.push_back(to_double(item, "--blocks"));
  } else {
    const double lo = to_double(body.substr(0, dots), "--blocks");
    std::string rest = body.substr(dots + 2);
    double step = 0.1;
    if (const auto colon = rest.find(':'); colon != std::string::npos) {
      step = to_double(rest.substr(colon + 1), "--blocks");
      rest = rest.substr(0, colon);
    }
    const double hi = to_double(rest, "--blocks");
    if (!(step > 0.0) || hi < lo) throw ConfigError("--blocks range is empty");
    const auto count = static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;
    for (int i = 0; i < count; ++i) {
      // Round to 12 digits so 0.1 + 2 * 0.1 prints as 0.3.
      levels.push_back(std::round((lo + i * step) * 1e12) / 1e12);
    }
  }
  if (levels.empty()) throw ConfigError("--blocks lists no noise levels");
  return levels;
}

std::string comparison_stats(const ComparisonTable& table, double alpha) {
  std::string text;
  for (auto metric : {Metric::Picp, Metric::Nmpiw}) {
    const auto rm = table.rank_matrix(metric);
    const std::string name = metric == Metric::Picp ? "picp" : "nmpiw";
    if (rm.methods_count() < 3) {
      text += fmt::format("metric: {} ({})\nfriedman: not applicable (needs at least 3 methods)\n\n",
                          name, to_string(rm.direction));
      continue;
    }
    const auto f = friedman(rm);
    text += stats_report(rm, name, f.p_value < alpha).text + "\n";
  }
  return text;
}

std::string comparison_stats_csv(const ComparisonTable& table, double alpha) {
  std::string csv = "metric,test,first,second,statistic,p_value\n";
  for (auto metric : {Metric::Picp, Metric::Nmpiw}) {
    const auto rm = table.rank_matrix(metric);
    if (rm.methods_count() < 3) continue;
    const auto f = friedman(rm);
    const auto body = stats_report(rm, metric == Metric::Picp ? "picp" : "nmpiw",
                                   f.p_value < alpha).csv;
    csv += body.substr(body.find('\n') + 1);
  }
  return csv;
}

RankMatrix read_score_matrix(const fs::path& path, Direction direction) {
  const std::string text = read_file(path);
  std::vector<std::vector<std::string>> rows;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(trim(f));
    rows.push_back(std::move(fields));
  }
  if (rows.size() < 2) throw DataError("score matrix needs a header and at least one row");
  auto header = rows.front();
  const bool labelled = !header.empty() && (header[0] == "block" || header[0].empty());
  if (labelled) header.erase(header.begin());
  if (header.size() < 2) throw DataError("score matrix needs at least 2 method columns");
  RankMatrix m;
  m.direction = direction;
  m.methods = header;
  m.scores.resize(static_cast<Eigen::Index>(rows.size() - 1),
                  static_cast<Eigen::Index>(header.size()));
  for (std::size_t r = 1; r < rows.size(); ++r) {
    auto fields = rows[r];
    if (labelled && !fields.empty()) fields.erase(fields.begin());
    if (fields.size() != header.size()) {
      throw DataError(fmt::format("score row {} has {} values, expected {}", r, fields.size(),
                                  header.size()));
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      try {
        m.scores(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(c)) =
            to_double(fields[c], "score");
      } catch (const ConfigError& e) {
        throw DataError(e.what());
      }
    }
  }
  m.check();
  return m;
}

std::string metadata_text(const std::string& fn, const Dataset& d, double noise) {
  std::string meta = fmt::format("generator={}\nn={}\nseed={}\n", fn, d.size(), d.seed);
  if (fn == "trig") meta += fmt::format("noise={}\n", noise);
  return meta;
}

int cmd_gen(const std::string& fn, std::size_t n, double noise, std::uint64_t seed, bool sorted,
            const std::string& out_path, std::ostream& out) {
  const Dataset d = generate(fn, n, noise, seed, sorted);
  save_csv(d, out_path);
  write_file(out_path + ".meta", metadata_text(fn, d, noise));
  out << fmt::format("wrote {} rows to {}\n", d.size(), out_path);
  return kOk;
}

int cmd_run(const CommonOptions& o, const std::string& out_path, const std::string& plot_path,
            std::ostream& out) {
  check_gamma(o.gamma);
  const Dataset data = dataset_from(o);
  auto cfg = network_config(o, 100, 50);
  cfg.input_dim = data.dim();
  const auto plan = plan_from(o, SplitPlan::kfold(5, o.seed));
  const auto result = run_sef_protocol(data, plan, o.gamma, cfg, {o.threads});

  std::vector<ResultRow> rows;
  for (const auto& r : result.runs) rows.push_back(to_row(r));
  rows.push_back(result.mean);
  const std::string csv = results_csv(rows, o.record_time);
  if (out_path.empty()) {
    out << csv;
  } else {
    write_file(out_path, csv);
    out << protocol_markdown(result);
  }
  if (!plot_path.empty()) {
    const auto best = std::max_element(result.runs.begin(), result.runs.end(),
                                       [](const auto& a, const auto& b) {
                                         return a.metrics.picp < b.metrics.picp;
                                       });
    PlotOptions po;
    po.title = fmt::format("{} {} block {}: PICP {:.3f}, MPIW {:.3f}", data.name, best->protocol,
                           best->block, best->metrics.picp, best->metrics.mpiw);
    write_file(plot_path, interval_scatter_svg(best->targets, best->prediction, po));
  }
  return kOk;
}

int cmd_compare(const CommonOptions& o, const std::string& methods_text, const std::string& blocks,
                double alpha, const std::string& out_dir, const std::string& stats_only,
                std::ostream& out) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("--alpha must lie in (0, 1)");
  if (!stats_only.empty()) {
    const auto rows = parse_results_csv(read_file(stats_only));
    const auto table = comparison_from_rows(rows);
    const std::string text = comparison_stats(table, alpha);
    if (out_dir.empty()) {
      out << text;
    } else {
      write_file(fs::path(out_dir) / "stats.txt", text);
      write_file(fs::path(out_dir) / "stats.csv", comparison_stats_csv(table, alpha));
      out << text;
    }
    return kOk;
  }

  std::vector<Method> methods;
  for (const auto& name : split_list(methods_text, ',')) methods.push_back(parse_method(name));
  if (methods.size() < 2) throw ConfigError("compare needs at least 2 methods");
  check_gamma(o.gamma);

  std::vector<Dataset> datasets;
  SplitPlan fallback = SplitPlan::kfold(10, o.seed);
  std::size_t first = 100, second = 50;
  if (!blocks.empty()) {
    if (!o.data.empty()) throw ConfigError("--blocks generates its own datasets; drop --data");
    const std::uint64_t base = o.data_seed_set ? o.data_seed : o.seed;
    const auto levels = parse_noise_blocks(blocks);
    for (std::size_t i = 0; i < levels.size(); ++i) {
      datasets.push_back(gen_homoscedastic(o.n == 0 ? 1000 : o.n, levels[i], base + i));
    }
    fallback = SplitPlan::holdout(0.8, 1, o.seed);
  } else {
    datasets.push_back(dataset_from(o));
    if (o.fn == "hetero") first = 200, second = 100;
  }
  auto cfg = network_config(o, first, second);
  const auto plan = plan_from(o, fallback);
  const auto table = compare_methods(datasets, plan, o.gamma, cfg, methods, {o.threads});

  std::vector<ResultRow> rows;
  for (const auto& r : table.runs) rows.push_back(to_row(r));
  rows.insert(rows.end(), table.means.begin(), table.means.end());
  const std::string csv = results_csv(rows, o.record_time);
  const std::string text = comparison_stats(table, alpha);
  const std::string md = comparison_markdown(table);
  if (!out_dir.empty()) {
    write_file(fs::path(out_dir) / "comparison.csv", csv);
    write_file(fs::path(out_dir) / "comparison.md", md);
    write_file(fs::path(out_dir) / "stats.txt", text);
    write_file(fs::path(out_dir) / "stats.csv", comparison_stats_csv(table, alpha));
  }
  out << md << "\n" << text;
  return kOk;
}

int cmd_stats(const std::string& input, const std::string& direction, const std::string& metric,
              const std::string& csv_out, std::ostream& out) {
  Direction dir;
  if (direction == "higher") {
    dir = Direction::HigherBetter;
  } else if (direction == "lower") {
    dir = Direction::LowerBetter;
  } else {
    throw ConfigError("--direction must be higher or lower");
  }
  const auto m = read_score_matrix(input, dir);
  if (m.methods_count() < 3) throw DataError("Friedman test needs at least 3 method columns");
  const auto report = stats_report(m, metric, true);
  out << report.text;
  if (!csv_out.empty()) write_file(csv_out, report.csv);
  return kOk;
}

}  // namespace

std::map<std::string, std::string> read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config file '{}'", path.string()));
  std::map<std::string, std::string> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(fmt::format("{}:{}: expected key=value", path.string(), line_no));
    }
    std::string key = trim(line.substr(0, eq));
    if (key.rfind("--", 0) == 0) key.erase(0, 2);
    if (key.empty()) throw ConfigError(fmt::format("{}:{}: empty key", path.string(), line_no));
    values[key] = trim(line.substr(eq + 1));
  }
  return values;
}

std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> rest;
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (config_path.empty() || rest.size() < 2) return rest;
  std::vector<std::string> out(rest.begin(), rest.begin() + 2);
  for (const auto& [key, value] : read_config_file(config_path)) {
    out.push_back(fmt::format("--{}={}", key, value));
  }
  out.insert(out.end(), rest.begin() + 2, rest.end());
  return out;
}

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Shifted-error-function prediction intervals"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_help_all_flag("--help-all");

  std::string gen_fn, gen_out;
  std::size_t gen_n = 0;
  double gen_noise = 0.1;
  std::uint64_t gen_seed = 0;
  bool gen_sorted = false;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic benchmark dataset");
  gen->add_option("--fn", gen_fn, "trig | hetero")->required();
  gen->add_option("--n", gen_n, "Sample count (default 1000 trig, 500 hetero)");
  gen->add_option("--noise", gen_noise, "Noise standard deviation (trig)")->capture_default_str();
  gen->add_option("--seed", gen_seed, "Seed")->envname("SEF_SEED");
  gen->add_flag("--sorted", gen_sorted, "Sort rows by x");
  gen->add_option("--out", gen_out, "Output CSV")->required();

  CommonOptions run_opts;
  std::string run_out, run_plot;
  auto* run_cmd = app.add_subcommand("run", "Run SEF under a holdout or k-fold protocol");
  add_common(run_cmd, run_opts);
  run_cmd->add_option("--out", run_out, "Results CSV (stdout if omitted)");
  run_cmd->add_option("--plot", run_plot, "SVG of the highest-PICP split");

  CommonOptions cmp_opts;
  std::string cmp_methods = "sef,conformal,gaussian", cmp_blocks, cmp_out_dir, cmp_stats_only;
  double cmp_alpha = 0.05;
  auto* cmp = app.add_subcommand("compare", "Compare interval methods on shared splits");
  add_common(cmp, cmp_opts);
  cmp->add_option("--methods", cmp_methods, "Comma-separated: sef,conformal,gaussian")
      ->capture_default_str();
  cmp->add_option("--blocks", cmp_blocks, "Trig noise levels as blocks, e.g. noise:0.1..0.5");
  cmp->add_option("--alpha", cmp_alpha, "Significance level for post-hoc tests")
      ->capture_default_str();
  cmp->add_option("--out-dir", cmp_out_dir, "Directory for comparison.csv, stats.txt, ...");
  cmp->add_option("--stats-only", cmp_stats_only, "Recompute statistics from a results CSV");

  std::string st_input, st_direction = "higher", st_metric = "score", st_csv;
  auto* st = app.add_subcommand("stats", "Friedman, Nemenyi and Dunn tests on a score matrix");
  st->add_option("--input", st_input, "CSV: header of method names, one row per block")
      ->required();
  st->add_option("--direction", st_direction, "higher | lower")->capture_default_str();
  st->add_option("--metric", st_metric, "Metric name for the report")->capture_default_str();
  st->add_option("--csv-out", st_csv, "Also write the report as CSV");

  try {
    const auto args = expand_config(raw_args);
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? kOk : kUsage;
    }
    run_opts.data_seed_set = run_cmd->count("--data-seed") > 0;
    cmp_opts.data_seed_set = cmp->count("--data-seed") > 0;

    if (gen->parsed()) return cmd_gen(gen_fn, gen_n, gen_noise, gen_seed, gen_sorted, gen_out, out);
    if (run_cmd->parsed()) return cmd_run(run_opts, run_out, run_plot, out);
    if (cmp->parsed()) {
      return cmd_compare(cmp_opts, cmp_methods, cmp_blocks, cmp_alpha, cmp_out_dir,
                         cmp_stats_only, out);
    }
    if (st->parsed()) return cmd_stats(st_input, st_direction, st_metric, st_csv, out);
  } catch (const TrainingError& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}

}  // namespace sef::cli
