#include "mfdist/bench.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include "mfdist/errors.hpp"

namespace mfdist {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Stream ids below a replicate seed.
constexpr std::uint64_t kExploreStream = 1, kExploitStream = 2, kEvalStream = 3;
// Stream ids below the master seed.
constexpr std::uint64_t kOracleStream = 0x6f7261636c65ULL, kPilotStream = 0x70696c6f74ULL;

template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < std::min(workers, count); ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
}

}  // namespace

// ---------------------------------------------------------------- single runs

Measure run_ecdf_y(const ModelSuite& suite, double budget, Rng& rng) {
  if (budget < suite.cost_y())
    throw Infeasible("budget " + format_number(budget) + " is below the cost of one Y sample (" +
                     format_number(suite.cost_y()) + ")");
  auto n = static_cast<long>(std::floor(budget / suite.cost_y()));
  while (n > 1 && static_cast<double>(n) * suite.cost_y() > budget) --n;
  std::vector<double> row(static_cast<std::size_t>(suite.n() + 1));
  std::vector<double> ys(static_cast<std::size_t>(n));
  for (auto& y : ys) {
    suite.draw(rng, row);
    y = row[0];
  }
  return Measure(std::move(ys));
}

FixedRateResult run_fixed_m(const ModelSuite& suite, double budget, int m, Subset subset,
                            std::uint64_t explore_seed, std::uint64_t exploit_seed) {
  const int min_m = suite.feature_count(subset) + 2;
  if (m < min_m)
    throw Infeasible("fixed exploration rate " + std::to_string(m) + " is below the minimum " +
                     std::to_string(min_m) + " for " + subset.to_string());
  const double explore_cost = static_cast<double>(m) * suite.c_epr();
  if (!(budget > explore_cost + suite.c_ept(subset)))
    throw Infeasible("budget " + format_number(budget) + " leaves no exploitation draw after " +
                     std::to_string(m) + " exploration rounds");
  Rng explore_rng(explore_seed);
  const Matrix<double> log = suite.draw_block(explore_rng, m);
  const Emulator emulator(log, suite, subset, EmulatorVariant::standard);
  const double c = suite.c_ept(subset);
  auto draws = static_cast<long>(std::floor((budget - explore_cost) / c));
  while (draws > 0 && explore_cost + static_cast<double>(draws) * c > budget) --draws;
  Rng exploit_rng(exploit_seed);
  auto r = exploit_with(emulator, suite, draws, exploit_rng);
  return FixedRateResult{std::move(r.estimate), draws, explore_cost + static_cast<double>(draws) * c};
}

// ---------------------------------------------------------------- trade-off curve

double CurveFit::operator()(double m, double budget, double c_epr) const {
  return alpha1 / std::sqrt(m) + alpha2 / std::sqrt(budget / c_epr - m);
}

CurveFit fit_tradeoff_curve(const std::vector<CurvePoint>& points, double budget, double c_epr) {
  if (points.size() < 3) throw std::invalid_argument("curve fit needs at least 3 points");
  const double horizon = budget / c_epr;
  bool distinct = false;
  for (const auto& p : points) {
    if (!(p.m > 0 && p.m < horizon))
      throw std::invalid_argument("curve fit: every m must lie in (0, B/c_epr)");
    if (p.m != points.front().m) distinct = true;
  }
  if (!distinct) throw std::invalid_argument("curve fit: degenerate basis (all m equal)");

  const auto n = static_cast<Eigen::Index>(points.size());
  Matrix<double> basis(n, 2);
  Vector<double> err(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = points[static_cast<std::size_t>(i)];
    basis(i, 0) = 1.0 / std::sqrt(p.m);
    basis(i, 1) = 1.0 / std::sqrt(horizon - p.m);
    err(i) = p.error;
  }
  Vector<double> alpha = basis.colPivHouseholderQr().solve(err);
  CurveFit fit;
  if (alpha(0) < 0 || alpha(1) < 0) {
    fit.clipped = true;
    // Refit each single-column model and keep the better nonnegative one.
    double best = std::numeric_limits<double>::infinity();
    Vector<double> chosen = Vector<double>::Zero(2);
    for (int keep = 0; keep < 2; ++keep) {
      const auto col = basis.col(keep);
      const double a = std::max(0.0, col.dot(err) / col.squaredNorm());
      Vector<double> cand = Vector<double>::Zero(2);
      cand(keep) = a;
      const double r = (err - basis * cand).norm();
      if (r < best) {
        best = r;
        chosen = cand;
      }
    }
    alpha = chosen;
  }
  fit.alpha1 = alpha(0);
  fit.alpha2 = alpha(1);
  fit.residual_norm = (err - basis * alpha).norm();
  fit.minimizer = (fit.alpha1 > 0 && fit.alpha2 > 0)
                      ? horizon / (1.0 + std::pow(fit.alpha2 / fit.alpha1, 2.0 / 3.0))
                      : kNaN;
  return fit;
}

// ---------------------------------------------------------------- config

std::string to_string(EvalMode m) { return m == EvalMode::full ? "full" : "sampled"; }

EvalMode eval_mode_from_string(const std::string& s) {
  if (s == "full") return EvalMode::full;
  if (s == "sampled") return EvalMode::sampled;
  throw ConfigError("eval mode must be 'full' or 'sampled', got '" + s + "'");
}

MethodSpec MethodSpec::parse(const std::string& text) {
  using K = MethodSpec::Kind;
  if (text == "oracle") return {K::oracle, 0, text};
  if (text == "ecdf-y") return {K::ecdf_y, 0, text};
  if (text == "aetc-d") return {K::aetc_d, 0, text};
  if (text == "aetc-d-no") return {K::aetc_d_no, 0, text};
  if (text == "aetc-d-q") return {K::aetc_d_q, 0, text};
  constexpr std::string_view prefix = "fixed-m:";
  if (text.starts_with(prefix)) {
    int m = 0;
    const char* first = text.data() + prefix.size();
    const char* last = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, m);
    if (ec != std::errc() || ptr != last || m < 1)
      throw ConfigError("bad fixed exploration rate in '" + text + "'");
    return {K::fixed_m, m, text};
  }
  throw ConfigError("unknown method '" + text +
                    "' (expected oracle, ecdf-y, aetc-d, aetc-d-no, aetc-d-q, fixed-m:<m>)");
}

ExperimentConfig parse_experiment_config(const nlohmann::json& doc,
                                         const std::filesystem::path& base_dir) {
  static const std::set<std::string> known{"suite",          "methods", "budgets",
                                           "replicates",     "eval_samples", "oracle_samples",
                                           "seed",           "eval",    "fixed_subset",
                                           "pilot_samples"};
  if (!doc.is_object()) throw ConfigError("experiment config must be a JSON object");
  for (auto it = doc.begin(); it != doc.end(); ++it)
    if (!known.count(it.key())) throw ConfigError("unknown config key '" + it.key() + "'");

  ExperimentConfig c;
  c.base_dir = base_dir;
  try {
    if (doc.contains("suite")) c.suite = doc.at("suite");
    if (!doc.contains("methods") || !doc.contains("budgets"))
      throw ConfigError("config needs 'methods' and 'budgets'");
    for (const auto& m : doc.at("methods")) c.methods.push_back(MethodSpec::parse(m.get<std::string>()));
    c.budgets = doc.at("budgets").get<std::vector<double>>();
    c.replicates = doc.value("replicates", c.replicates);
    c.eval_samples = doc.value("eval_samples", c.eval_samples);
    c.oracle_samples = doc.value("oracle_samples", c.oracle_samples);
    c.seed = doc.value("seed", c.seed);
    if (doc.contains("eval")) c.eval = eval_mode_from_string(doc.at("eval").get<std::string>());
    if (doc.contains("fixed_subset")) {
      const auto members = doc.at("fixed_subset").get<std::vector<int>>();
      c.fixed_subset = Subset::of(std::span<const int>(members));
    }
    c.pilot_samples = doc.value("pilot_samples", c.pilot_samples);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  if (c.methods.empty()) throw ConfigError("config lists no methods");
  if (c.budgets.empty()) throw ConfigError("config lists no budgets");
  for (std::size_t i = 0; i < c.budgets.size(); ++i) {
    if (!(c.budgets[i] > 0)) throw ConfigError("budgets must be positive");
    if (i > 0 && !(c.budgets[i] > c.budgets[i - 1]))
      throw ConfigError("budgets must be strictly increasing");
  }
  if (c.replicates < 1) throw ConfigError("replicates must be at least 1");
  if (c.eval_samples < 1) throw ConfigError("eval_samples must be at least 1");
  if (c.oracle_samples < 2) throw ConfigError("oracle_samples must be at least 2");
  if (c.pilot_samples < 10) throw ConfigError("pilot_samples must be at least 10");
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_experiment_config(doc, path.parent_path());
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json methods = nlohmann::json::array();
  for (const auto& m : c.methods) methods.push_back(m.label);
  nlohmann::json doc{{"suite", c.suite},
                     {"methods", methods},
                     {"budgets", c.budgets},
                     {"replicates", c.replicates},
                     {"eval_samples", c.eval_samples},
                     {"oracle_samples", c.oracle_samples},
                     {"seed", c.seed},
                     {"eval", to_string(c.eval)},
                     {"pilot_samples", c.pilot_samples}};
  if (c.fixed_subset) doc["fixed_subset"] = c.fixed_subset->members();
  return doc;
}

// ---------------------------------------------------------------- experiments

Measure oracle_measure(const ModelSuite& suite, long samples, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> row(static_cast<std::size_t>(suite.n() + 1));
  std::vector<double> ys(static_cast<std::size_t>(samples));
  for (auto& y : ys) {
    suite.draw(rng, row);
    y = row[0];
  }
  return Measure(std::move(ys));
}

double nearest_rank_quantile(std::vector<double> values, double p) {
  if (values.empty()) return kNaN;
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(p * n));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows,
                                  const std::vector<MethodSpec>& methods,
                                  const std::vector<double>& budgets) {
  std::vector<SummaryRow> out;
  for (const auto& method : methods) {
    for (double b : budgets) {
      SummaryRow s;
      s.method = method.label;
      s.budget = b;
      std::vector<double> errors;
      for (const auto& r : rows) {
        if (r.method != method.label || r.budget != b) continue;
        if (r.ok())
          errors.push_back(r.w1_error);
        else
          ++s.failures;
      }
      if (errors.empty()) {
        s.mean = s.q05 = s.q50 = s.q95 = kNaN;
      } else {
        double total = 0;
        for (double e : errors) total += e;
        s.mean = total / static_cast<double>(errors.size());
        s.q05 = nearest_rank_quantile(errors, 0.05);
        s.q50 = nearest_rank_quantile(errors, 0.50);
        s.q95 = nearest_rank_quantile(errors, 0.95);
      }
      out.push_back(s);
    }
  }
  return out;
}

namespace {

std::string run_id(const std::string& method, double budget, int replicate) {
  return method + "_B" + format_number(budget) + "_r" + std::to_string(replicate);
}

struct Cell {
  std::size_t method;
  std::size_t budget;
  int replicate;
};

}  // namespace

ExperimentResult run_experiment(const ModelSuite& suite, const ExperimentConfig& config,
                                const RunOptions& options) {
  ExperimentResult result;
  result.c_epr = suite.c_epr();
  const Measure oracle =
      oracle_measure(suite, config.oracle_samples, derive_seed(config.seed, kOracleStream));
  result.oracle_moments = moment_summary(oracle);

  const bool needs_subset = std::any_of(config.methods.begin(), config.methods.end(), [](const auto& m) {
    return m.kind == MethodSpec::Kind::fixed_m;
  });
  if (needs_subset) {
    if (config.fixed_subset) {
      result.fixed_subset = config.fixed_subset;
    } else {
      Rng pilot_rng(derive_seed(config.seed, kPilotStream));
      const auto pilot = pilot_statistics(suite, config.pilot_samples, pilot_rng);
      result.fixed_subset =
          oracle_optimum(pilot.subsets, config.budgets.front(), suite.c_epr()).subset;
    }
  }

  std::vector<Cell> cells;
  for (std::size_t mi = 0; mi < config.methods.size(); ++mi)
    for (std::size_t bi = 0; bi < config.budgets.size(); ++bi)
      for (int r = 0; r < config.replicates; ++r) cells.push_back({mi, bi, r});

  std::vector<ResultRow> rows(cells.size());
  std::vector<std::vector<TraceRound>> traces(cells.size());
  std::vector<std::optional<Measure>> kept(cells.size());

  parallel_for(cells.size(), options.threads, [&](std::size_t idx) {
    const Cell& cell = cells[idx];
    const MethodSpec& method = config.methods[cell.method];
    const double budget = config.budgets[cell.budget];
    ResultRow& row = rows[idx];
    row.method = method.label;
    row.budget = budget;
    row.replicate = cell.replicate;
    // Methods share replicate seeds (common random numbers across methods).
    row.seed = derive_seed(config.seed, cell.budget + 1, static_cast<std::uint64_t>(cell.replicate) + 1);
    const std::uint64_t explore_seed = derive_seed(row.seed, kExploreStream);
    const std::uint64_t exploit_seed = derive_seed(row.seed, kExploitStream);
    try {
      std::optional<Measure> estimate;
      using K = MethodSpec::Kind;
      switch (method.kind) {
        case K::oracle:
          estimate = oracle;
          row.spend = 0;
          break;
        case K::ecdf_y: {
          Rng rng(exploit_seed);
          estimate = run_ecdf_y(suite, budget, rng);
          row.spend = static_cast<double>(estimate->size()) * suite.cost_y();
          break;
        }
        case K::aetc_d:
        case K::aetc_d_no:
        case K::aetc_d_q: {
          const auto variant = method.kind == K::aetc_d     ? EmulatorVariant::standard
                               : method.kind == K::aetc_d_no ? EmulatorVariant::no_noise
                                                             : EmulatorVariant::quantile;
          PolicyState state(suite, budget, explore_seed);
          run_exploration(state, suite);
          row.m = state.t();
          if (state.chosen()) row.subset = state.chosen()->to_string();
          row.spend = state.spent();
          if (options.keep_traces) traces[idx] = state.trace();
          Rng rng(exploit_seed);
          auto r = exploit(state, suite, variant, rng);
          row.spend = r.spend;
          estimate = std::move(r.estimate);
          break;
        }
        case K::fixed_m: {
          row.m = method.fixed_m;
          row.subset = result.fixed_subset->to_string();
          auto r = run_fixed_m(suite, budget, method.fixed_m, *result.fixed_subset, explore_seed,
                               exploit_seed);
          row.spend = r.spend;
          estimate = std::move(r.estimate);
          break;
        }
      }
      if (config.eval == EvalMode::full) {
        row.w1_error = wasserstein1(*estimate, oracle);
      } else {
        Rng rng(derive_seed(row.seed, kEvalStream));
        std::vector<double> eval(static_cast<std::size_t>(config.eval_samples));
        for (auto& v : eval) v = sample_inverse_transform(*estimate, rng.uniform_open0());
        row.w1_error = wasserstein1(Measure(std::move(eval)), oracle);
      }
      if (estimate->size() >= 2) {
        const auto ms = moment_summary(*estimate);
        row.mean = ms.mean;
        row.variance = ms.variance;
        row.skewness = ms.skewness.value_or(kNaN);
        row.kurtosis = ms.kurtosis.value_or(kNaN);
      } else {
        row.mean = estimate->atoms()[0];
        row.variance = row.skewness = row.kurtosis = kNaN;
      }
      if (options.keep_samples && cell.replicate == 0) kept[idx] = std::move(estimate);
    } catch (const std::exception& e) {
      row.status = std::string("failed: ") + e.what();
      row.w1_error = row.mean = row.variance = row.skewness = row.kurtosis = kNaN;
    }
  });

  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (options.keep_traces && !traces[i].empty())
      result.traces.emplace(run_id(rows[i].method, rows[i].budget, rows[i].replicate),
                            std::move(traces[i]));
    if (kept[i])
      result.samples.emplace(rows[i].method + "_B" + format_number(rows[i].budget), std::move(*kept[i]));
  }
  result.rows = std::move(rows);
  result.summary = summarize(result.rows, config.methods, config.budgets);
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  return run_experiment(suite_from_json(config.suite, config.base_dir), config, options);
}

std::vector<StatisticRow> statistics_comparison(const ExperimentResult& result,
                                                const ExperimentConfig& config) {
  const auto& truth = result.oracle_moments;
  const std::pair<const char*, double> stats[] = {
      {"mean", truth.mean},
      {"variance", truth.variance},
      {"skewness", truth.skewness.value_or(kNaN)},
      {"kurtosis", truth.kurtosis.value_or(kNaN)}};
  std::vector<StatisticRow> out;
  for (const auto& method : config.methods) {
    for (double b : config.budgets) {
      for (const auto& [name, target] : stats) {
        StatisticRow s;
        s.method = method.label;
        s.budget = b;
        s.statistic = name;
        double total = 0;
        for (const auto& r : result.rows) {
          if (r.method != method.label || r.budget != b) continue;
          const std::string_view n(name);
          const double v = n == "mean"       ? r.mean
                           : n == "variance" ? r.variance
                           : n == "skewness" ? r.skewness
                                             : r.kurtosis;
          if (!r.ok() || !std::isfinite(v)) {
            ++s.failures;
            continue;
          }
          total += (v - target) * (v - target);
          ++s.used;
        }
        s.mse = s.used ? total / s.used : kNaN;
        out.push_back(s);
      }
    }
  }
  return out;
}

std::vector<StatisticRow> run_statistics_comparison(const ModelSuite& suite,
                                                    const ExperimentConfig& config,
                                                    const RunOptions& options) {
  return statistics_comparison(run_experiment(suite, config, options), config);
}

// ---------------------------------------------------------------- output

std::string format_number(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> parse_csv_record(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

double parse_number(const std::string& s, std::size_t line) {
  if (s.empty()) return kNaN;
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError("'" + s + "' is not a number", line);
  return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

const char* kResultsHeader =
    "method,budget,replicate,seed,w1_error,subset,m,spend,mean,variance,skewness,kurtosis,status";

}  // namespace

void write_results_csv(const std::vector<ResultRow>& rows, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << kResultsHeader << "\r\n";
  for (const auto& r : rows) {
    out << csv_field(r.method) << ',' << format_number(r.budget) << ',' << r.replicate << ','
        << r.seed << ',' << format_number(r.w1_error) << ',' << csv_field(r.subset) << ',' << r.m
        << ',' << format_number(r.spend) << ',' << format_number(r.mean) << ','
        << format_number(r.variance) << ',' << format_number(r.skewness) << ','
        << format_number(r.kurtosis) << ',' << csv_field(r.status) << "\r\n";
  }
}

void write_summary_csv(const std::vector<SummaryRow>& rows, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "method,budget,mean,q05,q50,q95,failures\r\n";
  for (const auto& s : rows)
    out << csv_field(s.method) << ',' << format_number(s.budget) << ',' << format_number(s.mean)
        << ',' << format_number(s.q05) << ',' << format_number(s.q50) << ','
        << format_number(s.q95) << ',' << s.failures << "\r\n";
}

void write_statistics_csv(const std::vector<StatisticRow>& rows, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "method,budget,statistic,mse,used,failures\r\n";
  for (const auto& s : rows)
    out << csv_field(s.method) << ',' << format_number(s.budget) << ',' << s.statistic << ','
        << format_number(s.mse) << ',' << s.used << ',' << s.failures << "\r\n";
}

std::vector<ResultRow> read_results_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ParseError("empty results file", line_no);
  const auto header = parse_csv_record(line);
  if (header != parse_csv_record(kResultsHeader))
    throw ParseError("unexpected results header", line_no);
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = parse_csv_record(line);
    if (f.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                           std::to_string(f.size()),
                       line_no);
    ResultRow r;
    r.method = f[0];
    r.budget = parse_number(f[1], line_no);
    r.replicate = static_cast<int>(parse_number(f[2], line_no));
    r.seed = std::stoull(f[3]);
    r.w1_error = parse_number(f[4], line_no);
    r.subset = f[5];
    r.m = static_cast<int>(parse_number(f[6], line_no));
    r.spend = parse_number(f[7], line_no);
    r.mean = parse_number(f[8], line_no);
    r.variance = parse_number(f[9], line_no);
    r.skewness = parse_number(f[10], line_no);
    r.kurtosis = parse_number(f[11], line_no);
    r.status = f[12];
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_experiment(const ExperimentResult& result, const ExperimentConfig& config,
                      const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_results_csv(result.rows, dir / "results.csv");
  write_summary_csv(result.summary, dir / "summary.csv");
  {
    nlohmann::json meta{{"config", to_json(config)}, {"c_epr", result.c_epr}};
    if (result.fixed_subset) meta["fixed_subset"] = result.fixed_subset->members();
    auto out = open_out(dir / "run.json");
    out << meta.dump(2) << "\n";
  }
  if (!result.traces.empty()) {
    std::filesystem::create_directories(dir / "trace");
    for (const auto& [id, rounds] : result.traces) {
      auto out = open_out(dir / "trace" / (id + ".jsonl"));
      for (const auto& round : rounds) out << to_json(round).dump() << "\n";
    }
  }
  if (!result.samples.empty()) {
    std::filesystem::create_directories(dir / "samples");
    for (const auto& [id, m] : result.samples) {
      auto out = open_out(dir / "samples" / (id + ".txt"));
      for (double x : m.atoms()) out << format_number(x) << "\n";
    }
  }
}

std::map<double, std::vector<CurvePoint>> fixed_m_curves(const std::vector<ResultRow>& rows) {
  std::map<double, std::map<int, std::pair<double, int>>> acc;
  for (const auto& r : rows) {
    if (!r.method.starts_with("fixed-m:") || !r.ok()) continue;
    auto& slot = acc[r.budget][r.m];
    slot.first += r.w1_error;
    slot.second += 1;
  }
  std::map<double, std::vector<CurvePoint>> out;
  for (const auto& [budget, by_m] : acc)
    for (const auto& [m, sum] : by_m)
      out[budget].push_back({static_cast<double>(m), sum.first / sum.second});
  return out;
}

}  // namespace mfdist
