// mfdist command-line driver.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "mfdist/bench.hpp"
#include "mfdist/errors.hpp"

namespace fs = std::filesystem;
using namespace mfdist;

namespace {

std::vector<int> parse_grid(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    const int m = std::stoi(item, &pos);
    if (pos != item.size() || m < 1) throw ConfigError("bad m-grid entry '" + item + "'");
    out.push_back(m);
  }
  if (out.empty()) throw ConfigError("empty m-grid");
  return out;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void print_summary(const std::vector<SummaryRow>& rows) {
  std::printf("%-14s %10s %12s %12s %12s %12s %8s\n", "method", "budget", "mean", "q05", "q50",
              "q95", "failures");
  for (const auto& s : rows)
    std::printf("%-14s %10g %12.5g %12.5g %12.5g %12.5g %8d\n", s.method.c_str(), s.budget, s.mean,
                s.q05, s.q50, s.q95, s.failures);
}

void print_fit(double budget, const CurveFit& fit) {
  std::printf("B=%g alpha1=%.6g alpha2=%.6g residual=%.6g minimizer=%.6g\n", budget, fit.alpha1,
              fit.alpha2, fit.residual_norm, fit.minimizer);
  if (fit.clipped) std::fprintf(stderr, "warning: B=%g: negative coefficient clipped to zero\n", budget);
}

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

ExperimentConfig load(const Common& c) {
  auto config = load_experiment_config(c.config);
  if (c.seed) config.seed = *c.seed;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multifidelity distribution learning experiments"};
  app.require_subcommand(1);

  Common run_opts;
  std::string eval;
  bool dump_samples = false;
  auto* run = app.add_subcommand("run", "Budget sweep over the configured methods");
  run->add_option("--config", run_opts.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", run_opts.out, "Output directory")->required();
  run->add_option("--seed", run_opts.seed, "Override the master seed");
  run->add_option("--threads", run_opts.threads, "Worker threads")->check(CLI::PositiveNumber);
  run->add_option("--eval", eval, "Error evaluation: sampled or full")
      ->check(CLI::IsMember({"sampled", "full"}));
  run->add_flag("--dump-samples", dump_samples, "Write replicate-0 estimates to samples/");

  Common fixed_opts;
  std::string m_grid;
  auto* fixed = app.add_subcommand("fixed-m", "Fixed exploration-rate sweep and curve fit");
  fixed->add_option("--config", fixed_opts.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  fixed->add_option("--m-grid", m_grid, "Comma-separated exploration rates")->required();
  fixed->add_option("--out", fixed_opts.out, "Output directory");
  fixed->add_option("--seed", fixed_opts.seed, "Override the master seed");
  fixed->add_option("--threads", fixed_opts.threads, "Worker threads")->check(CLI::PositiveNumber);

  std::string curve_in;
  std::optional<double> curve_c_epr;
  auto* fit = app.add_subcommand("fit-curve", "Fit a1/sqrt(m) + a2/sqrt(B/c_epr - m) to fixed-m rows");
  fit->add_option("--in", curve_in, "results.csv from fixed-m")->required()->check(CLI::ExistingFile);
  fit->add_option("--c-epr", curve_c_epr, "Exploration round cost (default: run.json next to --in)");

  std::string suite_path;
  long pilot = 100'000;
  double oracle_budget = 1000;
  std::uint64_t oracle_seed = 1;
  auto* oracle = app.add_subcommand("oracle", "Pilot estimates of k1, k2, S_opt and m*");
  oracle->add_option("--suite", suite_path, "Suite spec (JSON)")->required()->check(CLI::ExistingFile);
  oracle->add_option("--pilot", pilot, "Pilot sample size")->check(CLI::Range(10L, 1'000'000'000L));
  oracle->add_option("--budget", oracle_budget, "Budget for m* and G*")->check(CLI::PositiveNumber);
  oracle->add_option("--seed", oracle_seed, "Pilot seed");

  Common stats_opts;
  auto* stats = app.add_subcommand("stats", "MSE of mean, variance, skewness and kurtosis estimates");
  stats->add_option("--config", stats_opts.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  stats->add_option("--out", stats_opts.out, "Output directory")->required();
  stats->add_option("--seed", stats_opts.seed, "Override the master seed");
  stats->add_option("--threads", stats_opts.threads, "Worker threads")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      auto config = load(run_opts);
      if (!eval.empty()) config.eval = eval_mode_from_string(eval);
      const auto result = run_experiment(config, {run_opts.threads, true, dump_samples});
      write_experiment(result, config, run_opts.out);
      print_summary(result.summary);
    } else if (*fixed) {
      auto config = load(fixed_opts);
      config.methods.clear();
      for (int m : parse_grid(m_grid)) config.methods.push_back(MethodSpec::parse("fixed-m:" + std::to_string(m)));
      const auto result = run_experiment(config, {fixed_opts.threads, false, false});
      if (!fixed_opts.out.empty()) write_experiment(result, config, fixed_opts.out);
      print_summary(result.summary);
      std::printf("subset %s\n", result.fixed_subset->to_string().c_str());
      for (const auto& [budget, points] : fixed_m_curves(result.rows)) {
        if (points.size() < 3) continue;
        print_fit(budget, fit_tradeoff_curve(points, budget, result.c_epr));
      }
    } else if (*fit) {
      double c_epr = 0;
      if (curve_c_epr) {
        c_epr = *curve_c_epr;
      } else {
        const auto meta = fs::path(curve_in).parent_path() / "run.json";
        if (!fs::exists(meta)) throw ConfigError("no run.json beside " + curve_in + "; pass --c-epr");
        c_epr = read_json(meta).at("c_epr").get<double>();
      }
      for (const auto& [budget, points] : fixed_m_curves(read_results_csv(curve_in)))
        print_fit(budget, fit_tradeoff_curve(points, budget, c_epr));
    } else if (*oracle) {
      const auto suite = suite_from_json(read_json(suite_path), fs::path(suite_path).parent_path());
      Rng rng(oracle_seed);
      const auto ps = pilot_statistics(suite, pilot, rng);
      std::printf("J0(Y)=%.6g J1(Y)=%.6g c_epr=%.6g\n", ps.j0_response, ps.j1_response, suite.c_epr());
      std::printf("%-10s %12s %12s %12s %12s\n", "subset", "sigma", "J1(eps)", "k1", "k2");
      for (const auto& s : ps.subsets)
        std::printf("%-10s %12.6g %12.6g %12.6g %12.6g\n", s.subset.to_string().c_str(), s.sigma,
                    s.j_residual, s.k1, s.k2);
      const auto opt = oracle_optimum(ps.subsets, oracle_budget, suite.c_epr());
      const auto& best = *std::find_if(ps.subsets.begin(), ps.subsets.end(),
                                       [&](const auto& s) { return s.subset == opt.subset; });
      std::printf("S_opt=%s m*=%.6g G*=%.6g efficiency=%.6g (B=%g)\n", opt.subset.to_string().c_str(),
                  opt.m_star, opt.g_star,
                  efficiency_ratio(best.k1, best.k2, ps.j0_response, suite.cost_y(), oracle_budget,
                                   suite.c_epr()),
                  oracle_budget);
    } else if (*stats) {
      const auto config = load(stats_opts);
      const auto rows = run_statistics_comparison(suite_from_json(config.suite, config.base_dir), config,
                                                  {stats_opts.threads, false, false});
      fs::create_directories(stats_opts.out);
      write_statistics_csv(rows, fs::path(stats_opts.out) / "statistics.csv");
      for (const auto& r : rows)
        std::printf("%-14s %10g %-9s %12.5g (%d used, %d failed)\n", r.method.c_str(), r.budget,
                    r.statistic.c_str(), r.mse, r.used, r.failures);
    }
  } catch (const ParseError& e) {
    std::cerr << "mfdist: parse error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "mfdist: config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "mfdist: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
