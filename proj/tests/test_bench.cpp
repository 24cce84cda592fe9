#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "mfdist/bench.hpp"

using namespace mfdist;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "mfdist_test_bench" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ExperimentConfig small_config(std::vector<std::string> methods, std::vector<double> budgets, int reps) {
  nlohmann::json doc{{"methods", methods}, {"budgets", budgets}, {"replicates", reps},
                     {"oracle_samples", 20000}, {"seed", 7}};
  return parse_experiment_config(doc);
}

}  // namespace

TEST_CASE("run_ecdf_y") {
  const auto suite = ishigami_suite(IshigamiVariant::perfect);
  Rng rng(1);
  CHECK(run_ecdf_y(suite, 1.0, rng).size() == 1);
  CHECK(run_ecdf_y(suite, 1000, rng).size() == 1000);
  CHECK(run_ecdf_y(suite, 1000.5, rng).size() == 1000);
  CHECK_THROWS_AS(run_ecdf_y(suite, 0.5, rng), Infeasible);
}

TEST_CASE("run_fixed_m") {
  const auto suite = ishigami_suite(IshigamiVariant::perfect);
  const Subset one = Subset::of({1});
  const auto r = run_fixed_m(suite, 1000, 100, one, 1, 2);
  CHECK(r.spend <= 1000);
  // 17898 draws cost exactly B in decimal; in binary that total rounds above B
  CHECK(r.draws == 17897);
  CHECK(r.estimate.size() == std::size_t(r.draws));
  // minimum rate with a budget that just covers one exploitation draw
  const double tiny = 3 * suite.c_epr() + 0.05 + 1e-9;
  const auto edge = run_fixed_m(suite, tiny, 3, one, 1, 2);
  CHECK(edge.draws == 1);
  CHECK(edge.spend <= tiny);
  CHECK_THROWS_AS(run_fixed_m(suite, 3 * suite.c_epr() + 0.01, 3, one, 1, 2), Infeasible);
  CHECK_THROWS_AS(run_fixed_m(suite, 1000, 2, one, 1, 2), Infeasible);
  CHECK_THROWS_AS(run_fixed_m(suite, 1000, 952, one, 1, 2), Infeasible);
  CHECK(run_fixed_m(suite, 1000, 951, one, 1, 2).draws == 9);
  CHECK_NOTHROW(run_fixed_m(suite, 1000, 600, one, 1, 2));
}

TEST_CASE("fit_tradeoff_curve") {
  const double b = 1000, c = 1.051, h = b / c;
  std::vector<CurvePoint> exact;
  for (double m : {10.0, 30.0, 50.0, 100.0, 200.0, 300.0, 400.0, 500.0, 600.0})
    exact.push_back({m, 2 / std::sqrt(m) + 3 / std::sqrt(h - m)});
  const auto fit = fit_tradeoff_curve(exact, b, c);
  CHECK(std::abs(fit.alpha1 - 2) < 1e-8);
  CHECK(std::abs(fit.alpha2 - 3) < 1e-8);
  CHECK(fit.residual_norm < 1e-10);
  CHECK_FALSE(fit.clipped);
  CHECK(fit.minimizer == doctest::Approx(h / (1 + std::pow(1.5, 2.0 / 3.0))));
  CHECK(fit(100, b, c) == doctest::Approx(exact[3].error));

  std::vector<CurvePoint> first_only;
  for (const auto& p : exact) first_only.push_back({p.m, 2 / std::sqrt(p.m)});
  const auto f1 = fit_tradeoff_curve(first_only, b, c);
  CHECK(std::abs(f1.alpha2) < 1e-8);
  CHECK_FALSE(f1.minimizer < 0.99 * h);

  std::vector<CurvePoint> rising;
  for (double m : {10.0, 100.0, 500.0}) rising.push_back({m, m / 100});
  const auto clipped = fit_tradeoff_curve(rising, b, c);
  CHECK(clipped.alpha1 >= 0);
  CHECK(clipped.alpha2 >= 0);

  CHECK_THROWS_AS(fit_tradeoff_curve({{10, 1}, {10, 1}, {10, 2}}, b, c), std::invalid_argument);
  CHECK_THROWS_AS(fit_tradeoff_curve({{10, 1}, {20, 1}}, b, c), std::invalid_argument);
  CHECK_THROWS_AS(fit_tradeoff_curve({{10, 1}, {20, 1}, {h + 1, 1}}, b, c), std::invalid_argument);
}

TEST_CASE("method specs and configs") {
  CHECK(MethodSpec::parse("fixed-m:30").fixed_m == 30);
  CHECK(MethodSpec::parse("aetc-d-q").kind == MethodSpec::Kind::aetc_d_q);
  CHECK_THROWS_AS(MethodSpec::parse("fixed-m:x"), ConfigError);
  CHECK_THROWS_AS(MethodSpec::parse("mlmc"), ConfigError);

  const auto c = small_config({"ecdf-y"}, {10, 100}, 3);
  CHECK(c.replicates == 3);
  CHECK(c.eval_samples == 200);
  CHECK(c.eval == EvalMode::sampled);
  CHECK(parse_experiment_config(to_json(c)).budgets == c.budgets);

  nlohmann::json doc{{"methods", {"ecdf-y"}}, {"budgets", {10}}};
  CHECK_NOTHROW(parse_experiment_config(doc));
  doc["budgetz"] = 1;
  CHECK_THROWS_AS(parse_experiment_config(doc), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config({{"methods", {"ecdf-y"}}, {"budgets", {100, 10}}}), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config({{"methods", {"ecdf-y"}}, {"budgets", {-1}}}), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config({{"methods", {"ecdf-y"}}, {"budgets", {10}}, {"replicates", 0}}),
                  ConfigError);
  CHECK_THROWS_AS(parse_experiment_config({{"methods", {"ecdf-y"}}, {"budgets", {10}}, {"eval", "half"}}),
                  ConfigError);
}

TEST_CASE("run_experiment rows and summaries") {
  const auto one = run_experiment(small_config({"ecdf-y"}, {100}, 1));
  CHECK(one.rows.size() == 1);

  auto config = small_config({"ecdf-y", "aetc-d", "fixed-m:5"}, {4.1, 100, 1000}, 5);
  const auto r = run_experiment(config);
  CHECK(r.rows.size() == 3 * 3 * 5);
  int failures = 0;
  for (const auto& row : r.rows) {
    CHECK(row.spend <= row.budget);
    if (row.ok()) {
      CHECK(row.w1_error >= 0);
    } else {
      ++failures;
      CHECK(std::isnan(row.w1_error));
    }
  }
  CHECK(failures > 0);  // B = 4.1 cannot fund AETC-d or a fixed rate of 5
  for (const auto& s : r.summary) {
    std::vector<double> errs;
    int fails = 0;
    for (const auto& row : r.rows)
      if (row.method == s.method && row.budget == s.budget) {
        if (row.ok())
          errs.push_back(row.w1_error);
        else
          ++fails;
      }
    CHECK(s.failures == fails);
    if (errs.empty()) continue;
    double mean = 0;
    for (double e : errs) mean += e;
    mean /= double(errs.size());
    CHECK(std::abs(s.mean - mean) <= 1e-12);
    CHECK(s.q05 <= s.q50);
    CHECK(s.q50 <= s.q95);
  }
  CHECK(r.fixed_subset.has_value());
  CHECK(*r.fixed_subset == Subset::of({1}));
}

TEST_CASE("nearest-rank quantiles") {
  const std::vector<double> v{5, 1, 4, 2, 3};
  CHECK(nearest_rank_quantile(v, 0.05) == 1);
  CHECK(nearest_rank_quantile(v, 0.5) == 3);
  CHECK(nearest_rank_quantile(v, 0.95) == 5);
  CHECK(nearest_rank_quantile(v, 0.4) == 2);
  CHECK(std::isnan(nearest_rank_quantile({}, 0.5)));
}

TEST_CASE("replicate seeds are distinct and shared across methods") {
  const auto r = run_experiment(small_config({"ecdf-y", "aetc-d"}, {100, 1000}, 10));
  std::set<std::uint64_t> seeds;
  for (const auto& row : r.rows)
    if (row.method == "ecdf-y") seeds.insert(row.seed);
  CHECK(seeds.size() == 20);
  for (std::size_t i = 0; i < 20; ++i) CHECK(r.rows[i].seed == r.rows[i + 20].seed);
}

TEST_CASE("output is reproducible and thread-count independent") {
  auto config = small_config({"ecdf-y", "aetc-d", "aetc-d-q"}, {100, 1000}, 4);
  const auto a = scratch("a"), b = scratch("b");
  write_experiment(run_experiment(config, {1, true, true}), config, a);
  write_experiment(run_experiment(config, {3, true, true}), config, b);
  for (const char* f : {"results.csv", "summary.csv", "run.json"}) CHECK(slurp(a / f) == slurp(b / f));
  CHECK(fs::exists(a / "trace" / "aetc-d_B100_r0.jsonl"));
  CHECK(fs::exists(a / "samples" / "ecdf-y_B1000.txt"));
  const auto trace = slurp(a / "trace" / "aetc-d_B1000_r2.jsonl");
  CHECK(slurp(b / "trace" / "aetc-d_B1000_r2.jsonl") == trace);
  const auto first = nlohmann::json::parse(trace.substr(0, trace.find('\n')));
  for (const char* key : {"t", "spend", "scores", "chosen"}) CHECK(first.contains(key));

  const auto rows = read_results_csv(a / "results.csv");
  const auto again = run_experiment(config);
  REQUIRE(rows.size() == again.rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].seed == again.rows[i].seed);
    CHECK(rows[i].w1_error == again.rows[i].w1_error);
    CHECK(rows[i].subset == again.rows[i].subset);
  }
}

TEST_CASE("results csv quoting") {
  ResultRow row;
  row.method = "ecdf-y";
  row.budget = 10;
  row.status = "failed: bad, \"quoted\" reason";
  row.w1_error = std::nan("");
  const auto dir = scratch("q");
  write_results_csv({row}, dir / "r.csv");
  const auto back = read_results_csv(dir / "r.csv");
  REQUIRE(back.size() == 1);
  CHECK(back[0].status == row.status);
  CHECK(std::isnan(back[0].w1_error));
}

TEST_CASE("fixed-m curves and statistics") {
  auto config = small_config({"oracle", "ecdf-y", "aetc-d", "fixed-m:10", "fixed-m:50", "fixed-m:200"},
                             {1000}, 6);
  const auto r = run_experiment(config);
  const auto curves = fixed_m_curves(r.rows);
  REQUIRE(curves.count(1000.0) == 1);
  CHECK(curves.at(1000.0).size() == 3);
  const auto stats = statistics_comparison(r, config);
  for (const auto& s : stats)
    if (s.method == "oracle") CHECK(s.mse == 0.0);
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(std::nan("")).empty());
}

TEST_CASE("statistics on a symmetric truth") {
  // Y ~ N(0,1) with a noisy surrogate: skewness estimates center near zero.
  const ModelSuite sym("sym", 1.0, {0.01}, [](Rng& rng, std::span<double> out) {
    out[0] = rng.normal();
    out[1] = out[0] + 0.1 * rng.normal();
  });
  auto config = small_config({"ecdf-y", "aetc-d"}, {1000}, 30);
  const auto r = run_experiment(sym, config);
  for (const char* m : {"ecdf-y", "aetc-d"}) {
    double sum = 0;
    int n = 0;
    for (const auto& row : r.rows)
      if (row.method == m && row.ok()) {
        sum += row.skewness;
        ++n;
      }
    CHECK(std::abs(sum / n) < 0.1);
  }
}

TEST_CASE("AETC-d beats ECDF-Y on the mean statistic") {
  auto config = small_config({"ecdf-y", "aetc-d"}, {1000, 10000}, 40);
  config.oracle_samples = 200000;
  const auto stats = run_statistics_comparison(ishigami_suite(IshigamiVariant::perfect), config);
  for (double b : config.budgets) {
    double ecdf = 0, aetc = 0;
    for (const auto& s : stats)
      if (s.budget == b && s.statistic == "mean") (s.method == "aetc-d" ? aetc : ecdf) = s.mse;
    CHECK(aetc < ecdf);
  }
}
