#pragma once

// Experiment harness: budget sweeps over estimators, W1 error against a
// large-sample oracle, fixed-rate runs, and trade-off curve fits.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfdist/measures.hpp"
#include "mfdist/models.hpp"
#include "mfdist/policy.hpp"

namespace mfdist {

// ---------------------------------------------------------------- single runs

/// floor(B / c0) direct draws of Y. Throws Infeasible when B < c0.
Measure run_ecdf_y(const ModelSuite& suite, double budget, Rng& rng);

struct FixedRateResult {
  Measure estimate;
  long draws = 0;
  double spend = 0;
};

/// m exploration rounds, OLS on `subset`, standard exploitation of the rest.
/// Requires m >= regressors(subset) + 2 and B > m c_epr + c_ept(subset).
FixedRateResult run_fixed_m(const ModelSuite& suite, double budget, int m, Subset subset,
                            std::uint64_t explore_seed, std::uint64_t exploit_seed);

// ---------------------------------------------------------------- trade-off curve

struct CurvePoint {
  double m;
  double error;
};

struct CurveFit {
  double alpha1 = 0;
  double alpha2 = 0;
  double residual_norm = 0;
  bool clipped = false;  ///< a negative coefficient was clipped to zero
  /// argmin of the fitted curve on (0, B/c_epr), or NaN if a coefficient is 0.
  double minimizer = 0;

  double operator()(double m, double budget, double c_epr) const;
};

/// Least squares for f(m) = a1 / sqrt(m) + a2 / sqrt(B/c_epr - m). f is linear
/// in (a1, a2), so this is a two-column least-squares problem; negative
/// coefficients are clipped to zero and the other one refit.
CurveFit fit_tradeoff_curve(const std::vector<CurvePoint>& points, double budget, double c_epr);

// ---------------------------------------------------------------- experiments

enum class EvalMode { sampled, full };

std::string to_string(EvalMode m);
EvalMode eval_mode_from_string(const std::string& s);

struct MethodSpec {
  enum class Kind { oracle, ecdf_y, aetc_d, aetc_d_no, aetc_d_q, fixed_m };
  Kind kind;
  int fixed_m = 0;
  std::string label;

  /// "oracle", "ecdf-y", "aetc-d", "aetc-d-no", "aetc-d-q" or "fixed-m:<m>".
  static MethodSpec parse(const std::string& text);
};

struct ExperimentConfig {
  nlohmann::json suite = {{"name", "ishigami-perfect"}};
  std::filesystem::path base_dir;  ///< resolves relative table paths
  std::vector<MethodSpec> methods;
  std::vector<double> budgets;
  int replicates = 100;
  long eval_samples = 200;
  long oracle_samples = 1'000'000;
  std::uint64_t seed = 1;
  EvalMode eval = EvalMode::sampled;
  /// Subset used by fixed-m runs; the pilot-oracle S_opt when absent.
  std::optional<Subset> fixed_subset;
  long pilot_samples = 100'000;
};

/// Strict parse: unknown keys and malformed values throw ConfigError.
///   {"suite": {...}, "methods": [...], "budgets": [...], "replicates": R,
///    "eval_samples": E, "oracle_samples": O, "seed": s, "eval": "full"|"sampled",
///    "fixed_subset": [1], "pilot_samples": P}
ExperimentConfig parse_experiment_config(const nlohmann::json& doc,
                                         const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& config);

struct ResultRow {
  std::string method;
  double budget = 0;
  int replicate = 0;
  std::uint64_t seed = 0;
  double w1_error = 0;  ///< NaN for failed replicates
  std::string subset;   ///< chosen subset, empty when not applicable
  int m = 0;            ///< exploration rounds
  double spend = 0;
  double mean = 0, variance = 0, skewness = 0, kurtosis = 0;
  std::string status = "ok";  ///< "ok" or "failed: <reason>"

  bool ok() const { return status == "ok"; }
};

struct SummaryRow {
  std::string method;
  double budget = 0;
  double mean = 0;
  double q05 = 0, q50 = 0, q95 = 0;
  int failures = 0;
};

struct RunOptions {
  int threads = 1;
  bool keep_traces = false;
  bool keep_samples = false;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;  ///< sorted by method order, budget, replicate
  std::vector<SummaryRow> summary;
  /// run id -> trace, for AETC-d methods when keep_traces is set
  std::map<std::string, std::vector<TraceRound>> traces;
  /// "<method>_B<budget>" -> replicate-0 estimate, when keep_samples is set
  std::map<std::string, Measure> samples;
  MomentSummary<double> oracle_moments{};
  std::optional<Subset> fixed_subset;
  double c_epr = 0;
};

/// Empirical law of Y from `samples` fresh draws.
Measure oracle_measure(const ModelSuite& suite, long samples, std::uint64_t seed);

ExperimentResult run_experiment(const ModelSuite& suite, const ExperimentConfig& config,
                                const RunOptions& options = {});
ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Nearest-rank quantile of an unsorted sample: sorted[ceil(p n) - 1].
double nearest_rank_quantile(std::vector<double> values, double p);

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows,
                                  const std::vector<MethodSpec>& methods,
                                  const std::vector<double>& budgets);

struct StatisticRow {
  std::string method;
  double budget = 0;
  std::string statistic;  ///< mean, variance, skewness, kurtosis
  double mse = 0;
  int used = 0;
  int failures = 0;
};

/// MSE of each moment statistic of the estimates against the oracle moments.
std::vector<StatisticRow> statistics_comparison(const ExperimentResult& result,
                                                const ExperimentConfig& config);
std::vector<StatisticRow> run_statistics_comparison(const ModelSuite& suite,
                                                    const ExperimentConfig& config,
                                                    const RunOptions& options = {});

// ---------------------------------------------------------------- output

/// Shortest round-trip decimal; empty for NaN.
std::string format_number(double v);

void write_results_csv(const std::vector<ResultRow>& rows, const std::filesystem::path& path);
void write_summary_csv(const std::vector<SummaryRow>& rows, const std::filesystem::path& path);
void write_statistics_csv(const std::vector<StatisticRow>& rows, const std::filesystem::path& path);
std::vector<ResultRow> read_results_csv(const std::filesystem::path& path);

/// Writes results.csv, summary.csv, run.json and (if present) trace/*.jsonl
/// and samples/*.txt into `dir`.
void write_experiment(const ExperimentResult& result, const ExperimentConfig& config,
                      const std::filesystem::path& dir);

/// Groups fixed-m rows by budget and averages the error per m.
std::map<double, std::vector<CurvePoint>> fixed_m_curves(const std::vector<ResultRow>& rows);

}  // namespace mfdist
