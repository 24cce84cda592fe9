#pragma once

// Adaptive explore-then-commit for distribution learning (AETC-d).
//
// Exploration samples every model jointly at cost c_epr per round and fits a
// linear emulator of Y for each subset S of low-fidelity models. Each round
// scores every S with an estimated loss bound, picks the best subset, and
// either doubles the exploration count, moves halfway to the estimated
// optimal rate, or commits. Exploitation then samples only X_S and pushes the
// draws through the emulator to produce an empirical estimate of the law of Y.

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfdist/measures.hpp"
#include "mfdist/models.hpp"
#include "mfdist/regress.hpp"
#include "mfdist/rng.hpp"

namespace mfdist {

inline constexpr double kInfiniteLoss = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------- loss bound

/// G(m) = sqrt(k1/m) + sqrt(k2/(B - c_epr m)); requires 0 < m < B/c_epr.
double surrogate_loss(double k1, double k2, double m, double budget, double c_epr);

/// Unique minimizer of surrogate_loss: B / (c_epr + (c_epr^2 k2 / k1)^(1/3)).
double optimal_exploration(double k1, double k2, double budget, double c_epr);

/// Minimum of surrogate_loss: ((c_epr k1)^(1/3) + k2^(1/3))^(3/2) / sqrt(B).
double optimal_loss(double k1, double k2, double budget, double c_epr);

// ---------------------------------------------------------------- scoring

struct SubsetScore {
  Subset subset;
  FitResult<double> fit;
  int feature_count = 0;  ///< regressors excluding the intercept
  double sigma_hat = 0;
  double j_residual = 0;  ///< J1 of the residual ECDF
  double j_response = 0;  ///< J1 of the exploration-response ECDF
  double k1_hat = 0;
  double k2_hat = 0;
  double m_star_hat = kInfiniteLoss;
  double rho = kInfiniteLoss;
  bool zero_residual = false;  ///< exact fit: k1_hat forced to 0
  bool eligible = false;
};

enum class Phase { exploring, committed, exhausted };

enum class Action { start, doubled, averaged, committed, truncated, degenerate_commit };

std::string to_string(Phase p);
std::string to_string(Action a);

struct ScoreSummary {
  Subset subset;
  double k1, k2, m_star, rho;
  bool eligible;
};

/// One pass of the exploration loop.
struct TraceRound {
  int t = 0;                ///< exploration count the round was scored at
  double spend = 0;         ///< spend when the round was scored
  std::vector<ScoreSummary> scores;
  std::optional<Subset> chosen;
  Action action = Action::start;
  int next_t = 0;
};

nlohmann::json to_json(const TraceRound& round);

struct PolicyOptions {
  /// Residuals with max |r| <= this * max(1, max |y|) count as an exact fit.
  double zero_residual_tol = 1e-10;
};

/// Exploration state of one AETC-d run.
class PolicyState {
public:
  /// Collects the first n+2 exploration rounds.
  /// Throws Infeasible when B < (n+2) c_epr.
  PolicyState(const ModelSuite& suite, double budget, std::uint64_t explore_seed,
              PolicyOptions options = {});

  int t() const noexcept { return static_cast<int>(log_.rows()); }
  double budget() const noexcept { return budget_; }
  double spent() const noexcept { return spent_; }
  /// M = floor(B / c_epr).
  int max_rounds() const noexcept { return max_rounds_; }
  Phase phase() const noexcept { return phase_; }
  std::optional<Subset> chosen() const noexcept { return chosen_; }
  const std::vector<TraceRound>& trace() const noexcept { return trace_; }
  /// t x (n+1) exploration draws; column 0 is Y.
  const Matrix<double>& log() const noexcept { return log_; }
  const PolicyOptions& options() const noexcept { return options_; }

  /// Largest exploration count that still leaves one exploitation draw of S.
  int exploration_cap(const ModelSuite& suite, Subset s) const;
  /// floor((B - t c_epr) / c_ept(S)), trimmed so the total never exceeds B.
  long exploitation_count(const ModelSuite& suite, Subset s) const;

  // Mutators used by aetc_d_step and exploit.
  void explore_to(const ModelSuite& suite, int new_t);
  void commit(Subset s);
  void exhaust() { phase_ = Phase::exhausted; }
  void record(TraceRound round) { trace_.push_back(std::move(round)); }
  void set_spent(double s) { spent_ = s; }

private:
  double budget_;
  double c_epr_;
  int max_rounds_;
  PolicyOptions options_;
  Rng rng_;
  Matrix<double> log_;
  double spent_ = 0;
  Phase phase_ = Phase::exploring;
  std::optional<Subset> chosen_;
  std::vector<TraceRound> trace_;
};

/// Scores every nonempty subset on the current exploration log.
/// Subsets that cannot be fit (too few rows, rank deficiency, exact fit) are
/// returned with eligible = false and rho = +inf. Order is subset_precedes.
std::vector<SubsetScore> score_subsets(const PolicyState& state, const ModelSuite& suite);

/// argmin rho over eligible scores; ties go to subset_precedes order.
std::optional<Subset> best_subset(const std::vector<SubsetScore>& scores);

/// One loop iteration: score, select, then double / average / commit.
void aetc_d_step(PolicyState& state, const ModelSuite& suite);

/// Runs aetc_d_step until the state leaves the exploring phase.
void run_exploration(PolicyState& state, const ModelSuite& suite);

// ---------------------------------------------------------------- exploitation

enum class EmulatorVariant { standard, no_noise, quantile };

std::string to_string(EmulatorVariant v);
EmulatorVariant emulator_variant_from_string(const std::string& s);

/// Number of levels in the quantile emulator grid j/(K+1).
inline constexpr int kQuantileGridSize = 100;

/// Y' = X_S^T beta + noise, fitted on the exploration log.
class Emulator {
public:
  /// Fits on an exploration log (t x (n+1), column 0 is Y).
  Emulator(const Matrix<double>& exploration_log, const ModelSuite& suite, Subset subset,
           EmulatorVariant variant, int quantile_levels = kQuantileGridSize);

  Subset subset() const noexcept { return subset_; }
  EmulatorVariant variant() const noexcept { return variant_; }
  const Vector<double>& beta() const noexcept { return beta_; }
  const std::vector<double>& residual_pool() const noexcept { return residuals_; }
  const std::optional<QuantileFit<double>>& quantile_fit() const noexcept { return qfit_; }

  /// One emulated Y from the regressors of a fresh low-fidelity draw.
  double sample(std::span<const double> features, Rng& rng) const;

private:
  Subset subset_;
  EmulatorVariant variant_;
  Vector<double> beta_;
  std::vector<double> residuals_;
  std::optional<QuantileFit<double>> qfit_;
};

struct ExploitResult {
  Measure estimate;
  long draws = 0;  ///< N_S
  double spend = 0;
};

/// Spends the remaining budget on N_S fresh draws of the chosen subset.
/// Throws Infeasible when N_S = 0.
ExploitResult exploit(PolicyState& state, const ModelSuite& suite, EmulatorVariant variant,
                      Rng& rng, int quantile_levels = kQuantileGridSize);

/// Same as exploit() with an explicit emulator (used by the fixed-rate runs).
ExploitResult exploit_with(const Emulator& emulator, const ModelSuite& suite, long draws,
                           Rng& rng);

struct AetcResult {
  Measure estimate;
  Subset subset;
  int exploration_rounds = 0;
  long exploitation_draws = 0;
  double spend = 0;
  std::vector<TraceRound> trace;
};

/// Full run: exploration with seed `explore_seed`, exploitation with `exploit_seed`.
AetcResult run_aetc_d(const ModelSuite& suite, double budget, EmulatorVariant variant,
                      std::uint64_t explore_seed, std::uint64_t exploit_seed,
                      PolicyOptions options = {});

// ---------------------------------------------------------------- oracle quantities

struct OracleStats {
  Subset subset;
  double sigma = 0;
  double j_residual = 0;
  double j1_response = 0;
  double k1 = 0;  ///< (2 sqrt(s+1) sigma + J1(eps))^2
  double k2 = 0;  ///< c_ept(S) J1(Y)^2
};

struct PilotStatistics {
  std::vector<OracleStats> subsets;  ///< subset_precedes order
  double j0_response = 0;
  double j1_response = 0;
};

/// Population-level k1, k2 estimated from a large pilot sample.
PilotStatistics pilot_statistics(const ModelSuite& suite, Eigen::Index pilot_rows, Rng& rng);

struct OracleOptimum {
  Subset subset;
  double m_star = 0;
  double g_star = 0;
};

/// argmin over S of ((c_epr k1)^(1/3) + k2^(1/3))^(3/2) with the same tie rule
/// as score_subsets, plus the optimal rate and loss for that S.
OracleOptimum oracle_optimum(const std::vector<OracleStats>& stats, double budget, double c_epr);

/// sqrt(c0 J0(Y)^2 / (2B)) / G*; B cancels so the value does not depend on it.
double efficiency_ratio(double k1_opt, double k2_opt, double j0_response, double c0, double budget,
                        double c_epr);

}  // namespace mfdist
