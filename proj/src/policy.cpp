#include "mfdist/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mfdist/errors.hpp"

namespace mfdist {

// ---------------------------------------------------------------- loss bound

double surrogate_loss(double k1, double k2, double m, double budget, double c_epr) {
  if (k1 < 0 || k2 < 0) throw std::domain_error("surrogate_loss: k1 and k2 must be nonnegative");
  if (!(m > 0) || !(c_epr * m < budget))
    throw std::domain_error("surrogate_loss: exploration rate must satisfy 0 < m < B / c_epr");
  return std::sqrt(k1 / m) + std::sqrt(k2 / (budget - c_epr * m));
}

double optimal_exploration(double k1, double k2, double budget, double c_epr) {
  if (!(k1 > 0) || !(k2 > 0) || !(budget > 0) || !(c_epr > 0))
    throw std::domain_error("optimal_exploration: arguments must be positive");
  return budget / (c_epr + std::cbrt(c_epr * c_epr * k2 / k1));
}

double optimal_loss(double k1, double k2, double budget, double c_epr) {
  return std::pow(std::cbrt(c_epr * k1) + std::cbrt(k2), 1.5) / std::sqrt(budget);
}

// ---------------------------------------------------------------- names

std::string to_string(Phase p) {
  switch (p) {
    case Phase::exploring: return "exploring";
    case Phase::committed: return "committed";
    case Phase::exhausted: return "exhausted";
  }
  return "?";
}

std::string to_string(Action a) {
  switch (a) {
    case Action::start: return "start";
    case Action::doubled: return "doubled";
    case Action::averaged: return "averaged";
    case Action::committed: return "committed";
    case Action::truncated: return "truncated";
    case Action::degenerate_commit: return "degenerate-commit";
  }
  return "?";
}

std::string to_string(EmulatorVariant v) {
  switch (v) {
    case EmulatorVariant::standard: return "standard";
    case EmulatorVariant::no_noise: return "no-noise";
    case EmulatorVariant::quantile: return "quantile";
  }
  return "?";
}

EmulatorVariant emulator_variant_from_string(const std::string& s) {
  if (s == "standard") return EmulatorVariant::standard;
  if (s == "no-noise") return EmulatorVariant::no_noise;
  if (s == "quantile") return EmulatorVariant::quantile;
  throw std::invalid_argument("unknown emulator variant '" + s + "'");
}

nlohmann::json to_json(const TraceRound& round) {
  auto finite_or_null = [](double v) -> nlohmann::json {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
  };
  nlohmann::json scores = nlohmann::json::array();
  for (const auto& s : round.scores)
    scores.push_back({{"S", s.subset.to_string()},
                      {"k1", finite_or_null(s.k1)},
                      {"k2", finite_or_null(s.k2)},
                      {"m_star", finite_or_null(s.m_star)},
                      {"rho", finite_or_null(s.rho)},
                      {"eligible", s.eligible}});
  return {{"t", round.t},
          {"spend", round.spend},
          {"scores", std::move(scores)},
          {"chosen", round.chosen ? nlohmann::json(round.chosen->to_string()) : nlohmann::json(nullptr)},
          {"action", to_string(round.action)},
          {"next_t", round.next_t}};
}

// ---------------------------------------------------------------- state

PolicyState::PolicyState(const ModelSuite& suite, double budget, std::uint64_t explore_seed,
                         PolicyOptions options)
    : budget_(budget), c_epr_(suite.c_epr()), options_(options), rng_(explore_seed) {
  if (!(budget > 0)) throw Infeasible("budget must be positive");
  max_rounds_ = static_cast<int>(std::floor(budget / c_epr_));
  const int initial = suite.n() + 2;
  if (max_rounds_ < initial)
    throw Infeasible("budget " + std::to_string(budget) + " cannot pay for the initial " +
                     std::to_string(initial) + " exploration rounds at cost " +
                     std::to_string(c_epr_) + " each");
  log_.resize(0, suite.n() + 1);
  explore_to(suite, initial);
}

void PolicyState::explore_to(const ModelSuite& suite, int new_t) {
  if (new_t < t()) throw std::logic_error("exploration count cannot decrease");
  if (new_t > max_rounds_) throw std::logic_error("exploration beyond the maximum round");
  const Eigen::Index old = log_.rows();
  if (new_t > old) {
    Matrix<double> fresh = suite.draw_block(rng_, new_t - old);
    log_.conservativeResize(new_t, Eigen::NoChange);
    log_.bottomRows(new_t - old) = fresh;
  }
  spent_ = static_cast<double>(new_t) * c_epr_;
}

void PolicyState::commit(Subset s) {
  chosen_ = s;
  phase_ = Phase::committed;
}

namespace {

long affordable_draws(double budget, double c_epr, int t, double c_ept) {
  const double explore = static_cast<double>(t) * c_epr;
  const double remaining = budget - explore;
  if (!(remaining > 0)) return 0;
  auto n = static_cast<long>(std::floor(remaining / c_ept));
  while (n > 0 && explore + static_cast<double>(n) * c_ept > budget) --n;
  return n;
}

}  // namespace

long PolicyState::exploitation_count(const ModelSuite& suite, Subset s) const {
  return affordable_draws(budget_, c_epr_, t(), suite.c_ept(s));
}

int PolicyState::exploration_cap(const ModelSuite& suite, Subset s) const {
  const double c = suite.c_ept(s);
  const double bound = std::min<double>(max_rounds_, std::floor((budget_ - c) / c_epr_));
  int cap = bound > 0 ? static_cast<int>(bound) : 0;
  while (cap > 0 && affordable_draws(budget_, c_epr_, cap, c) < 1) --cap;
  return cap;
}

// ---------------------------------------------------------------- scoring

std::vector<SubsetScore> score_subsets(const PolicyState& state, const ModelSuite& suite) {
  const Matrix<double>& log = state.log();
  const int t = state.t();
  const double budget = state.budget();
  const double c_epr = suite.c_epr();
  const Vector<double> y = log.col(0);
  const double y_scale = std::max(1.0, y.cwiseAbs().maxCoeff());
  const double j_response = j_functionals(Measure::from_samples(y)).j1;

  std::vector<SubsetScore> out;
  for (Subset s : enumerate_subsets(suite.n())) {
    SubsetScore sc;
    sc.subset = s;
    sc.feature_count = suite.feature_count(s);
    sc.j_response = j_response;
    sc.k2_hat = suite.c_ept(s) * j_response * j_response;
    const int cols = sc.feature_count + 1;
    if (t <= cols) {
      out.push_back(std::move(sc));
      continue;
    }
    sc.fit = ols_fit(suite.design(s, log), y);
    sc.sigma_hat = std::sqrt(sc.fit.sigma2_hat);
    const std::vector<double> resid(sc.fit.residuals.data(),
                                    sc.fit.residuals.data() + sc.fit.residuals.size());
    sc.j_residual = j_functionals(Measure(resid)).j1;
    sc.zero_residual = sc.fit.rank_ok && sc.fit.residuals.cwiseAbs().maxCoeff() <=
                                             state.options().zero_residual_tol * y_scale;
    if (sc.zero_residual) {
      sc.k1_hat = 0;
    } else {
      const double term =
          2.0 * std::sqrt(static_cast<double>(sc.feature_count) + 2.0) * sc.sigma_hat + sc.j_residual;
      sc.k1_hat = term * term;
    }
    sc.eligible = sc.fit.rank_ok && sc.k1_hat > 0;
    if (sc.eligible) {
      sc.m_star_hat = sc.k2_hat > 0 ? optimal_exploration(sc.k1_hat, sc.k2_hat, budget, c_epr)
                                    : budget / c_epr;
      const double m = std::max(sc.m_star_hat, static_cast<double>(t));
      sc.rho = (m > 0 && c_epr * m < budget) ? surrogate_loss(sc.k1_hat, sc.k2_hat, m, budget, c_epr)
                                             : kInfiniteLoss;
    }
    out.push_back(std::move(sc));
  }
  return out;
}

std::optional<Subset> best_subset(const std::vector<SubsetScore>& scores) {
  const SubsetScore* best = nullptr;
  for (const auto& sc : scores) {
    if (!sc.eligible) continue;
    if (!best || sc.rho < best->rho ||
        (sc.rho == best->rho && subset_precedes(sc.subset, best->subset)))
      best = &sc;
  }
  if (!best) return std::nullopt;
  return best->subset;
}

void aetc_d_step(PolicyState& state, const ModelSuite& suite) {
  if (state.phase() != Phase::exploring) throw std::logic_error("aetc_d_step: not exploring");
  const auto scores = score_subsets(state, suite);

  TraceRound round;
  round.t = state.t();
  round.spend = state.spent();
  for (const auto& sc : scores)
    round.scores.push_back({sc.subset, sc.k1_hat, sc.k2_hat, sc.m_star_hat, sc.rho, sc.eligible});

  const int t = state.t();
  const auto best = best_subset(scores);
  if (!best) {
    // Exact fits leave nothing to balance: exploit the cheapest one now.
    const SubsetScore* exact = nullptr;
    for (const auto& sc : scores)
      if (sc.zero_residual && (!exact || suite.c_ept(sc.subset) < suite.c_ept(exact->subset)))
        exact = &sc;
    if (exact) {
      round.chosen = exact->subset;
      round.action = Action::degenerate_commit;
      state.commit(exact->subset);
    } else {
      // Nothing can be fit yet: keep doubling while some subset stays affordable.
      int cap = 0;
      for (const auto& sc : scores) cap = std::max(cap, state.exploration_cap(suite, sc.subset));
      if (t < cap) {
        state.explore_to(suite, std::min(2 * t, cap));
        round.action = Action::doubled;
      } else {
        round.action = Action::truncated;
        state.exhaust();
      }
    }
    round.next_t = state.t();
    state.record(std::move(round));
    return;
  }

  round.chosen = *best;
  const auto it = std::find_if(scores.begin(), scores.end(),
                               [&](const SubsetScore& sc) { return sc.subset == *best; });
  const double m_star = it->m_star_hat;
  const int cap = state.exploration_cap(suite, *best);

  int target = t;
  Action action = Action::committed;
  if (m_star > 2.0 * t) {
    target = 2 * t;
    action = Action::doubled;
  } else if (m_star > t) {
    target = static_cast<int>(std::floor((t + m_star) / 2.0));
    action = target > t ? Action::averaged : Action::committed;
  }

  if (action != Action::committed && target > cap) {
    if (cap > t) state.explore_to(suite, cap);
    action = Action::truncated;
  } else if (action != Action::committed) {
    state.explore_to(suite, target);
  }
  if (action == Action::committed || action == Action::truncated) state.commit(*best);

  round.action = action;
  round.next_t = state.t();
  state.record(std::move(round));
}

void run_exploration(PolicyState& state, const ModelSuite& suite) {
  while (state.phase() == Phase::exploring) aetc_d_step(state, suite);
}

// ---------------------------------------------------------------- exploitation

Emulator::Emulator(const Matrix<double>& exploration_log, const ModelSuite& suite, Subset subset,
                   EmulatorVariant variant, int quantile_levels)
    : subset_(subset), variant_(variant) {
  const auto z = suite.design(subset, exploration_log);
  const Vector<double> y = exploration_log.col(0);
  const auto fit = ols_fit(z, y);
  beta_ = fit.beta_hat;
  residuals_.assign(fit.residuals.data(), fit.residuals.data() + fit.residuals.size());
  if (variant == EmulatorVariant::quantile) {
    qfit_ = mfdist::quantile_fit(z, y, uniform_quantile_grid(quantile_levels));
  }
}

double Emulator::sample(std::span<const double> features, Rng& rng) const {
  if (variant_ == EmulatorVariant::quantile) {
    const auto j = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(qfit_->taus.size())));
    double v = qfit_->betas(0, j);
    for (std::size_t k = 0; k < features.size(); ++k)
      v += qfit_->betas(static_cast<Eigen::Index>(k) + 1, j) * features[k];
    return v;
  }
  double v = beta_(0);
  for (std::size_t k = 0; k < features.size(); ++k)
    v += beta_(static_cast<Eigen::Index>(k) + 1) * features[k];
  if (variant_ == EmulatorVariant::standard)
    v += residuals_[static_cast<std::size_t>(rng.index(residuals_.size()))];
  return v;
}

ExploitResult exploit_with(const Emulator& emulator, const ModelSuite& suite, long draws, Rng& rng) {
  if (draws < 1) throw Infeasible("no budget left for exploitation");
  std::vector<double> row(static_cast<std::size_t>(suite.n() + 1));
  std::vector<double> f(static_cast<std::size_t>(suite.feature_count(emulator.subset())));
  const std::span<const double> x(row.data() + 1, static_cast<std::size_t>(suite.n()));
  std::vector<double> values(static_cast<std::size_t>(draws));
  for (auto& v : values) {
    suite.draw(rng, row);
    suite.evaluate_features(emulator.subset(), x, f);
    v = emulator.sample(f, rng);
  }
  ExploitResult out{Measure(std::move(values)), draws, static_cast<double>(draws) * suite.c_ept(emulator.subset())};
  return out;
}

ExploitResult exploit(PolicyState& state, const ModelSuite& suite, EmulatorVariant variant,
                      Rng& rng, int quantile_levels) {
  if (state.phase() != Phase::committed || !state.chosen())
    throw Infeasible("exploration ended without an eligible subset to exploit");
  const Subset s = *state.chosen();
  const long n = state.exploitation_count(suite, s);
  if (n < 1)
    throw Infeasible("exploration consumed the budget: no exploitation draw of " + s.to_string() +
                     " is affordable");
  Emulator emulator(state.log(), suite, s, variant, quantile_levels);
  ExploitResult r = exploit_with(emulator, suite, n, rng);
  r.spend = static_cast<double>(state.t()) * suite.c_epr() + static_cast<double>(n) * suite.c_ept(s);
  state.set_spent(r.spend);
  return r;
}

AetcResult run_aetc_d(const ModelSuite& suite, double budget, EmulatorVariant variant,
                      std::uint64_t explore_seed, std::uint64_t exploit_seed, PolicyOptions options) {
  PolicyState state(suite, budget, explore_seed, options);
  run_exploration(state, suite);
  Rng rng(exploit_seed);
  auto r = exploit(state, suite, variant, rng);
  return AetcResult{std::move(r.estimate), *state.chosen(), state.t(), r.draws, r.spend,
                    state.trace()};
}

// ---------------------------------------------------------------- oracle quantities

PilotStatistics pilot_statistics(const ModelSuite& suite, Eigen::Index pilot_rows, Rng& rng) {
  const Matrix<double> rows = suite.draw_block(rng, pilot_rows);
  const Vector<double> y = rows.col(0);
  const auto jy = j_functionals(Measure::from_samples(y));
  PilotStatistics out;
  out.j0_response = jy.j0;
  out.j1_response = jy.j1;
  for (Subset s : enumerate_subsets(suite.n())) {
    const auto fit = ols_fit(suite.design(s, rows), y);
    OracleStats st;
    st.subset = s;
    st.sigma = std::sqrt(fit.sigma2_hat);
    st.j_residual = j_functionals(Measure::from_samples(fit.residuals)).j1;
    st.j1_response = jy.j1;
    const double term =
        2.0 * std::sqrt(static_cast<double>(suite.feature_count(s)) + 1.0) * st.sigma + st.j_residual;
    st.k1 = term * term;
    st.k2 = suite.c_ept(s) * jy.j1 * jy.j1;
    out.subsets.push_back(st);
  }
  return out;
}

OracleOptimum oracle_optimum(const std::vector<OracleStats>& stats, double budget, double c_epr) {
  if (stats.empty()) throw std::invalid_argument("oracle_optimum: no subsets");
  const OracleStats* best = nullptr;
  double best_value = kInfiniteLoss;
  for (const auto& st : stats) {
    const double v = std::pow(std::cbrt(c_epr * st.k1) + std::cbrt(st.k2), 1.5);
    if (!best || v < best_value || (v == best_value && subset_precedes(st.subset, best->subset))) {
      best = &st;
      best_value = v;
    }
  }
  OracleOptimum out;
  out.subset = best->subset;
  out.m_star = (best->k1 > 0 && best->k2 > 0) ? optimal_exploration(best->k1, best->k2, budget, c_epr)
                                              : 0.0;
  out.g_star = optimal_loss(best->k1, best->k2, budget, c_epr);
  return out;
}

double efficiency_ratio(double k1_opt, double k2_opt, double j0_response, double c0, double budget,
                        double c_epr) {
  if (!(k1_opt > 0) || !(k2_opt > 0) || !(j0_response > 0) || !(c0 > 0) || !(budget > 0))
    throw std::domain_error("efficiency_ratio: arguments must be positive");
  const double lower = std::sqrt(c0 * j0_response * j0_response / (2.0 * budget));
  return lower / optimal_loss(k1_opt, k2_opt, budget, c_epr);
}

}  // namespace mfdist
