#pragma once

// Multifidelity model suites: a joint sampler of (Y, X1..Xn), declared costs,
// and the regressors each subset of low-fidelity models exposes.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mfdist/regress.hpp"
#include "mfdist/rng.hpp"

namespace mfdist {

inline constexpr int kMaxModels = 16;

/// Nonempty subset of low-fidelity models {1..n}, stored as a bit mask
/// (bit i-1 set <=> model i present).
class Subset {
public:
  constexpr Subset() = default;
  constexpr explicit Subset(std::uint32_t mask) : mask_(mask) {}
  static Subset of(std::initializer_list<int> models);
  static Subset of(std::span<const int> models);

  constexpr std::uint32_t mask() const noexcept { return mask_; }
  constexpr bool empty() const noexcept { return mask_ == 0; }
  int size() const noexcept;
  bool contains(int model) const noexcept { return (mask_ >> (model - 1)) & 1U; }
  /// 1-based model indices in increasing order.
  std::vector<int> members() const;
  /// "{1,2}"
  std::string to_string() const;
  /// Parses "{1,2}" or "1,2".
  static Subset parse(const std::string& text);

  friend constexpr bool operator==(Subset a, Subset b) noexcept { return a.mask_ == b.mask_; }

private:
  std::uint32_t mask_ = 0;
};

/// Tie-break order for subsets: smaller cardinality first, then
/// lexicographic order of the sorted member lists.
bool subset_precedes(Subset a, Subset b);

/// All nonempty subsets of {1..n} in subset_precedes order.
std::vector<Subset> enumerate_subsets(int n);

/// A product of integer powers of low-fidelity outputs, e.g. X1^2 X3.
struct Monomial {
  std::vector<std::pair<int, int>> factors;  ///< (model index, power)

  double evaluate(std::span<const double> x) const;  ///< x[i-1] is model i
  std::string to_string() const;
};

/// Rule assigning the regressors (intercept excluded) to each subset.
struct FeatureExpansion {
  std::string name;
  std::function<std::vector<Monomial>(Subset)> rule;

  /// X_i for i in S.
  static FeatureExpansion identity();
  /// X_i, X_i^2, X_i^3 for i in S.
  static FeatureExpansion cubic();
  /// X_i, X_i^2 and X_i X_j (i < j) for i, j in S.
  static FeatureExpansion quadratic_interactions();
  /// "none", "L" or "quadratic-interactions".
  static FeatureExpansion by_name(const std::string& name);
};

/// Joint sampler writing (y, x1..xn) into its output span.
using JointSampler = std::function<void(Rng&, std::span<double>)>;

class ModelSuite {
public:
  ModelSuite(std::string name, double cost_y, std::vector<double> costs, JointSampler sampler,
             FeatureExpansion expansion = FeatureExpansion::identity());

  const std::string& name() const noexcept { return name_; }
  int n() const noexcept { return static_cast<int>(costs_.size()); }
  double cost_y() const noexcept { return cost_y_; }
  std::span<const double> costs() const noexcept { return costs_; }
  const FeatureExpansion& expansion() const noexcept { return expansion_; }

  /// Cost of one exploration round: c0 + sum of all ci.
  double c_epr() const noexcept { return c_epr_; }
  /// Cost of one exploitation draw of subset S (unchanged by feature expansion).
  double c_ept(Subset s) const;

  /// One joint draw into out[0..n] = (y, x1, .., xn).
  void draw(Rng& rng, std::span<double> out) const { sampler_(rng, out); }
  /// rows x (n+1) block of independent joint draws.
  Matrix<double> draw_block(Rng& rng, Eigen::Index rows) const;

  const std::vector<Monomial>& features(Subset s) const;
  int feature_count(Subset s) const { return static_cast<int>(features(s).size()); }
  /// Regressors of S for one draw; x holds (x1..xn), out has feature_count(S) slots.
  void evaluate_features(Subset s, std::span<const double> x, std::span<double> out) const;
  /// Design (intercept first) for S built from a block of joint draws.
  DesignMatrix<double> design(Subset s, const Matrix<double>& joint_rows) const;

  /// Same sampler and costs with a different regressor rule.
  ModelSuite with_expansion(FeatureExpansion expansion) const;
  /// Same sampler and expansion with different costs.
  ModelSuite with_costs(double cost_y, std::vector<double> costs) const;

private:
  std::string name_;
  double cost_y_;
  std::vector<double> costs_;
  double c_epr_;
  JointSampler sampler_;
  FeatureExpansion expansion_;
  std::vector<std::vector<Monomial>> features_by_mask_;
};

enum class IshigamiVariant { perfect, approx };

struct IshigamiParams {
  double a = 5.0;
  double b = 0.1;
  double c = 1.0;
  double d = 0.1;
  double cost_y = 1.0;
  std::vector<double> costs{0.05, 0.001};
};

/// Y = sin Z1 + a sin^2 Z2 + b Z3^4 sin Z1 + c sin^3 Z4 + d sin^4 Z5 with
/// Z1..Z5 iid Unif(-pi, pi), and two low-fidelity models:
///   perfect: X1 = Y without the d term, X2 = Y without the c and d terms;
///   approx:  X1 = sin Z1 + 0.95 a sin^2 Z2 + b Z3^4 sin Z1,
///            X2 = sin Z1 + 0.6 a sin^2 Z2 + 9 b Z3^2 sin Z1.
ModelSuite ishigami_suite(IshigamiVariant variant, const IshigamiParams& params = {});

/// Y = X1 + |X1| eta with X1 ~ Unif(0, 2) and eta ~ Unif(-1, 1) independent.
/// The conditional quantiles of Y are linear in X1 while the additive noise
/// model is not (the spread grows with X1).
ModelSuite heteroscedastic_suite(double cost_y = 1.0, double cost_x = 0.01);

/// Expansion of a suite's regressors. Every subset's feature list is checked
/// at construction: a monomial referencing a model outside its subset throws.
ModelSuite expanded_suite(const ModelSuite& base, FeatureExpansion expansion);

/// Tabulated joint samples with declared costs.
struct SampleTable {
  std::vector<std::string> columns;  ///< y, x1, .., xn
  Matrix<double> rows;
  double cost_y = 1.0;
  std::vector<double> costs;
};

/// CSV with header `y,x1,...,xn`; costs come from the sidecar JSON
/// {"cost_y": c0, "costs": [c1..cn]}. Errors name the offending line.
SampleTable read_sample_table(const std::filesystem::path& csv,
                              const std::filesystem::path& costs_json);
SampleTable parse_sample_table(const std::string& csv_text, double cost_y,
                               std::vector<double> costs);
void write_sample_table(const SampleTable& table, const std::filesystem::path& csv,
                        const std::filesystem::path& costs_json);
/// Draws `rows` joint samples from a suite into a table.
SampleTable tabulate(const ModelSuite& suite, Rng& rng, Eigen::Index rows);

/// Samples rows uniformly with replacement (a bootstrap of the joint law).
ModelSuite table_suite(SampleTable table);

/// Builds a suite from a JSON description:
///   {"name": "ishigami-perfect" | "ishigami-approx" | "heteroscedastic" | "table",
///    "a", "b", "c", "d", "cost_y", "costs", "expansion": "none" | "L" |
///    "quadratic-interactions", "table": "<csv>", "costs_file": "<json>"}
/// Unknown keys are rejected. Relative table paths resolve against base_dir.
ModelSuite suite_from_json(const nlohmann::json& spec,
                           const std::filesystem::path& base_dir = {});

}  // namespace mfdist
