#include "mfdist/models.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <numbers>
#include <set>
#include <sstream>

#include "mfdist/errors.hpp"

namespace mfdist {

// ---------------------------------------------------------------- Subset

Subset Subset::of(std::initializer_list<int> models) {
  return of(std::span<const int>(models.begin(), models.size()));
}

Subset Subset::of(std::span<const int> models) {
  std::uint32_t mask = 0;
  for (int i : models) {
    if (i < 1 || i > kMaxModels) throw std::out_of_range("model index out of range");
    mask |= 1U << (i - 1);
  }
  return Subset(mask);
}

int Subset::size() const noexcept { return std::popcount(mask_); }

std::vector<int> Subset::members() const {
  std::vector<int> out;
  for (int i = 1; i <= kMaxModels; ++i)
    if (contains(i)) out.push_back(i);
  return out;
}

std::string Subset::to_string() const {
  std::string s = "{";
  bool first = true;
  for (int i : members()) {
    if (!first) s += ",";
    s += std::to_string(i);
    first = false;
  }
  return s + "}";
}

Subset Subset::parse(const std::string& text) {
  std::vector<int> models;
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    models.push_back(std::stoi(token));
    token.clear();
  };
  for (char ch : text) {
    if (ch >= '0' && ch <= '9')
      token += ch;
    else if (ch == ',' || ch == ' ' || ch == '{' || ch == '}' || ch == ';')
      flush();
    else
      throw std::invalid_argument("bad subset literal: " + text);
  }
  flush();
  if (models.empty()) throw std::invalid_argument("empty subset literal: " + text);
  return of(std::span<const int>(models));
}

bool subset_precedes(Subset a, Subset b) {
  if (a.size() != b.size()) return a.size() < b.size();
  const auto ma = a.members(), mb = b.members();
  return std::lexicographical_compare(ma.begin(), ma.end(), mb.begin(), mb.end());
}

std::vector<Subset> enumerate_subsets(int n) {
  if (n < 1 || n > kMaxModels)
    throw ConfigError("number of low-fidelity models must be in [1, " +
                      std::to_string(kMaxModels) + "], got " + std::to_string(n));
  std::vector<Subset> out;
  const std::uint32_t count = (1U << n) - 1U;
  out.reserve(count);
  for (std::uint32_t mask = 1; mask <= count; ++mask) out.emplace_back(mask);
  std::sort(out.begin(), out.end(), subset_precedes);
  return out;
}

// ---------------------------------------------------------------- features

double Monomial::evaluate(std::span<const double> x) const {
  double v = 1.0;
  for (const auto& [model, power] : factors) {
    const double xi = x[static_cast<std::size_t>(model - 1)];
    for (int p = 0; p < power; ++p) v *= xi;
  }
  return v;
}

std::string Monomial::to_string() const {
  std::string s;
  for (const auto& [model, power] : factors) {
    s += "X" + std::to_string(model);
    if (power != 1) s += "^" + std::to_string(power);
  }
  return s;
}

FeatureExpansion FeatureExpansion::identity() {
  return {"none", [](Subset s) {
            std::vector<Monomial> f;
            for (int i : s.members()) f.push_back(Monomial{{{i, 1}}});
            return f;
          }};
}

FeatureExpansion FeatureExpansion::cubic() {
  return {"L", [](Subset s) {
            std::vector<Monomial> f;
            for (int i : s.members()) f.push_back(Monomial{{{i, 1}}});
            for (int i : s.members()) {
              f.push_back(Monomial{{{i, 2}}});
              f.push_back(Monomial{{{i, 3}}});
            }
            return f;
          }};
}

FeatureExpansion FeatureExpansion::quadratic_interactions() {
  return {"quadratic-interactions", [](Subset s) {
            const auto m = s.members();
            std::vector<Monomial> f;
            for (int i : m) f.push_back(Monomial{{{i, 1}}});
            for (int i : m) f.push_back(Monomial{{{i, 2}}});
            for (std::size_t a = 0; a < m.size(); ++a)
              for (std::size_t b = a + 1; b < m.size(); ++b)
                f.push_back(Monomial{{{m[a], 1}, {m[b], 1}}});
            return f;
          }};
}

FeatureExpansion FeatureExpansion::by_name(const std::string& name) {
  if (name == "none" || name.empty()) return identity();
  if (name == "L") return cubic();
  if (name == "quadratic-interactions") return quadratic_interactions();
  throw ConfigError("unknown feature expansion '" + name +
                    "' (expected none, L or quadratic-interactions)");
}

// ---------------------------------------------------------------- ModelSuite

ModelSuite::ModelSuite(std::string name, double cost_y, std::vector<double> costs,
                       JointSampler sampler, FeatureExpansion expansion)
    : name_(std::move(name)), cost_y_(cost_y), costs_(std::move(costs)),
      sampler_(std::move(sampler)), expansion_(std::move(expansion)) {
  const int n = static_cast<int>(costs_.size());
  if (n < 1 || n > kMaxModels)
    throw ConfigError("suite needs between 1 and " + std::to_string(kMaxModels) +
                      " low-fidelity models, got " + std::to_string(n));
  if (!(cost_y_ > 0)) throw ConfigError("high-fidelity cost must be positive");
  c_epr_ = cost_y_;
  for (double c : costs_) {
    if (!(c > 0)) throw ConfigError("low-fidelity costs must be positive");
    c_epr_ += c;
  }
  features_by_mask_.resize(std::size_t{1} << n);
  for (Subset s : enumerate_subsets(n)) {
    auto f = expansion_.rule(s);
    if (f.empty())
      throw ConfigError("expansion '" + expansion_.name + "' gives no regressors for " +
                        s.to_string());
    for (const Monomial& mono : f) {
      if (mono.factors.empty()) throw ConfigError("empty monomial in expansion " + expansion_.name);
      for (const auto& [model, power] : mono.factors) {
        if (model < 1 || model > n || !s.contains(model))
          throw ConfigError("expansion '" + expansion_.name + "' uses X" + std::to_string(model) +
                            " in the regressors of " + s.to_string());
        if (power < 1) throw ConfigError("monomial powers must be positive");
      }
    }
    features_by_mask_[s.mask()] = std::move(f);
  }
}

double ModelSuite::c_ept(Subset s) const {
  double c = 0;
  for (int i : s.members()) {
    if (i > n()) throw std::out_of_range("subset references a model beyond n");
    c += costs_[static_cast<std::size_t>(i - 1)];
  }
  return c;
}

Matrix<double> ModelSuite::draw_block(Rng& rng, Eigen::Index rows) const {
  // Row-major scratch so each draw writes a contiguous span.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> buf(rows, n() + 1);
  for (Eigen::Index r = 0; r < rows; ++r)
    draw(rng, std::span<double>(buf.row(r).data(), static_cast<std::size_t>(n() + 1)));
  return buf;
}

const std::vector<Monomial>& ModelSuite::features(Subset s) const {
  if (s.empty() || s.mask() >= features_by_mask_.size())
    throw std::out_of_range("subset " + s.to_string() + " is not a subset of the suite's models");
  return features_by_mask_[s.mask()];
}

void ModelSuite::evaluate_features(Subset s, std::span<const double> x,
                                   std::span<double> out) const {
  const auto& f = features(s);
  for (std::size_t k = 0; k < f.size(); ++k) out[k] = f[k].evaluate(x);
}

DesignMatrix<double> ModelSuite::design(Subset s, const Matrix<double>& joint_rows) const {
  const auto& f = features(s);
  Matrix<double> z(joint_rows.rows(), static_cast<Eigen::Index>(f.size()) + 1);
  z.col(0).setOnes();
  std::vector<double> x(static_cast<std::size_t>(n()));
  for (Eigen::Index r = 0; r < joint_rows.rows(); ++r) {
    for (int i = 0; i < n(); ++i) x[static_cast<std::size_t>(i)] = joint_rows(r, i + 1);
    for (std::size_t k = 0; k < f.size(); ++k)
      z(r, static_cast<Eigen::Index>(k) + 1) = f[k].evaluate(x);
  }
  return DesignMatrix<double>(std::move(z));
}

ModelSuite ModelSuite::with_expansion(FeatureExpansion expansion) const {
  return ModelSuite(name_, cost_y_, costs_, sampler_, std::move(expansion));
}

ModelSuite ModelSuite::with_costs(double cost_y, std::vector<double> costs) const {
  if (costs.size() != costs_.size())
    throw ConfigError("cost override has " + std::to_string(costs.size()) + " entries, suite has " +
                      std::to_string(costs_.size()) + " models");
  return ModelSuite(name_, cost_y, std::move(costs), sampler_, expansion_);
}

ModelSuite expanded_suite(const ModelSuite& base, FeatureExpansion expansion) {
  return base.with_expansion(std::move(expansion));
}

// ---------------------------------------------------------------- built-in suites

ModelSuite ishigami_suite(IshigamiVariant variant, const IshigamiParams& p) {
  if (p.costs.size() != 2) throw ConfigError("Ishigami suites have exactly two low-fidelity models");
  const double a = p.a, b = p.b, c = p.c, d = p.d;
  JointSampler sampler;
  if (variant == IshigamiVariant::perfect) {
    sampler = [a, b, c, d](Rng& rng, std::span<double> out) {
      constexpr double pi = std::numbers::pi;
      const double z1 = rng.uniform(-pi, pi), z2 = rng.uniform(-pi, pi), z3 = rng.uniform(-pi, pi),
                   z4 = rng.uniform(-pi, pi), z5 = rng.uniform(-pi, pi);
      const double s1 = std::sin(z1), s2 = std::sin(z2), s4 = std::sin(z4), s5 = std::sin(z5);
      const double z3sq = z3 * z3;
      const double x2 = s1 + a * s2 * s2 + b * z3sq * z3sq * s1;
      const double x1 = x2 + c * s4 * s4 * s4;
      const double s5sq = s5 * s5;
      out[0] = x1 + d * s5sq * s5sq;
      out[1] = x1;
      out[2] = x2;
    };
  } else {
    sampler = [a, b, c, d](Rng& rng, std::span<double> out) {
      constexpr double pi = std::numbers::pi;
      const double z1 = rng.uniform(-pi, pi), z2 = rng.uniform(-pi, pi), z3 = rng.uniform(-pi, pi),
                   z4 = rng.uniform(-pi, pi), z5 = rng.uniform(-pi, pi);
      const double s1 = std::sin(z1), s2 = std::sin(z2), s4 = std::sin(z4), s5 = std::sin(z5);
      const double s2sq = s2 * s2, z3sq = z3 * z3, s5sq = s5 * s5;
      out[0] = s1 + a * s2sq + b * z3sq * z3sq * s1 + c * s4 * s4 * s4 + d * s5sq * s5sq;
      out[1] = s1 + 0.95 * a * s2sq + b * z3sq * z3sq * s1;
      out[2] = s1 + 0.6 * a * s2sq + 9.0 * b * z3sq * s1;
    };
  }
  return ModelSuite(variant == IshigamiVariant::perfect ? "ishigami-perfect" : "ishigami-approx",
                    p.cost_y, p.costs, std::move(sampler));
}

ModelSuite heteroscedastic_suite(double cost_y, double cost_x) {
  JointSampler sampler = [](Rng& rng, std::span<double> out) {
    const double x = rng.uniform(0.0, 2.0);
    const double eta = rng.uniform(-1.0, 1.0);
    out[0] = x + std::abs(x) * eta;
    out[1] = x;
  };
  return ModelSuite("heteroscedastic", cost_y, {cost_x}, std::move(sampler));
}

// ---------------------------------------------------------------- tables

namespace {

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace

SampleTable parse_sample_table(const std::string& csv_text, double cost_y,
                               std::vector<double> costs) {
  std::istringstream in(csv_text);
  std::string line;
  std::size_t line_no = 0;
  SampleTable t;
  t.cost_y = cost_y;
  t.costs = std::move(costs);
  std::vector<double> values;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = trim(line);
    if (view.empty()) continue;
    const auto fields = split_csv_line(view);
    if (t.columns.empty()) {
      for (auto f : fields) t.columns.emplace_back(trim(f));
      width = t.columns.size();
      if (width < 2 || t.columns[0] != "y")
        throw ParseError("header must start with y followed by x1..xn", line_no);
      for (std::size_t i = 1; i < width; ++i)
        if (t.columns[i] != "x" + std::to_string(i))
          throw ParseError("header column " + std::to_string(i + 1) + " should be x" +
                               std::to_string(i) + ", found '" + t.columns[i] + "'",
                           line_no);
      continue;
    }
    if (fields.size() != width)
      throw ParseError("expected " + std::to_string(width) + " fields, found " +
                           std::to_string(fields.size()),
                       line_no);
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const auto f = trim(fields[c]);
      double v = 0;
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (f.empty() || ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v))
        throw ParseError("column " + std::to_string(c + 1) + ": '" + std::string(f) +
                             "' is not a finite number",
                         line_no);
      values.push_back(v);
    }
  }
  if (t.columns.empty()) throw ParseError("missing header row", line_no);
  if (values.empty()) throw ParseError("table has no data rows", line_no);
  if (t.costs.size() + 1 != width)
    throw ConfigError("cost metadata lists " + std::to_string(t.costs.size()) +
                      " low-fidelity costs but the table has " + std::to_string(width - 1) +
                      " x columns");
  const auto rows = static_cast<Eigen::Index>(values.size() / width);
  t.rows = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), rows, static_cast<Eigen::Index>(width));
  return t;
}

SampleTable read_sample_table(const std::filesystem::path& csv,
                              const std::filesystem::path& costs_json) {
  std::ifstream cj(costs_json);
  if (!cj) throw ConfigError("cannot open cost metadata " + costs_json.string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(cj);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("cost metadata " + costs_json.string() + ": " + e.what());
  }
  for (auto it = meta.begin(); it != meta.end(); ++it)
    if (it.key() != "cost_y" && it.key() != "costs")
      throw ConfigError("unknown key '" + it.key() + "' in " + costs_json.string());
  if (!meta.contains("cost_y") || !meta.contains("costs"))
    throw ConfigError(costs_json.string() + " must define cost_y and costs");

  std::ifstream in(csv);
  if (!in) throw ConfigError("cannot open sample table " + csv.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_sample_table(ss.str(), meta.at("cost_y").get<double>(),
                            meta.at("costs").get<std::vector<double>>());
}

void write_sample_table(const SampleTable& table, const std::filesystem::path& csv,
                        const std::filesystem::path& costs_json) {
  std::ofstream out(csv);
  for (std::size_t c = 0; c < table.columns.size(); ++c)
    out << (c ? "," : "") << table.columns[c];
  out << "\n";
  for (Eigen::Index r = 0; r < table.rows.rows(); ++r) {
    for (Eigen::Index c = 0; c < table.rows.cols(); ++c)
      out << (c ? "," : "") << format_double(table.rows(r, c));
    out << "\n";
  }
  std::ofstream meta(costs_json);
  meta << nlohmann::json{{"cost_y", table.cost_y}, {"costs", table.costs}}.dump() << "\n";
}

SampleTable tabulate(const ModelSuite& suite, Rng& rng, Eigen::Index rows) {
  SampleTable t;
  t.columns.push_back("y");
  for (int i = 1; i <= suite.n(); ++i) t.columns.push_back("x" + std::to_string(i));
  t.rows = suite.draw_block(rng, rows);
  t.cost_y = suite.cost_y();
  t.costs.assign(suite.costs().begin(), suite.costs().end());
  return t;
}

ModelSuite table_suite(SampleTable table) {
  if (table.rows.rows() == 0) throw ConfigError("sample table is empty");
  if (table.rows.cols() != static_cast<Eigen::Index>(table.costs.size()) + 1)
    throw ConfigError("sample table width does not match its cost metadata");
  auto data = std::make_shared<const Matrix<double>>(std::move(table.rows));
  JointSampler sampler = [data](Rng& rng, std::span<double> out) {
    const auto r = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(data->rows())));
    for (Eigen::Index c = 0; c < data->cols(); ++c) out[static_cast<std::size_t>(c)] = (*data)(r, c);
  };
  return ModelSuite("table", table.cost_y, std::move(table.costs), std::move(sampler));
}

// ---------------------------------------------------------------- JSON

ModelSuite suite_from_json(const nlohmann::json& spec, const std::filesystem::path& base_dir) {
  static const std::set<std::string> known{"name", "a",          "b",         "c",
                                           "d",    "cost_y",     "costs",     "expansion",
                                           "table", "costs_file"};
  if (!spec.is_object()) throw ConfigError("suite spec must be a JSON object");
  for (auto it = spec.begin(); it != spec.end(); ++it)
    if (!known.count(it.key())) throw ConfigError("unknown suite key '" + it.key() + "'");
  if (!spec.contains("name")) throw ConfigError("suite spec needs a name");

  const auto name = spec.at("name").get<std::string>();
  std::optional<ModelSuite> suite;
  try {
    if (name == "ishigami-perfect" || name == "ishigami-approx") {
      const bool perfect = name == "ishigami-perfect";
      IshigamiParams p;
      if (!perfect) p.c = p.d = 0.0;
      p.a = spec.value("a", p.a);
      p.b = spec.value("b", p.b);
      p.c = spec.value("c", p.c);
      p.d = spec.value("d", p.d);
      suite.emplace(ishigami_suite(perfect ? IshigamiVariant::perfect : IshigamiVariant::approx, p));
    } else if (name == "heteroscedastic") {
      for (const char* k : {"a", "b", "c", "d"})
        if (spec.contains(k)) throw ConfigError(std::string("key '") + k + "' does not apply to " + name);
      suite.emplace(heteroscedastic_suite());
    } else if (name == "table") {
      if (!spec.contains("table") || !spec.contains("costs_file"))
        throw ConfigError("table suites need 'table' and 'costs_file'");
      auto resolve = [&](const std::string& p) {
        std::filesystem::path path(p);
        return path.is_absolute() ? path : base_dir / path;
      };
      suite.emplace(table_suite(read_sample_table(resolve(spec.at("table").get<std::string>()),
                                                  resolve(spec.at("costs_file").get<std::string>()))));
    } else {
      throw ConfigError("unknown suite '" + name + "'");
    }
    if (name != "table" && (spec.contains("table") || spec.contains("costs_file")))
      throw ConfigError("'table'/'costs_file' only apply to table suites");
    if (spec.contains("cost_y") || spec.contains("costs")) {
      const double cy = spec.value("cost_y", suite->cost_y());
      std::vector<double> cs(suite->costs().begin(), suite->costs().end());
      if (spec.contains("costs")) cs = spec.at("costs").get<std::vector<double>>();
      suite.emplace(suite->with_costs(cy, std::move(cs)));
    }
    if (spec.contains("expansion"))
      suite.emplace(suite->with_expansion(
          FeatureExpansion::by_name(spec.at("expansion").get<std::string>())));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("suite spec: ") + e.what());
  }
  return std::move(*suite);
}

}  // namespace mfdist
