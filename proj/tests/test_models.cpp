#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mfdist/bench.hpp"
#include "mfdist/models.hpp"

using namespace mfdist;

namespace {

double correlation(const Vector<double>& a, const Vector<double>& b) {
  const double ma = a.mean(), mb = b.mean();
  const Vector<double> da = a.array() - ma, db = b.array() - mb;
  return da.dot(db) / std::sqrt(da.squaredNorm() * db.squaredNorm());
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "mfdist_test_models";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("subsets") {
  const auto s = Subset::of({2, 1});
  CHECK(s.size() == 2);
  CHECK(s.contains(1));
  CHECK_FALSE(s.contains(3));
  CHECK(s.to_string() == "{1,2}");
  CHECK(Subset::parse("{1,3}") == Subset::of({1, 3}));
  CHECK(Subset::parse("2") == Subset::of({2}));
  CHECK_THROWS(Subset::parse("{0}"));

  const auto all = enumerate_subsets(3);
  REQUIRE(all.size() == 7);
  std::vector<std::string> names;
  for (auto x : all) names.push_back(x.to_string());
  CHECK(names == std::vector<std::string>{"{1}", "{2}", "{3}", "{1,2}", "{1,3}", "{2,3}", "{1,2,3}"});
  CHECK(subset_precedes(Subset::of({3}), Subset::of({1, 2})));
  CHECK(enumerate_subsets(16).size() == 65535);
  CHECK_THROWS_AS(enumerate_subsets(17), ConfigError);
}

TEST_CASE("suite costs") {
  const auto suite = ishigami_suite(IshigamiVariant::perfect);
  CHECK(suite.n() == 2);
  CHECK(suite.c_epr() == doctest::Approx(1.051));
  CHECK(suite.c_ept(Subset::of({1})) == doctest::Approx(0.05));
  CHECK(suite.c_ept(Subset::of({1, 2})) == doctest::Approx(0.051));
  // maximum exploration round at B = 1000
  CHECK(static_cast<int>(std::floor(1000 / suite.c_epr())) == 951);
  CHECK_THROWS_AS(ModelSuite("bad", 1.0, {0.5, -1.0}, [](Rng&, std::span<double>) {}), ConfigError);
  CHECK_THROWS_AS(ModelSuite("bad", 0.0, {0.5}, [](Rng&, std::span<double>) {}), ConfigError);
}

TEST_CASE("ishigami correlations") {
  Rng rng(41);
  const auto perfect = ishigami_suite(IshigamiVariant::perfect).draw_block(rng, 1'000'000);
  CHECK(correlation(perfect.col(0), perfect.col(1)) == doctest::Approx(0.999).epsilon(0.002));
  CHECK(correlation(perfect.col(0), perfect.col(2)) == doctest::Approx(0.986).epsilon(0.002));

  IshigamiParams p;
  p.c = p.d = 0;
  const auto approx = ishigami_suite(IshigamiVariant::approx, p).draw_block(rng, 1'000'000);
  CHECK(correlation(approx.col(0), approx.col(1)) == doctest::Approx(0.999).epsilon(0.005));
  CHECK(correlation(approx.col(0), approx.col(2)) == doctest::Approx(0.950).epsilon(0.005));

  const auto exact = ishigami_suite(IshigamiVariant::perfect, p).draw_block(rng, 1000);
  CHECK(exact.col(0) == exact.col(1));
}

TEST_CASE("seeded draws are reproducible") {
  const auto suite = ishigami_suite(IshigamiVariant::perfect);
  Rng a(5), b(5), c(6);
  const auto x = suite.draw_block(a, 100), y = suite.draw_block(b, 100), z = suite.draw_block(c, 100);
  CHECK(x == y);
  CHECK(x != z);
}

TEST_CASE("feature expansions") {
  const auto base = ishigami_suite(IshigamiVariant::approx);
  const auto l = expanded_suite(base, FeatureExpansion::cubic());
  CHECK(l.feature_count(Subset::of({1})) == 3);
  std::vector<std::string> names;
  for (const auto& m : l.features(Subset::of({1}))) names.push_back(m.to_string());
  CHECK(names == std::vector<std::string>{"X1", "X1^2", "X1^3"});
  CHECK(l.feature_count(Subset::of({1, 2})) == 6);
  CHECK(l.c_ept(Subset::of({1})) == base.c_ept(Subset::of({1})));

  const ModelSuite three("three", 1.0, {1.0, 1.0, 1.0}, [](Rng& rng, std::span<double> out) {
    for (auto& v : out) v = rng.normal();
  });
  const auto q = expanded_suite(three, FeatureExpansion::quadratic_interactions());
  CHECK(q.feature_count(Subset::of({1, 2, 3})) == 9);

  // identity expansion keeps the draws and the design
  const auto same = expanded_suite(base, FeatureExpansion::identity());
  Rng r1(7), r2(7);
  const auto rows = base.draw_block(r1, 50);
  CHECK(rows == same.draw_block(r2, 50));
  CHECK(base.design(Subset::of({1, 2}), rows).matrix() == same.design(Subset::of({1, 2}), rows).matrix());

  const double x[] = {2.0, 3.0};
  std::vector<double> f(6);
  l.evaluate_features(Subset::of({1, 2}), x, f);
  CHECK(f[0] * f[1] * f[2] != 0);

  FeatureExpansion leaky{"leaky", [](Subset) { return std::vector<Monomial>{{{{2, 1}}}}; }};
  CHECK_THROWS_AS(expanded_suite(base, leaky), ConfigError);
  CHECK_THROWS_AS(FeatureExpansion::by_name("cubic-ish"), ConfigError);
}

TEST_CASE("expansion keeps the joint law") {
  const auto base = ishigami_suite(IshigamiVariant::approx);
  const auto l = expanded_suite(base, FeatureExpansion::cubic());
  Rng r1(8), r2(9);
  const auto a = base.draw_block(r1, 200000), b = l.draw_block(r2, 200000);
  CHECK(a.col(0).mean() == doctest::Approx(b.col(0).mean()).epsilon(0.02));
  CHECK(a.col(1).mean() == doctest::Approx(b.col(1).mean()).epsilon(0.02));
}

TEST_CASE("heteroscedastic suite") {
  const auto s = heteroscedastic_suite();
  Rng rng(10);
  const auto rows = s.draw_block(rng, 10000);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    CHECK(rows(i, 1) >= 0);
    CHECK(rows(i, 1) <= 2);
    CHECK(std::abs(rows(i, 0) - rows(i, 1)) <= rows(i, 1) + 1e-12);
  }
}

TEST_CASE("sample tables") {
  SUBCASE("one-row table repeats its row") {
    const auto t = parse_sample_table("y,x1,x2\n1.5,2.5,3.5\n", 1.0, {0.1, 0.01});
    const auto suite = table_suite(t);
    Rng rng(1);
    const auto rows = suite.draw_block(rng, 20);
    for (Eigen::Index i = 0; i < 20; ++i) {
      CHECK(rows(i, 0) == 1.5);
      CHECK(rows(i, 2) == 3.5);
    }
    CHECK(suite.c_epr() == doctest::Approx(1.11));
  }
  SUBCASE("malformed rows name the line") {
    try {
      parse_sample_table("y,x1\n1,2\n3\n", 1.0, {0.1});
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_sample_table("y,x1\n1,abc\n", 1.0, {0.1}), ParseError);
    CHECK_THROWS_AS(parse_sample_table("y,x1\n1,nan\n", 1.0, {0.1}), ParseError);
    CHECK_THROWS_AS(parse_sample_table("q,x1\n1,2\n", 1.0, {0.1}), ParseError);
    CHECK_THROWS_AS(parse_sample_table("y,x1\n", 1.0, {0.1}), ParseError);
    CHECK_THROWS_AS(parse_sample_table("y,x1\n1,2\n", 1.0, {0.1, 0.2}), std::exception);
  }
  SUBCASE("round trip through files") {
    const auto suite = ishigami_suite(IshigamiVariant::perfect);
    Rng rng(2);
    const auto t = tabulate(suite, rng, 500);
    write_sample_table(t, scratch("t.csv"), scratch("t.json"));
    const auto back = read_sample_table(scratch("t.csv"), scratch("t.json"));
    CHECK(back.rows == t.rows);
    CHECK(back.costs == t.costs);
    CHECK(back.cost_y == t.cost_y);

    std::ofstream(scratch("bad.json")) << R"({"cost_y": 1, "costs": [0.05, 0.001], "extra": 1})";
    CHECK_THROWS_AS(read_sample_table(scratch("t.csv"), scratch("bad.json")), ConfigError);
  }
}

TEST_CASE("suite_from_json") {
  const auto s = suite_from_json({{"name", "ishigami-approx"}, {"expansion", "L"}, {"c", 0.0}});
  CHECK(s.feature_count(Subset::of({2})) == 3);
  CHECK_THROWS_AS(suite_from_json({{"name", "ishigami-perfect"}, {"e", 1}}), ConfigError);
  CHECK_THROWS_AS(suite_from_json({{"name", "rosenbrock"}}), ConfigError);
  CHECK_THROWS_AS(suite_from_json({{"name", "heteroscedastic"}, {"a", 1}}), ConfigError);
  const auto h = suite_from_json({{"name", "heteroscedastic"}, {"costs", {0.02}}});
  CHECK(h.c_epr() == doctest::Approx(1.02));
}

TEST_CASE("table suite tracks the live sampler under AETC-d") {
  const auto live = ishigami_suite(IshigamiVariant::perfect);
  Rng rng(3);
  const auto table = table_suite(tabulate(live, rng, 100000));
  const double budget = 1000;
  const int reps = 100;
  std::vector<double> e_live, e_table;
  const auto oracle = oracle_measure(live, 200000, 99);
  for (int r = 0; r < reps; ++r) {
    const auto a = run_aetc_d(live, budget, EmulatorVariant::standard, derive_seed(1, r, 1), derive_seed(1, r, 2));
    const auto b = run_aetc_d(table, budget, EmulatorVariant::standard, derive_seed(2, r, 1), derive_seed(2, r, 2));
    e_live.push_back(wasserstein1(a.estimate, oracle));
    e_table.push_back(wasserstein1(b.estimate, oracle));
  }
  const double lo_live = nearest_rank_quantile(e_live, 0.05), hi_live = nearest_rank_quantile(e_live, 0.95);
  const double lo_tab = nearest_rank_quantile(e_table, 0.05), hi_tab = nearest_rank_quantile(e_table, 0.95);
  CHECK(lo_tab <= hi_live);
  CHECK(lo_live <= hi_tab);
  CHECK(nearest_rank_quantile(e_table, 0.5) == doctest::Approx(nearest_rank_quantile(e_live, 0.5)).epsilon(0.3));
}
