#include <cmath>
#include <set>

#include "doctest.h"
#include "trekrank/rng.hpp"
#include "trekrank/sem.hpp"

using namespace trekrank;

namespace {

// L1 -> X1 -> X2 <- X6, L1 -> {X3, X4, X5}; X2 is linear in X1 but
// polynomial in X6.
SemModel figure4_model() {
  PathDiagram g = parse_path_diagram(
      "latent L1\nmeasured X1 X2 X3 X4 X5 X6\n"
      "edge L1 -> X1\nedge X1 -> X2\nedge X6 -> X2\n"
      "edge L1 -> X3\nedge L1 -> X4\nedge L1 -> X5\n");
  SemModel m;
  m.graph = g;
  m.equations.resize(g.vertex_count());
  for (int v = 0; v < g.vertex_count(); ++v) m.equations[v].variable = v;
  auto id = [&](const char* n) { return g.index_of(n); };
  m.equations[id("X1")].linear = {{id("L1"), 2.0}};
  m.equations[id("X2")].linear = {{id("X1"), 3.0}};
  m.equations[id("X2")].poly = {{0.7, Monomial{{{id("X6"), 2}}}}};
  m.equations[id("X3")].linear = {{id("L1"), 0.8}};
  m.equations[id("X4")].linear = {{id("L1"), 0.6}};
  m.equations[id("X5")].linear = {{id("L1"), 0.9}};
  m.validate();
  return m;
}

SemModel linear_chain_model() {
  PathDiagram g = parse_path_diagram(
      "latent L\nmeasured M X\nedge L -> M\nedge M -> X\n");
  SemModel m;
  m.graph = g;
  m.equations.resize(3);
  for (int v = 0; v < 3; ++v) m.equations[v].variable = v;
  m.equations[g.index_of("M")].linear = {{g.index_of("L"), 0.5}};
  m.equations[g.index_of("X")].linear = {{g.index_of("M"), 0.5}};
  m.validate();
  return m;
}

SemModel random_linear_dag(CounterRng& rng, int n, double edge_prob) {
  PathDiagram g;
  for (int v = 0; v < n; ++v)
    g.add_vertex("v" + std::to_string(v), VertexKind::kMeasured);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.next_unit() < edge_prob) g.add_edge(i, j);
  SemModel m;
  m.graph = g;
  m.equations.resize(n);
  for (int v = 0; v < n; ++v) {
    m.equations[v].variable = v;
    for (int p : g.parents(v))
      m.equations[v].linear.push_back({p, rng.uniform(-2.0, 2.0)});
  }
  m.validate();
  return m;
}

// Independent oracle: the reduction coefficient of V for target t equals the
// sum over directed paths from V to t whose intermediate vertices all lie in
// the region, of the products of edge coefficients.
double path_product_oracle(const SemModel& m, const VertexSet& region, int v,
                           int target) {
  if (v == target) return 1.0;
  double total = 0.0;
  for (int ch : m.graph.children(v)) {
    bool usable = ch == target ||
                  std::binary_search(region.begin(), region.end(), ch);
    if (!usable) continue;
    double coef = 0.0;
    for (const auto& [p, c] : m.equations[ch].linear)
      if (p == v) coef = c;
    if (coef != 0.0)
      total += coef * path_product_oracle(m, region, ch, target);
  }
  return total;
}

std::set<std::string> tag_names(const PathDiagram& g,
                                const std::vector<ResidualTag>& tags) {
  std::set<std::string> out;
  for (const auto& t : tags) out.insert(residual_tag_name(g, t));
  return out;
}

}  // namespace

TEST_CASE("model validation catches structural mistakes") {
  auto g = parse_path_diagram("latent L\nmeasured X\nedge L -> X\n");
  SemModel m;
  m.graph = g;
  m.equations.resize(2);
  m.equations[0].variable = 0;
  m.equations[1].variable = 1;
  SUBCASE("missing parent mention") {
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  }
  SUBCASE("unknown parent mention") {
    m.equations[1].linear = {{0, 1.0}};
    m.equations[0].linear = {{1, 1.0}};  // L has no parents
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  }
  SUBCASE("non-positive sd") {
    m.equations[1].linear = {{0, 1.0}};
    m.equations[1].error_sd = 0.0;
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  }
}

TEST_CASE("degree-one polynomial terms fold into the linear part") {
  auto g = parse_path_diagram("latent L\nmeasured X\nedge L -> X\n");
  SemModel m;
  m.graph = g;
  m.equations.resize(2);
  m.equations[0].variable = 0;
  m.equations[1].variable = 1;
  m.equations[1].linear = {{0, 1.5}};
  m.equations[1].poly = {{0.5, Monomial{{{0, 1}}}}};
  m.validate();
  CHECK(m.equations[1].poly.empty());
  CHECK(m.equations[1].linear[0].second == doctest::Approx(2.0));
  CHECK(m.equations[1].nonlinear_parents().empty());
}

TEST_CASE("non-linear cycles are rejected") {
  auto g = parse_path_diagram(
      "measured A B\nedge A -> B\nedge B -> A\n");
  SemModel m;
  m.graph = g;
  m.equations.resize(2);
  m.equations[0].variable = 0;
  m.equations[1].variable = 1;
  m.equations[0].linear = {{1, 0.5}};
  m.equations[1].linear = {{0, 0.5}};
  SUBCASE("linear cycle is fine") { CHECK_NOTHROW(m.validate()); }
  SUBCASE("cubic term on a cycle vertex") {
    m.equations[1].linear.clear();
    m.equations[1].poly = {{0.1, Monomial{{{0, 3}}}}};
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  }
}

TEST_CASE("validate_LA_below on the substitution fixture") {
  SemModel m = figure4_model();
  const PathDiagram& g = m.graph;
  VertexSet a = g.resolve({"X2", "X3"});
  VertexSet b = g.resolve({"X4", "X5"});
  ChokePair pair{g.resolve({"L1"}), {}};
  SUBCASE("polynomial outside the region is allowed") {
    CHECK(validate_LA_below(m, pair, a, b).empty());
  }
  SUBCASE("cubic choke parent violates the row side") {
    m.equations[g.index_of("X1")].poly = {
        {0.1, Monomial{{{g.index_of("L1"), 3}}}}};
    auto violations = validate_LA_below(m, pair, a, b);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].kind == LaViolation::Kind::kNonlinearRowSide);
    CHECK(violations[0].vertex == g.index_of("X1"));
    CHECK(violations[0].parent == g.index_of("L1"));
  }
}

TEST_CASE("validate_LA_below rejects cycles in the region") {
  auto g = parse_path_diagram(
      "latent L1\nmeasured X1 X2 X3 X6\n"
      "edge L1 -> X1\nedge X1 -> X2\nedge X2 -> X1\nedge X6 -> X2\n"
      "edge L1 -> X3\n");
  SemModel m;
  m.graph = g;
  m.equations.resize(g.vertex_count());
  for (int v = 0; v < g.vertex_count(); ++v) m.equations[v].variable = v;
  m.equations[g.index_of("X1")].linear = {{g.index_of("L1"), 2.0},
                                          {g.index_of("X2"), 0.3}};
  m.equations[g.index_of("X2")].linear = {{g.index_of("X1"), 3.0},
                                          {g.index_of("X6"), 0.5}};
  m.equations[g.index_of("X3")].linear = {{g.index_of("L1"), 0.8}};
  m.validate();
  auto violations = validate_LA_below(m, {g.resolve({"L1"}), {}},
                                      g.resolve({"X2", "X3"}), {});
  bool found_cycle = false;
  for (const auto& v : violations)
    if (v.kind == LaViolation::Kind::kCycleMember) found_cycle = true;
  CHECK(found_cycle);
}

TEST_CASE("reduce_below_choke reproduces the worked substitution") {
  SemModel m = figure4_model();
  const PathDiagram& g = m.graph;
  auto r = reduce_below_choke(m, g.resolve({"L1"}), g.resolve({"X2", "X3"}));
  REQUIRE(r.lambda.rows() == 2);
  REQUIRE(r.lambda.cols() == 1);
  // canonical order puts X2 before X3
  CHECK(r.lambda(0, 0) == 6.0);  // 3 * 2, exact
  CHECK(r.lambda(1, 0) == 0.8);
  CHECK(tag_names(g, r.residual_ancestry[0]) ==
        std::set<std::string>{"X6", "eps_X1", "eps_X2"});
  CHECK(tag_names(g, r.residual_ancestry[1]) ==
        std::set<std::string>{"eps_X3"});
}

TEST_CASE("reduce_below_choke identity and unreachable cases") {
  SemModel m = figure4_model();
  const PathDiagram& g = m.graph;
  SUBCASE("target inside the choke set") {
    VertexSet choke = g.resolve({"L1", "X3"});
    auto r = reduce_below_choke(m, choke, g.resolve({"X3"}));
    int col = choke[0] == g.index_of("X3") ? 0 : 1;
    CHECK(r.lambda(0, col) == 1.0);
    CHECK(r.lambda(0, 1 - col) == 0.0);
    CHECK(r.residual_ancestry[0].empty());
  }
  SUBCASE("target unreachable from the choke set") {
    auto r = reduce_below_choke(m, g.resolve({"L1"}), g.resolve({"X6"}));
    CHECK(r.lambda(0, 0) == 0.0);
    CHECK(tag_names(g, r.residual_ancestry[0]) ==
          std::set<std::string>{"X6"});
  }
}

TEST_CASE("reduce_below_choke on a chain multiplies path coefficients") {
  SemModel m = linear_chain_model();
  const PathDiagram& g = m.graph;
  auto r = reduce_below_choke(m, g.resolve({"L"}), g.resolve({"X"}));
  CHECK(r.lambda(0, 0) == doctest::Approx(0.25));
  CHECK(tag_names(g, r.residual_ancestry[0]) ==
        std::set<std::string>{"eps_M", "eps_X"});
}

TEST_CASE("reduction coefficients equal the path-product oracle") {
  CounterRng rng(515);
  int models = 0;
  while (models < 25) {
    SemModel m = random_linear_dag(rng, 7, 0.4);
    VertexSet c, a;
    for (int v = 0; v < 7; ++v) {
      double u = rng.next_unit();
      if (u < 0.3)
        c.push_back(v);
      else if (u < 0.55)
        a.push_back(v);
    }
    if (c.empty() || a.empty()) continue;
    auto r = reduce_below_choke(m, c, a);
    for (size_t i = 0; i < a.size(); ++i) {
      VertexSet region = directed_region(m.graph, c, {a[i]});
      for (size_t j = 0; j < c.size(); ++j) {
        double expect =
            a[i] == c[j]
                ? 1.0
                : (std::binary_search(c.begin(), c.end(), a[i])
                       ? 0.0
                       : path_product_oracle(m, region, c[j], a[i]));
        CHECK(r.lambda(static_cast<Eigen::Index>(i),
                       static_cast<Eigen::Index>(j)) ==
              doctest::Approx(expect).epsilon(1e-10));
      }
    }
    ++models;
  }
}

TEST_CASE("simulate matches standard normal moments") {
  auto g = parse_path_diagram("measured X\n");
  SemModel m;
  m.graph = g;
  m.equations.resize(1);
  m.equations[0].variable = 0;
  m.validate();
  Dataset d = simulate(m, 100000, 11);
  double mean = d.values.col(0).mean();
  double var = (d.values.col(0).array() - mean).square().sum() /
               (d.values.rows() - 1);
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("simulate matches the analytic covariance of a linear pair") {
  auto g = parse_path_diagram("latent L\nmeasured X\nedge L -> X\n");
  SemModel m;
  m.graph = g;
  m.equations.resize(2);
  m.equations[0].variable = 0;
  m.equations[1].variable = 1;
  m.equations[1].linear = {{0, 2.0}};
  m.validate();
  Dataset d = simulate(m, 1000000, 29);
  Eigen::VectorXd l = d.values.col(0), x = d.values.col(1);
  double lm = l.mean(), xm = x.mean();
  double cov =
      ((l.array() - lm) * (x.array() - xm)).sum() / (d.values.rows() - 1);
  double varx = (x.array() - xm).square().sum() / (d.values.rows() - 1);
  CHECK(cov == doctest::Approx(2.0).epsilon(0.01));
  CHECK(varx == doctest::Approx(5.0).epsilon(0.01));
}

TEST_CASE("simulate is deterministic given the seed") {
  SemModel m = figure4_model();
  Dataset a = simulate(m, 200, 77);
  Dataset b = simulate(m, 200, 77);
  CHECK(a.values == b.values);
  CHECK(dataset_to_csv(a) == dataset_to_csv(b));
  Dataset c = simulate(m, 200, 78);
  CHECK(a.values != c.values);
}

TEST_CASE("cyclic blocks solve their exact equilibrium") {
  auto g = parse_path_diagram(
      "measured A B C\nedge A -> B\nedge B -> A\nedge A -> C\n");
  SemModel m;
  m.graph = g;
  m.equations.resize(3);
  for (int v = 0; v < 3; ++v) m.equations[v].variable = v;
  m.equations[0].linear = {{1, 0.5}};
  m.equations[1].linear = {{0, 0.4}};
  m.equations[2].linear = {{0, 1.0}};
  m.validate();
  Dataset d = simulate(m, 500, 5);
  // equilibrium solve: reconstructed errors match the seeded stream
  double a0 = d.values(0, 0), b0 = d.values(0, 1);
  double ea = CounterRng::normal_at(5, 0);
  double eb = CounterRng::normal_at(5, 1);
  CHECK(a0 - 0.5 * b0 == doctest::Approx(ea).epsilon(1e-12));
  CHECK(b0 - 0.4 * a0 == doctest::Approx(eb).epsilon(1e-12));
}

TEST_CASE("singular cyclic blocks are rejected") {
  auto g = parse_path_diagram("measured A B\nedge A -> B\nedge B -> A\n");
  SemModel m;
  m.graph = g;
  m.equations.resize(2);
  m.equations[0].variable = 0;
  m.equations[1].variable = 1;
  m.equations[0].linear = {{1, 1.0}};
  m.equations[1].linear = {{0, 1.0}};
  m.validate();
  CHECK_THROWS_AS(simulate(m, 10, 1), std::invalid_argument);
}

TEST_CASE("analytic covariance of the regression pair") {
  auto g = parse_path_diagram("latent L\nmeasured X\nedge L -> X\n");
  SemModel m;
  m.graph = g;
  m.equations.resize(2);
  m.equations[0].variable = 0;
  m.equations[1].variable = 1;
  m.equations[1].linear = {{0, 2.0}};
  m.validate();
  auto pop = population_cov_analytic(m);
  CHECK(pop.cov(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pop.cov(0, 1) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(pop.cov(1, 1) == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("entailed tetrad vanishes exactly in the analytic covariance") {
  auto g = parse_path_diagram(
      "latent L\nmeasured X Y Z W\n"
      "edge L -> X\nedge L -> Y\nedge L -> Z\nedge L -> W\n");
  SemModel m;
  m.graph = g;
  m.equations.resize(5);
  for (int v = 0; v < 5; ++v) m.equations[v].variable = v;
  double coef[4] = {0.7, 1.3, 1.9, 0.55};
  for (int k = 0; k < 4; ++k) m.equations[k + 1].linear = {{0, coef[k]}};
  m.validate();
  auto pop = population_cov_analytic(m);
  auto c = [&](const char* u, const char* v) {
    return pop.cov(g.index_of(u), g.index_of(v));
  };
  double tetrad = c("X", "Y") * c("Z", "W") - c("X", "Z") * c("Y", "W");
  CHECK(std::abs(tetrad) < 1e-12);
}

TEST_CASE("analytic covariance refuses polynomial models") {
  SemModel m = figure4_model();
  CHECK_THROWS_AS(population_cov_analytic(m), std::invalid_argument);
}

TEST_CASE("monte carlo covariance converges to the analytic one") {
  auto g = parse_path_diagram(
      "latent L\nmeasured X Y Z W\n"
      "edge L -> X\nedge L -> Y\nedge L -> Z\nedge L -> W\n");
  SemModel m;
  m.graph = g;
  m.equations.resize(5);
  for (int v = 0; v < 5; ++v) m.equations[v].variable = v;
  double coef[4] = {0.8, 1.1, 1.6, 0.6};
  for (int k = 0; k < 4; ++k) m.equations[k + 1].linear = {{0, coef[k]}};
  m.validate();
  auto exact = population_cov_analytic(m);
  auto mc = population_cov_mc(m, 1000000, 99);
  REQUIRE(mc.standard_error.has_value());
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      double dev = std::abs(mc.cov(i, j) - exact.cov(i, j));
      CHECK(dev < 5.0 * (*mc.standard_error)(i, j));
    }
  }
}

TEST_CASE("draw_model honors ranges and fixed values") {
  auto g = parse_path_diagram("latent L\nmeasured X\nedge L -> X\n");
  FreeSemModel fm;
  fm.graph = g;
  fm.equations.resize(2);
  SUBCASE("all fixed is seed independent") {
    fm.equations[1].linear = {{0, {1.5, 1.5}}};
    auto m1 = draw_model(fm, 1), m2 = draw_model(fm, 999);
    CHECK(m1.equations[1].linear[0].second ==
          m2.equations[1].linear[0].second);
  }
  SUBCASE("ranged draws stay inside and differ across seeds") {
    fm.equations[1].linear = {{0, {0.5, 2.0}}};
    std::set<double> seen;
    for (std::uint64_t s = 0; s < 100; ++s) {
      auto m = draw_model(fm, s);
      double v = m.equations[1].linear[0].second;
      CHECK(v >= 0.5);
      CHECK(v <= 2.0);
      seen.insert(v);
    }
    CHECK(seen.size() == 100);  // no collisions across 100 seeds
  }
}

TEST_CASE("reversed coefficient ranges are rejected") {
  auto g = parse_path_diagram("latent L\nmeasured X\nedge L -> X\n");
  FreeSemModel fm;
  fm.graph = g;
  fm.equations.resize(2);
  fm.equations[1].linear = {{0, {2.0, 0.5}}};
  CHECK_THROWS_AS(draw_model(fm, 1), std::invalid_argument);
}

TEST_CASE("study_model structure") {
  SUBCASE("linear instance") {
    FreeSemModel fm = study_model(0.0, 0.0);
    CHECK(fm.graph.vertex_count() == 30);
    CHECK(fm.graph.latents().size() == 5);
    CHECK(fm.graph.measured().size() == 25);
    CHECK(fm.graph.edges().size() == 33);
    auto m = draw_model(fm, 3);
    for (const auto& eq : m.equations) CHECK(eq.poly.empty());
    CHECK_NOTHROW(population_cov_analytic(m));
  }
  SUBCASE("latent cubic coefficients scale with b") {
    auto m = draw_model(study_model(0.05, 0.0), 17);
    int cubic_count = 0;
    for (const auto& eq : m.equations) {
      for (const auto& t : eq.poly) {
        CHECK(t.coef >= 0.5 * 0.05);
        CHECK(t.coef <= 2.0 * 0.05);
        CHECK(t.monomial.exps.begin()->second == 3);
        ++cubic_count;
      }
    }
    CHECK(cubic_count == 4);  // L2..L5 only
  }
  SUBCASE("measured cubic weights scale with d") {
    auto m = draw_model(study_model(0.0, 0.05), 23);
    int cubic_count = 0;
    for (int x : m.graph.measured()) {
      const auto& eq = m.equations[x];
      REQUIRE(eq.poly.size() == 1);
      CHECK(eq.poly[0].coef >= 0.025);
      CHECK(eq.poly[0].coef <= 0.1);
      // the primary latent loading carries the (1 - d) shrink
      for (const auto& [p, c] : eq.linear) {
        if (eq.poly[0].monomial.exps.count(p)) {
          CHECK(c >= 0.95 * 0.5);
          CHECK(c <= 0.95 * 2.0);
        }
      }
      ++cubic_count;
    }
    CHECK(cubic_count == 25);
  }
}

TEST_CASE("reduction covariance identity holds on the fixture") {
  SemModel m = figure4_model();
  const PathDiagram& g = m.graph;
  auto r = reduce_below_choke(m, g.resolve({"L1"}), g.resolve({"X2", "X3"}));
  auto check =
      reduction_cov_check(m, r, g.resolve({"X4", "X5"}), 200000, 425);
  CHECK(check.max_abs_z <= 3.0);
}

TEST_CASE("model JSON round trip") {
  SemModel m = figure4_model();
  std::string json = save_model(m);
  SemModel back = load_model(json);
  CHECK(emit_path_diagram(back.graph) == emit_path_diagram(m.graph));
  REQUIRE(back.equations.size() == m.equations.size());
  for (size_t v = 0; v < m.equations.size(); ++v) {
    CHECK(back.equations[v].linear == m.equations[v].linear);
    CHECK(back.equations[v].error_sd == m.equations[v].error_sd);
    REQUIRE(back.equations[v].poly.size() == m.equations[v].poly.size());
    for (size_t t = 0; t < m.equations[v].poly.size(); ++t) {
      CHECK(back.equations[v].poly[t].coef == m.equations[v].poly[t].coef);
      CHECK(back.equations[v].poly[t].monomial ==
            m.equations[v].poly[t].monomial);
    }
  }
}

TEST_CASE("dataset CSV round trip") {
  SemModel m = linear_chain_model();
  Dataset d = simulate(m, 50, 123);
  Dataset back = dataset_from_csv(dataset_to_csv(d));
  CHECK(back.columns == d.columns);
  REQUIRE(back.values.rows() == d.values.rows());
  CHECK((back.values - d.values).cwiseAbs().maxCoeff() == 0.0);
}
