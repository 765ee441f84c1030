#include "trekrank/sem.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "trekrank/rng.hpp"

namespace trekrank {

int Monomial::total_degree() const {
  int d = 0;
  for (const auto& [v, e] : exps) d += e;
  return d;
}

std::vector<int> EquationSpec::nonlinear_parents() const {
  std::set<int> out;
  for (const auto& t : poly)
    for (const auto& [v, e] : t.monomial.exps) out.insert(v);
  return {out.begin(), out.end()};
}

void SemModel::validate() {
  if (static_cast<int>(equations.size()) != graph.vertex_count())
    throw std::invalid_argument("model must carry one equation per vertex");
  auto cyclic = vertices_on_cycles(graph);
  for (int v = 0; v < graph.vertex_count(); ++v) {
    EquationSpec& eq = equations[v];
    if (eq.variable != v)
      throw std::invalid_argument("equation order does not match vertices");
    if (!(eq.error_sd > 0.0))
      throw std::invalid_argument("error sd must be positive for " +
                                  graph.name_of(v));
    // fold degree-1 single-parent polynomial terms into the linear part
    std::vector<PolyTerm> kept;
    for (const auto& t : eq.poly) {
      if (t.monomial.exps.empty())
        throw std::invalid_argument("empty monomial in equation for " +
                                    graph.name_of(v));
      for (const auto& [p, e] : t.monomial.exps)
        if (e < 1)
          throw std::invalid_argument("monomial exponent must be >= 1");
      if (t.monomial.total_degree() == 1) {
        int p = t.monomial.exps.begin()->first;
        bool merged = false;
        for (auto& [lp, lc] : eq.linear) {
          if (lp == p) {
            lc += t.coef;
            merged = true;
            break;
          }
        }
        if (!merged) eq.linear.push_back({p, t.coef});
      } else {
        kept.push_back(t);
      }
    }
    eq.poly = std::move(kept);
    std::sort(eq.linear.begin(), eq.linear.end());
    for (size_t i = 1; i < eq.linear.size(); ++i)
      if (eq.linear[i].first == eq.linear[i - 1].first)
        throw std::invalid_argument(
            "duplicate linear parent in equation for " + graph.name_of(v));
    // mentioned parents must match graph parents exactly
    std::set<int> mentioned;
    for (const auto& [p, c] : eq.linear) mentioned.insert(p);
    for (const auto& t : eq.poly)
      for (const auto& [p, e] : t.monomial.exps) mentioned.insert(p);
    std::set<int> declared(graph.parents(v).begin(), graph.parents(v).end());
    if (mentioned != declared)
      throw std::invalid_argument(
          "equation parents do not match graph parents for " +
          graph.name_of(v));
    if (std::binary_search(cyclic.begin(), cyclic.end(), v) &&
        !eq.poly.empty())
      throw std::invalid_argument(
          "vertex on a cycle has a non-linear equation: " + graph.name_of(v));
  }
}

int Dataset::column_index(const std::string& name) const {
  for (size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return static_cast<int>(i);
  throw std::invalid_argument("unknown column: " + name);
}

Dataset Dataset::select(const std::vector<std::string>& names) const {
  Dataset out;
  out.columns = names;
  out.seed = seed;
  out.values.resize(values.rows(), static_cast<Eigen::Index>(names.size()));
  for (size_t i = 0; i < names.size(); ++i)
    out.values.col(static_cast<Eigen::Index>(i)) =
        values.col(column_index(names[i]));
  return out;
}

std::string residual_tag_name(const PathDiagram& g, const ResidualTag& tag) {
  return tag.is_error ? "eps_" + g.name_of(tag.vertex) : g.name_of(tag.vertex);
}

std::string LaViolation::describe(const PathDiagram& g) const {
  switch (kind) {
    case Kind::kCycleMember:
      return g.name_of(vertex) + " lies on a cycle inside the choke region";
    case Kind::kNonlinearRowSide:
      return g.name_of(vertex) + " is non-linear in " + g.name_of(parent) +
             " inside the row-side region";
    case Kind::kNonlinearColSide:
      return g.name_of(vertex) + " is non-linear in " + g.name_of(parent) +
             " inside the column-side region";
  }
  return {};
}

std::vector<LaViolation> validate_LA_below(const SemModel& model,
                                           const ChokePair& pair,
                                           const VertexSet& a,
                                           const VertexSet& b) {
  const PathDiagram& g = model.graph;
  VertexSet da = directed_region(g, pair.ca, a);
  VertexSet db = directed_region(g, pair.cb, b);
  VertexSet w;
  std::set_union(da.begin(), da.end(), db.begin(), db.end(),
                 std::back_inserter(w));
  auto cyclic = vertices_on_cycles(g);
  std::vector<LaViolation> out;
  for (int v : w)
    if (std::binary_search(cyclic.begin(), cyclic.end(), v))
      out.push_back({LaViolation::Kind::kCycleMember, v, -1});
  auto check_side = [&](const VertexSet& region, const VertexSet& choke,
                        LaViolation::Kind kind) {
    for (int x : region) {
      for (int p : model.equations[x].nonlinear_parents()) {
        if (std::binary_search(region.begin(), region.end(), p) ||
            std::binary_search(choke.begin(), choke.end(), p))
          out.push_back({kind, x, p});
      }
    }
  };
  check_side(da, pair.ca, LaViolation::Kind::kNonlinearRowSide);
  check_side(db, pair.cb, LaViolation::Kind::kNonlinearColSide);
  return out;
}

ReductionResult reduce_below_choke(const SemModel& model, const VertexSet& c,
                                   const VertexSet& a) {
  const PathDiagram& g = model.graph;
  {
    auto violations = validate_LA_below(model, {c, {}}, a, {});
    if (!violations.empty())
      throw std::invalid_argument("model is not LA below the choke set: " +
                                  violations.front().describe(g));
  }
  ReductionResult res;
  res.targets = a;
  res.choke = c;
  res.lambda = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(a.size()),
                                     static_cast<Eigen::Index>(c.size()));
  res.residual_ancestry.resize(a.size());
  std::map<int, int> choke_col;
  for (size_t j = 0; j < c.size(); ++j) choke_col[c[j]] = static_cast<int>(j);

  for (size_t i = 0; i < a.size(); ++i) {
    int target = a[i];
    std::set<ResidualTag> residuals;
    if (choke_col.count(target)) {  // target inside the choke set: identity
      res.lambda(static_cast<Eigen::Index>(i), choke_col[target]) = 1.0;
      continue;
    }
    VertexSet region = directed_region(g, c, {target});
    if (region.empty()) {  // no paths from the choke set to this target
      residuals.insert({false, target});
      res.residual_ancestry[i] = {residuals.begin(), residuals.end()};
      continue;
    }
    // longest-path distance to the target inside the (acyclic) region
    std::map<int, int> dist;
    dist[target] = 0;
    {
      bool changed = true;
      int guard = static_cast<int>(region.size()) + 2;
      while (changed && guard-- > 0) {
        changed = false;
        for (int v : region) {
          if (v == target) continue;
          int best = -1;
          for (int ch : g.children(v)) {
            auto it = dist.find(ch);
            if (it != dist.end() && it->second + 1 > best)
              best = it->second + 1;
          }
          if (best >= 0 && (!dist.count(v) || dist[v] != best)) {
            dist[v] = best;
            changed = true;
          }
        }
      }
      if (guard <= 0)
        throw std::invalid_argument("choke region is not acyclic");
    }
    std::map<int, double> active;  // vertex -> accumulated coefficient
    active[target] = 1.0;
    auto in_region = [&](int v) {
      return std::binary_search(region.begin(), region.end(), v);
    };
    // expand children before parents so each vertex is substituted once with
    // its full accumulated coefficient
    while (true) {
      int pick = -1, pick_dist = -1;
      for (const auto& [v, w] : active) {
        if (choke_col.count(v)) continue;
        int dv = dist.count(v) ? dist[v] : 0;
        if (pick == -1 || dv < pick_dist) {
          pick = v;
          pick_dist = dv;
        }
      }
      if (pick == -1) break;
      double weight = active[pick];
      active.erase(pick);
      const EquationSpec& eq = model.equations[pick];
      for (const auto& [p, coef] : eq.linear) {
        if (choke_col.count(p) || in_region(p))
          active[p] += weight * coef;
        else
          residuals.insert({false, p});
      }
      for (const auto& t : eq.poly)
        for (const auto& [p, e] : t.monomial.exps)
          residuals.insert({false, p});
      residuals.insert({true, pick});
    }
    for (const auto& [v, w] : active)
      res.lambda(static_cast<Eigen::Index>(i), choke_col.at(v)) = w;
    res.residual_ancestry[i] = {residuals.begin(), residuals.end()};
  }
  return res;
}

namespace {

// Evaluation plan: strongly connected blocks in ancestor-first order; cyclic
// blocks carry a factored (I - B_block).
struct SimPlan {
  struct Block {
    std::vector<int> members;
    bool cyclic = false;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;
  };
  std::vector<Block> blocks;
};

SimPlan build_plan(const SemModel& model) {
  const PathDiagram& g = model.graph;
  int ncomp = 0;
  auto comp = strongly_connected_components(g, &ncomp);
  SimPlan plan;
  plan.blocks.resize(ncomp);
  for (int v = 0; v < g.vertex_count(); ++v)
    plan.blocks[comp[v]].members.push_back(v);
  // components are numbered sinks-first; ancestors have larger ids
  std::reverse(plan.blocks.begin(), plan.blocks.end());
  for (auto& blk : plan.blocks) {
    blk.cyclic = blk.members.size() >= 2;
    if (!blk.cyclic) continue;
    int m = static_cast<int>(blk.members.size());
    std::map<int, int> pos;
    for (int i = 0; i < m; ++i) pos[blk.members[i]] = i;
    Eigen::MatrixXd coupling = Eigen::MatrixXd::Identity(m, m);
    for (int i = 0; i < m; ++i) {
      const EquationSpec& eq = model.equations[blk.members[i]];
      if (!eq.poly.empty())
        throw std::invalid_argument("non-linear cycle at " +
                                    g.name_of(blk.members[i]));
      for (const auto& [p, coef] : eq.linear) {
        auto it = pos.find(p);
        if (it != pos.end()) coupling(i, it->second) -= coef;
      }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> check(coupling);
    if (!check.isInvertible())
      throw std::invalid_argument("singular cyclic block at " +
                                  g.name_of(blk.members.front()));
    blk.lu.compute(coupling);
  }
  return plan;
}

double eval_poly(const PolyTerm& t, const Eigen::VectorXd& row) {
  double prod = t.coef;
  for (const auto& [p, e] : t.monomial.exps) {
    double base = row[p];
    for (int k = 0; k < e; ++k) prod *= base;
  }
  return prod;
}

void eval_row(const SemModel& model, const SimPlan& plan, std::uint64_t seed,
              long row_index, Eigen::VectorXd& row) {
  const int nv = model.graph.vertex_count();
  for (const auto& blk : plan.blocks) {
    if (!blk.cyclic) {
      int v = blk.members.front();
      const EquationSpec& eq = model.equations[v];
      double x = eq.error_sd *
                 CounterRng::normal_at(
                     seed, static_cast<std::uint64_t>(row_index) * nv + v);
      for (const auto& [p, coef] : eq.linear) x += coef * row[p];
      for (const auto& t : eq.poly) x += eval_poly(t, row);
      row[v] = x;
    } else {
      int m = static_cast<int>(blk.members.size());
      Eigen::VectorXd rhs(m);
      for (int i = 0; i < m; ++i) {
        int v = blk.members[i];
        const EquationSpec& eq = model.equations[v];
        double x = eq.error_sd *
                   CounterRng::normal_at(
                       seed, static_cast<std::uint64_t>(row_index) * nv + v);
        for (const auto& [p, coef] : eq.linear) {
          bool internal = std::find(blk.members.begin(), blk.members.end(),
                                    p) != blk.members.end();
          if (!internal) x += coef * row[p];
        }
        rhs[i] = x;
      }
      Eigen::VectorXd sol = blk.lu.solve(rhs);
      for (int i = 0; i < m; ++i) row[blk.members[i]] = sol[i];
    }
  }
}

}  // namespace

Dataset simulate(const SemModel& model, long n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample count must be >= 1");
  SimPlan plan = build_plan(model);
  const int nv = model.graph.vertex_count();
  Dataset out;
  out.seed = seed;
  for (int v = 0; v < nv; ++v) out.columns.push_back(model.graph.name_of(v));
  out.values.resize(n, nv);
  Eigen::VectorXd row(nv);
  for (long r = 0; r < n; ++r) {
    eval_row(model, plan, seed, r, row);
    if (!row.allFinite())
      throw std::runtime_error("non-finite sample at row " +
                               std::to_string(r));
    out.values.row(r) = row;
  }
  return out;
}

PopulationCov population_cov_analytic(const SemModel& model) {
  const PathDiagram& g = model.graph;
  const int nv = g.vertex_count();
  for (const auto& eq : model.equations)
    if (!eq.poly.empty())
      throw std::invalid_argument(
          "analytic covariance requires a fully linear model");
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(nv, nv);
  Eigen::MatrixXd err = Eigen::MatrixXd::Zero(nv, nv);
  for (int v = 0; v < nv; ++v) {
    for (const auto& [p, coef] : model.equations[v].linear) b(v, p) = coef;
    err(v, v) = model.equations[v].error_sd * model.equations[v].error_sd;
  }
  Eigen::MatrixXd i_minus_b = Eigen::MatrixXd::Identity(nv, nv) - b;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(i_minus_b);
  if (!lu.isInvertible())
    throw std::invalid_argument("singular (I - B): no reduced form");
  Eigen::MatrixXd half = lu.solve(err);
  Eigen::MatrixXd sigma = lu.solve(half.transpose()).transpose();
  sigma = ((sigma + sigma.transpose()) / 2.0).eval();
  PopulationCov out;
  for (int v = 0; v < nv; ++v) out.names.push_back(g.name_of(v));
  out.cov = std::move(sigma);
  return out;
}

PopulationCov population_cov_mc(const SemModel& model, long n,
                                std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("sample count must be >= 2");
  SimPlan plan = build_plan(model);
  const int nv = model.graph.vertex_count();
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(nv);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(nv, nv);
  Eigen::MatrixXd q2 = Eigen::MatrixXd::Zero(nv, nv);
  Eigen::MatrixXd c21 = Eigen::MatrixXd::Zero(nv, nv);
  Eigen::VectorXd row(nv), sq(nv);
  for (long r = 0; r < n; ++r) {
    eval_row(model, plan, seed, r, row);
    if (!row.allFinite())
      throw std::runtime_error("non-finite sample at row " +
                               std::to_string(r));
    sq = row.array().square();
    s1 += row;
    s2.noalias() += row * row.transpose();
    q2.noalias() += sq * sq.transpose();
    c21.noalias() += sq * row.transpose();
  }
  Eigen::VectorXd mu = s1 / static_cast<double>(n);
  Eigen::MatrixXd cov = (s2 - static_cast<double>(n) * mu * mu.transpose()) /
                        static_cast<double>(n - 1);
  // empirical asymptotic variance of each sample covariance entry
  Eigen::VectorXd q1 = s2.diagonal();
  Eigen::MatrixXd se(nv, nv);
  for (int a = 0; a < nv; ++a) {
    for (int bb = 0; bb < nv; ++bb) {
      double m22 =
          (q2(a, bb) - 2.0 * mu[bb] * c21(a, bb) - 2.0 * mu[a] * c21(bb, a) +
           mu[bb] * mu[bb] * q1[a] + mu[a] * mu[a] * q1[bb] +
           4.0 * mu[a] * mu[bb] * s2(a, bb) -
           2.0 * mu[a] * mu[bb] * mu[bb] * s1[a] -
           2.0 * mu[a] * mu[a] * mu[bb] * s1[bb] +
           static_cast<double>(n) * mu[a] * mu[a] * mu[bb] * mu[bb]) /
          static_cast<double>(n);
      double var = (m22 - cov(a, bb) * cov(a, bb)) / static_cast<double>(n);
      se(a, bb) = var > 0 ? std::sqrt(var) : 0.0;
    }
  }
  PopulationCov out;
  for (int v = 0; v < nv; ++v) out.names.push_back(model.graph.name_of(v));
  out.cov = std::move(cov);
  out.n = n;
  out.standard_error = std::move(se);
  return out;
}

ReductionCovCheck reduction_cov_check(const SemModel& model,
                                      const ReductionResult& reduction,
                                      const VertexSet& b, long n,
                                      std::uint64_t seed) {
  if (n < 3) throw std::invalid_argument("sample count must be >= 3");
  SimPlan plan = build_plan(model);
  const int nv = model.graph.vertex_count();
  const int na = static_cast<int>(reduction.targets.size());
  const int nb = static_cast<int>(b.size());
  const int nc = static_cast<int>(reduction.choke.size());
  Eigen::VectorXd row(nv), rvec(na), bvec(nb), cvec(nc);
  Eigen::VectorXd sr = Eigen::VectorXd::Zero(na), sb = Eigen::VectorXd::Zero(nb);
  Eigen::MatrixXd srb = Eigen::MatrixXd::Zero(na, nb);
  Eigen::MatrixXd q2 = Eigen::MatrixXd::Zero(na, nb);   // sum r^2 b^2
  Eigen::MatrixXd c_rrb = Eigen::MatrixXd::Zero(na, nb);  // sum r^2 b
  Eigen::MatrixXd c_rbb = Eigen::MatrixXd::Zero(na, nb);  // sum r b^2
  Eigen::VectorXd qr = Eigen::VectorXd::Zero(na), qb = Eigen::VectorXd::Zero(nb);
  for (long rix = 0; rix < n; ++rix) {
    eval_row(model, plan, seed, rix, row);
    for (int i = 0; i < nc; ++i) cvec[i] = row[reduction.choke[i]];
    for (int i = 0; i < na; ++i)
      rvec[i] = row[reduction.targets[i]] -
                (nc ? reduction.lambda.row(i).dot(cvec) : 0.0);
    for (int j = 0; j < nb; ++j) bvec[j] = row[b[j]];
    sr += rvec;
    sb += bvec;
    qr += rvec.array().square().matrix();
    qb += bvec.array().square().matrix();
    srb.noalias() += rvec * bvec.transpose();
    q2.noalias() += rvec.array().square().matrix() *
                    bvec.array().square().matrix().transpose();
    c_rrb.noalias() += rvec.array().square().matrix() * bvec.transpose();
    c_rbb.noalias() += rvec * bvec.array().square().matrix().transpose();
  }
  double nn = static_cast<double>(n);
  Eigen::VectorXd mr = sr / nn, mb = sb / nn;
  ReductionCovCheck out;
  out.residual_cov.resize(na, nb);
  out.z.resize(na, nb);
  for (int i = 0; i < na; ++i) {
    for (int j = 0; j < nb; ++j) {
      double cov = (srb(i, j) - nn * mr[i] * mb[j]) / (nn - 1.0);
      double m22 = (q2(i, j) - 2.0 * mb[j] * c_rrb(i, j) -
                    2.0 * mr[i] * c_rbb(i, j) + mb[j] * mb[j] * qr[i] +
                    mr[i] * mr[i] * qb[j] + 4.0 * mr[i] * mb[j] * srb(i, j) -
                    2.0 * mr[i] * mb[j] * mb[j] * sr[i] -
                    2.0 * mr[i] * mr[i] * mb[j] * sb[j] +
                    nn * mr[i] * mr[i] * mb[j] * mb[j]) /
                   nn;
      double var = (m22 - cov * cov) / nn;
      double se = var > 0 ? std::sqrt(var) : 0.0;
      out.residual_cov(i, j) = cov;
      out.z(i, j) = se > 0 ? cov / se : 0.0;
      out.max_abs_z = std::max(out.max_abs_z, std::abs(out.z(i, j)));
    }
  }
  return out;
}

SemModel draw_model(const FreeSemModel& free_model, std::uint64_t seed) {
  CounterRng rng(seed);
  SemModel model;
  model.graph = free_model.graph;
  model.equations.resize(free_model.equations.size());
  for (size_t v = 0; v < free_model.equations.size(); ++v) {
    const FreeEquation& fe = free_model.equations[v];
    for (const auto& [p, range] : fe.linear)
      if (range.lo > range.hi)
        throw std::invalid_argument("coefficient range has lo > hi");
    for (const auto& [range, mono] : fe.poly)
      if (range.lo > range.hi)
        throw std::invalid_argument("coefficient range has lo > hi");
    EquationSpec& eq = model.equations[v];
    eq.variable = static_cast<int>(v);
    eq.error_sd = fe.error_sd;
    for (const auto& [p, range] : fe.linear)
      eq.linear.push_back(
          {p, range.fixed() ? range.lo : rng.uniform(range.lo, range.hi)});
    for (const auto& [range, mono] : fe.poly)
      eq.poly.push_back(
          {range.fixed() ? range.lo : rng.uniform(range.lo, range.hi), mono});
  }
  model.validate();
  return model;
}

FreeSemModel study_model(double b, double d) {
  FreeSemModel fm;
  PathDiagram& g = fm.graph;
  for (int i = 1; i <= 5; ++i)
    g.add_vertex("L" + std::to_string(i), VertexKind::kLatent);
  for (int i = 1; i <= 25; ++i)
    g.add_vertex("X" + std::to_string(i), VertexKind::kMeasured);
  for (int i = 2; i <= 5; ++i) g.add_edge("L1", "L" + std::to_string(i));
  for (int li = 0; li < 5; ++li)
    for (int k = 1; k <= 5; ++k)
      g.add_edge("L" + std::to_string(li + 1),
                 "X" + std::to_string(5 * li + k));
  g.add_edge("X1", "X6");
  g.add_edge("X15", "X19");
  g.add_edge("L3", "X10");
  g.add_edge("L4", "X21");

  fm.equations.resize(g.vertex_count());
  int l1 = g.index_of("L1");
  for (int i = 2; i <= 5; ++i) {
    FreeEquation& eq = fm.equations[g.index_of("L" + std::to_string(i))];
    eq.linear.push_back({l1, {0.25, 1.0}});
    if (b != 0.0) eq.poly.push_back({{0.5 * b, 2.0 * b}, Monomial{{{l1, 3}}}});
  }
  for (int k = 1; k <= 25; ++k) {
    int x = g.index_of("X" + std::to_string(k));
    int lp = g.index_of("L" + std::to_string((k - 1) / 5 + 1));
    FreeEquation& eq = fm.equations[x];
    eq.linear.push_back({lp, {(1.0 - d) * 0.5, (1.0 - d) * 2.0}});
    if (d != 0.0) eq.poly.push_back({{0.5 * d, 2.0 * d}, Monomial{{{lp, 3}}}});
  }
  // impurity edges stay linear
  auto add_impurity = [&](const char* tail, const char* head) {
    fm.equations[g.index_of(head)].linear.push_back(
        {g.index_of(tail), {0.5, 2.0}});
  };
  add_impurity("X1", "X6");
  add_impurity("X15", "X19");
  add_impurity("L3", "X10");
  add_impurity("L4", "X21");
  return fm;
}

namespace {

nlohmann::ordered_json equation_to_json(const PathDiagram& g,
                                        const EquationSpec& eq) {
  nlohmann::ordered_json o;
  nlohmann::ordered_json linear = nlohmann::ordered_json::object();
  for (const auto& [p, coef] : eq.linear) linear[g.name_of(p)] = coef;
  o["linear"] = std::move(linear);
  nlohmann::ordered_json poly = nlohmann::ordered_json::array();
  for (const auto& t : eq.poly) {
    nlohmann::ordered_json mono = nlohmann::ordered_json::object();
    for (const auto& [p, e] : t.monomial.exps) mono[g.name_of(p)] = e;
    poly.push_back({{"coef", t.coef}, {"monomial", std::move(mono)}});
  }
  o["poly"] = std::move(poly);
  o["error"] = {{"dist", "gaussian"}, {"sd", eq.error_sd}};
  return o;
}

}  // namespace

std::string save_model(const SemModel& model) {
  nlohmann::ordered_json o;
  o["graph"] = emit_path_diagram(model.graph);
  nlohmann::ordered_json eqs = nlohmann::ordered_json::object();
  for (int v = 0; v < model.graph.vertex_count(); ++v)
    eqs[model.graph.name_of(v)] =
        equation_to_json(model.graph, model.equations[v]);
  o["equations"] = std::move(eqs);
  return o.dump(2);
}

SemModel load_model(const std::string& json_text, const std::string& base_dir) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("model JSON: ") + e.what());
  }
  if (!doc.contains("graph") || !doc.contains("equations"))
    throw std::invalid_argument("model JSON needs 'graph' and 'equations'");
  std::string graph_field = doc["graph"].get<std::string>();
  std::string graph_text;
  if (graph_field.find('\n') == std::string::npos) {
    namespace fs = std::filesystem;
    fs::path p = graph_field;
    if (!base_dir.empty() && p.is_relative() &&
        fs::exists(fs::path(base_dir) / p))
      p = fs::path(base_dir) / p;
    if (fs::exists(p)) {
      std::ifstream in(p);
      std::stringstream ss;
      ss << in.rdbuf();
      graph_text = ss.str();
    } else {
      graph_text = graph_field;  // a one-line inline document
    }
  } else {
    graph_text = graph_field;
  }
  SemModel model;
  model.graph = parse_path_diagram(graph_text);
  model.equations.resize(model.graph.vertex_count());
  for (int v = 0; v < model.graph.vertex_count(); ++v) {
    model.equations[v].variable = v;
    const std::string& name = model.graph.name_of(v);
    if (!doc["equations"].contains(name))
      throw std::invalid_argument("missing equation for " + name);
    const auto& e = doc["equations"][name];
    EquationSpec& eq = model.equations[v];
    if (e.contains("linear"))
      for (auto it = e["linear"].begin(); it != e["linear"].end(); ++it)
        eq.linear.push_back(
            {model.graph.index_of(it.key()), it.value().get<double>()});
    if (e.contains("poly")) {
      for (const auto& t : e["poly"]) {
        PolyTerm term;
        term.coef = t.at("coef").get<double>();
        for (auto it = t.at("monomial").begin(); it != t.at("monomial").end();
             ++it)
          term.monomial.exps[model.graph.index_of(it.key())] =
              it.value().get<int>();
        eq.poly.push_back(std::move(term));
      }
    }
    if (e.contains("error")) {
      const auto& err = e["error"];
      if (err.contains("dist") && err["dist"].get<std::string>() != "gaussian")
        throw std::invalid_argument("only gaussian errors are supported");
      if (err.contains("sd")) eq.error_sd = err["sd"].get<double>();
    }
  }
  model.validate();
  return model;
}

SemModel load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open model file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_model(ss.str(),
                    std::filesystem::path(path).parent_path().string());
}

std::string dataset_to_csv(const Dataset& data) {
  std::string out;
  for (size_t i = 0; i < data.columns.size(); ++i) {
    if (i) out += ",";
    out += data.columns[i];
  }
  out += "\n";
  for (Eigen::Index r = 0; r < data.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < data.values.cols(); ++c) {
      if (c) out += ",";
      out += detail::format_double(data.values(r, c));
    }
    out += "\n";
  }
  return out;
}

Dataset dataset_from_csv(const std::string& text) {
  Dataset out;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty CSV document");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::stringstream header(line);
  std::string cell;
  while (std::getline(header, cell, ',')) out.columns.push_back(cell);
  if (out.columns.empty()) throw std::invalid_argument("empty CSV header");
  std::vector<double> cells;
  long rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream row(line);
    int got = 0;
    while (std::getline(row, cell, ',')) {
      size_t pos = 0;
      double v = std::stod(cell, &pos);
      if (!std::isfinite(v))
        throw std::invalid_argument("non-finite value in CSV");
      cells.push_back(v);
      ++got;
    }
    if (got != static_cast<int>(out.columns.size()))
      throw std::invalid_argument("ragged CSV row");
    ++rows;
  }
  out.values.resize(rows, static_cast<Eigen::Index>(out.columns.size()));
  for (long r = 0; r < rows; ++r)
    for (size_t c = 0; c < out.columns.size(); ++c)
      out.values(r, static_cast<Eigen::Index>(c)) =
          cells[r * out.columns.size() + c];
  return out;
}

}  // namespace trekrank
