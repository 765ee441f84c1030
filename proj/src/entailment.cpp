#include "trekrank/entailment.hpp"

#include <algorithm>
#include <deque>

#include "json.hpp"

namespace trekrank {

namespace {

constexpr long long kInf = 1LL << 40;

void check_sides(const PathDiagram& g, const VertexSet& a,
                 const VertexSet& b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("A and B must be nonempty");
  for (int v : a)
    if (v < 0 || v >= g.vertex_count())
      throw std::invalid_argument("unknown vertex id " + std::to_string(v));
  for (int v : b)
    if (v < 0 || v >= g.vertex_count())
      throw std::invalid_argument("unknown vertex id " + std::to_string(v));
  VertexSet inter;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                        std::back_inserter(inter));
  if (!inter.empty()) throw std::invalid_argument("A and B overlap");
}

// lexicographic combination enumeration over 0..pool_size-1
bool next_combination(std::vector<int>& idx, int pool_size) {
  int k = static_cast<int>(idx.size());
  for (int i = k - 1; i >= 0; --i) {
    if (idx[i] < pool_size - (k - i)) {
      ++idx[i];
      for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
      return true;
    }
  }
  return false;
}

int node_li(int v) { return 4 * v; }
int node_lo(int v) { return 4 * v + 1; }
int node_ri(int v) { return 4 * v + 2; }
int node_ro(int v) { return 4 * v + 3; }

}  // namespace

struct MinChokeSolver::Impl {
  // Arc storage: arc i is froms[i] -> tos[i]; capacity slots 2i (forward) and
  // 2i+1 (residual). Adjacency holds slot indices. Only `cap` is rewritten
  // between queries.
  std::vector<int> froms, tos;
  std::vector<long long> cap, base_cap;
  std::vector<std::vector<int>> adj;
  std::vector<int> split_l, split_r, src_arc, sink_arc;  // forward slots
  std::vector<int> parent;  // BFS buffer
  int nv = 0, n_nodes = 0, s_node = 0, t_node = 0;

  int add_arc(int u, int v) {
    int slot = static_cast<int>(cap.size());
    froms.push_back(u);
    tos.push_back(v);
    cap.push_back(0);
    cap.push_back(0);
    adj[u].push_back(slot);
    adj[v].push_back(slot + 1);
    return slot;
  }
  int slot_to(int slot) const {
    return (slot & 1) ? froms[slot >> 1] : tos[slot >> 1];
  }
  int slot_from(int slot) const {
    return (slot & 1) ? tos[slot >> 1] : froms[slot >> 1];
  }

  explicit Impl(const PathDiagram& g) {
    nv = g.vertex_count();
    n_nodes = 4 * nv + 2;
    s_node = 4 * nv;
    t_node = 4 * nv + 1;
    adj.assign(n_nodes, {});
    split_l.resize(nv);
    split_r.resize(nv);
    src_arc.resize(nv);
    sink_arc.resize(nv);
    for (int v = 0; v < nv; ++v) {
      split_l[v] = add_arc(node_li(v), node_lo(v));
      split_r[v] = add_arc(node_ri(v), node_ro(v));
      add_arc(node_lo(v), node_ri(v));  // top switch
    }
    for (const auto& e : g.edges()) {
      add_arc(node_lo(e.head), node_li(e.tail));  // upward leg, reversed
      add_arc(node_ro(e.tail), node_ri(e.head));  // downward leg
    }
    for (int v = 0; v < nv; ++v) {
      src_arc[v] = add_arc(s_node, node_li(v));
      sink_arc[v] = add_arc(node_ro(v), t_node);
    }
    base_cap.assign(cap.size(), 0);
    for (size_t i = 0; i < froms.size(); ++i) base_cap[2 * i] = kInf;
    for (int v = 0; v < nv; ++v) {
      base_cap[split_l[v]] = 0;
      base_cap[split_r[v]] = 0;
      base_cap[src_arc[v]] = 0;
      base_cap[sink_arc[v]] = 0;
    }
    parent.assign(n_nodes, -1);
  }

  long long max_flow() {
    long long total = 0;
    while (true) {
      std::fill(parent.begin(), parent.end(), -1);
      std::deque<int> queue{s_node};
      parent[s_node] = -2;
      bool found = false;
      while (!queue.empty() && !found) {
        int u = queue.front();
        queue.pop_front();
        for (int slot : adj[u]) {
          if (cap[slot] <= 0) continue;
          int v = slot_to(slot);
          if (parent[v] != -1) continue;
          parent[v] = slot;
          if (v == t_node) {
            found = true;
            break;
          }
          queue.push_back(v);
        }
      }
      if (!found) return total;
      long long push = kInf * 4;
      for (int v = t_node; v != s_node;) {
        int slot = parent[v];
        push = std::min(push, cap[slot]);
        v = slot_from(slot);
      }
      for (int v = t_node; v != s_node;) {
        int slot = parent[v];
        cap[slot] -= push;
        cap[slot ^ 1] += push;
        v = slot_from(slot);
      }
      total += push;
    }
  }

  std::vector<char> residual_reach() const {
    std::vector<char> seen(n_nodes, 0);
    std::deque<int> queue{s_node};
    seen[s_node] = 1;
    while (!queue.empty()) {
      int u = queue.front();
      queue.pop_front();
      for (int slot : adj[u]) {
        int v = slot_to(slot);
        if (!seen[v] && cap[slot] > 0) {
          seen[v] = 1;
          queue.push_back(v);
        }
      }
    }
    return seen;
  }

  long long min_cut_value(const VertexSet& a, const VertexSet& b,
                          long long unit_l, long long unit_r,
                          const std::vector<char>* forced_a,
                          const std::vector<char>* banned_a,
                          const std::vector<char>* forced_b,
                          const std::vector<char>* banned_b) {
    cap = base_cap;
    for (int v = 0; v < nv; ++v) {
      long long cl = unit_l, cr = unit_r;
      if (forced_a && (*forced_a)[v]) cl = 0;
      if (banned_a && (*banned_a)[v]) cl = kInf;
      if (forced_b && (*forced_b)[v]) cr = 0;
      if (banned_b && (*banned_b)[v]) cr = kInf;
      cap[split_l[v]] = cl;
      cap[split_r[v]] = cr;
    }
    for (int v : a) cap[src_arc[v]] = kInf;
    for (int v : b) cap[sink_arc[v]] = kInf;
    return max_flow();
  }

  ChokePair residual_cut() const {
    auto reach = residual_reach();
    ChokePair pair;
    for (int v = 0; v < nv; ++v) {
      if (reach[node_li(v)] && !reach[node_lo(v)]) pair.ca.push_back(v);
      if (reach[node_ri(v)] && !reach[node_ro(v)]) pair.cb.push_back(v);
    }
    return pair;
  }
};

MinChokeSolver::MinChokeSolver(const PathDiagram& g)
    : g_(g), impl_(std::make_unique<Impl>(g)) {}

MinChokeSolver::~MinChokeSolver() = default;
MinChokeSolver::MinChokeSolver(MinChokeSolver&&) noexcept = default;

int MinChokeSolver::bound(const VertexSet& a, const VertexSet& b) {
  check_sides(g_, a, b);
  return static_cast<int>(
      impl_->min_cut_value(a, b, 1, 1, nullptr, nullptr, nullptr, nullptr));
}

MinChokeResult MinChokeSolver::solve(const VertexSet& a, const VertexSet& b) {
  check_sides(g_, a, b);
  long long f =
      impl_->min_cut_value(a, b, 1, 1, nullptr, nullptr, nullptr, nullptr);
  MinChokeResult res;
  res.size = static_cast<int>(f);
  res.pair = impl_->residual_cut();
  return res;
}

MinChokeResult MinChokeSolver::solve_canonical(const VertexSet& a,
                                               const VertexSet& b) {
  check_sides(g_, a, b);
  auto& im = *impl_;
  int nv = im.nv;
  // minimize M*size + #ca jointly: weight L cuts M+1, R cuts M
  const long long m = nv + 1;
  long long f =
      im.min_cut_value(a, b, m + 1, m, nullptr, nullptr, nullptr, nullptr);
  int total = static_cast<int>(f / m);
  int ka = static_cast<int>(f % m);
  int kb = total - ka;

  // lexicographically least ca of size ka admitting a completion, by
  // constrained feasibility at the optimum
  std::vector<char> forced_a(nv, 0), banned_a(nv, 0);
  int chosen = 0;
  for (int v = 0; v < nv && chosen < ka; ++v) {
    forced_a[v] = 1;
    long long expect =
        m * static_cast<long long>(total - chosen - 1) + (ka - chosen - 1);
    long long got =
        im.min_cut_value(a, b, m + 1, m, &forced_a, &banned_a, nullptr,
                         nullptr);
    if (got == expect) {
      ++chosen;
    } else {
      forced_a[v] = 0;
      banned_a[v] = 1;
    }
  }
  for (int v = 0; v < nv; ++v)
    if (!forced_a[v]) banned_a[v] = 1;

  std::vector<char> forced_b(nv, 0), banned_b(nv, 0);
  int chosen_b = 0;
  for (int v = 0; v < nv && chosen_b < kb; ++v) {
    forced_b[v] = 1;
    long long expect = m * static_cast<long long>(kb - chosen_b - 1);
    long long got = im.min_cut_value(a, b, m + 1, m, &forced_a, &banned_a,
                                     &forced_b, &banned_b);
    if (got == expect) {
      ++chosen_b;
    } else {
      forced_b[v] = 0;
      banned_b[v] = 1;
    }
  }

  MinChokeResult res;
  res.size = total;
  for (int v = 0; v < nv; ++v) {
    if (forced_a[v]) res.pair.ca.push_back(v);
    if (forced_b[v]) res.pair.cb.push_back(v);
  }
  return res;
}

MinChokeResult min_choke(const PathDiagram& g, const VertexSet& a,
                         const VertexSet& b) {
  MinChokeSolver solver(g);
  return solver.solve_canonical(a, b);
}

MinChokeResult brute_force_min_choke(const PathDiagram& g, const VertexSet& a,
                                     const VertexSet& b, int vertex_cap) {
  check_sides(g, a, b);
  int nv = g.vertex_count();
  if (nv > vertex_cap)
    throw std::invalid_argument("graph exceeds brute-force cap of " +
                                std::to_string(vertex_cap) + " vertices");
  int max_size = static_cast<int>(std::min(a.size(), b.size()));
  for (int total = 0; total <= max_size; ++total) {
    for (int ka = 0; ka <= total; ++ka) {
      int kb = total - ka;
      std::vector<int> ia(ka);
      for (int i = 0; i < ka; ++i) ia[i] = i;
      while (true) {
        VertexSet ca(ia.begin(), ia.end());
        std::vector<int> ib(kb);
        for (int i = 0; i < kb; ++i) ib[i] = i;
        while (true) {
          VertexSet cb(ib.begin(), ib.end());
          if (t_separates(g, {ca, cb}, a, b).separated)
            return {{ca, cb}, total};
          if (kb == 0 || !next_combination(ib, nv)) break;
        }
        if (ka == 0 || !next_combination(ia, nv)) break;
      }
    }
  }
  throw std::logic_error("no separating pair found");  // (A; {}) always works
}

int entailed_rank_bound(const PathDiagram& g, const VertexSet& a,
                        const VertexSet& b) {
  MinChokeSolver solver(g);
  return solver.bound(a, b);
}

std::vector<RankConstraint> enumerate_constraints(const PathDiagram& g,
                                                  const VertexSet& measured,
                                                  int p, int q) {
  if (p < 2 || q < 2) throw std::invalid_argument("p and q must be >= 2");
  if (p + q > static_cast<int>(measured.size()))
    throw std::invalid_argument("p + q exceeds the variable pool");
  MinChokeSolver solver(g);
  std::vector<RankConstraint> out;
  int pool = static_cast<int>(measured.size());
  std::vector<int> ai(p);
  for (int i = 0; i < p; ++i) ai[i] = i;
  while (true) {
    VertexSet rows;
    std::vector<char> in_a(pool, 0);
    for (int i : ai) {
      rows.push_back(measured[i]);
      in_a[i] = 1;
    }
    std::vector<int> rest;
    for (int i = 0; i < pool; ++i)
      if (!in_a[i]) rest.push_back(i);
    std::vector<int> bi(q);
    for (int i = 0; i < q; ++i) bi[i] = i;
    while (true) {
      VertexSet cols;
      for (int i : bi) cols.push_back(measured[rest[i]]);
      if (p != q || rows < cols) {  // dedup unordered sides when p == q
        auto r = solver.solve(rows, cols);
        if (r.size < std::min(p, q))
          out.push_back({rows, cols, r.size, r.pair});
      }
      if (!next_combination(bi, static_cast<int>(rest.size()))) break;
    }
    if (!next_combination(ai, pool)) break;
  }
  return out;
}

std::string constraints_to_json(const PathDiagram& g,
                                const std::vector<RankConstraint>& list) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& c : list) {
    nlohmann::ordered_json o;
    o["rows"] = g.names_of(c.rows);
    o["cols"] = g.names_of(c.cols);
    o["bound"] = c.bound;
    o["chokeA"] = g.names_of(c.witness.ca);
    o["chokeB"] = g.names_of(c.witness.cb);
    arr.push_back(std::move(o));
  }
  return arr.dump();
}

}  // namespace trekrank
