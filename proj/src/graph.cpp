#include "trekrank/graph.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <deque>
#include <sstream>

namespace trekrank {

bool Trek::is_simple() const {
  for (int u : p1.vertices) {
    if (u == top) continue;
    for (int v : p2.vertices) {
      if (u == v) return false;
    }
  }
  return true;
}

namespace detail {

bool valid_vertex_name(const std::string& name) {
  if (name.empty()) return false;
  if (!std::isalpha(static_cast<unsigned char>(name[0])) && name[0] != '_')
    return false;
  for (char c : name) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
  }
  return true;
}

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace detail

int PathDiagram::add_vertex(const std::string& name, VertexKind kind) {
  if (!detail::valid_vertex_name(name))
    throw std::invalid_argument("invalid vertex name: '" + name + "'");
  if (index_.count(name))
    throw std::invalid_argument("duplicate vertex: " + name);
  int id = vertex_count();
  names_.push_back(name);
  kinds_.push_back(kind);
  index_.emplace(name, id);
  parents_.emplace_back();
  children_.emplace_back();
  return id;
}

void PathDiagram::add_edge(int tail, int head, std::optional<double> coef) {
  if (tail < 0 || tail >= vertex_count() || head < 0 ||
      head >= vertex_count())
    throw std::invalid_argument("edge endpoint out of range");
  if (tail == head)
    throw std::invalid_argument("self-loop on " + names_[tail]);
  if (has_edge(tail, head))
    throw std::invalid_argument("duplicate edge " + names_[tail] + " -> " +
                                names_[head]);
  edges_.push_back({tail, head, coef});
  children_[tail].push_back(head);
  parents_[head].push_back(tail);
}

void PathDiagram::add_edge(const std::string& tail, const std::string& head,
                           std::optional<double> coef) {
  add_edge(index_of(tail), index_of(head), coef);
}

int PathDiagram::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end())
    throw std::invalid_argument("unknown vertex: " + name);
  return it->second;
}

bool PathDiagram::has_edge(int tail, int head) const {
  const auto& ch = children_.at(tail);
  return std::find(ch.begin(), ch.end(), head) != ch.end();
}

std::optional<double> PathDiagram::edge_coef(int tail, int head) const {
  for (const Edge& e : edges_) {
    if (e.tail == tail && e.head == head) return e.coef;
  }
  return std::nullopt;
}

VertexSet PathDiagram::latents() const {
  VertexSet out;
  for (int v = 0; v < vertex_count(); ++v)
    if (kinds_[v] == VertexKind::kLatent) out.push_back(v);
  return out;
}

VertexSet PathDiagram::measured() const {
  VertexSet out;
  for (int v = 0; v < vertex_count(); ++v)
    if (kinds_[v] == VertexKind::kMeasured) out.push_back(v);
  return out;
}

VertexSet PathDiagram::all_vertices() const {
  VertexSet out(vertex_count());
  for (int v = 0; v < vertex_count(); ++v) out[v] = v;
  return out;
}

VertexSet PathDiagram::resolve(const std::vector<std::string>& names) const {
  VertexSet out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(index_of(n));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::string> PathDiagram::names_of(const VertexSet& s) const {
  std::vector<std::string> out;
  out.reserve(s.size());
  for (int v : s) out.push_back(name_of(v));
  return out;
}

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> toks;
  std::istringstream in(line);
  std::string t;
  while (in >> t) toks.push_back(t);
  return toks;
}

}  // namespace

PathDiagram parse_path_diagram(const std::string& text) {
  PathDiagram g;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string trimmed = line;
    auto first = trimmed.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    if (trimmed[first] == '#') continue;
    auto toks = split_ws(trimmed);
    const std::string& kw = toks[0];
    try {
      if (kw == "latent" || kw == "measured") {
        if (toks.size() < 2) throw std::invalid_argument("missing vertex name");
        VertexKind kind =
            kw == "latent" ? VertexKind::kLatent : VertexKind::kMeasured;
        for (size_t i = 1; i < toks.size(); ++i) g.add_vertex(toks[i], kind);
      } else if (kw == "edge") {
        if (toks.size() != 4 && toks.size() != 5)
          throw std::invalid_argument("expected 'edge <tail> -> <head> [coef]'");
        if (toks[2] != "->")
          throw std::invalid_argument("expected '->' between endpoints");
        if (!g.has_vertex(toks[1]))
          throw std::invalid_argument("undeclared endpoint: " + toks[1]);
        if (!g.has_vertex(toks[3]))
          throw std::invalid_argument("undeclared endpoint: " + toks[3]);
        std::optional<double> coef;
        if (toks.size() == 5) {
          size_t pos = 0;
          double v = std::stod(toks[4], &pos);
          if (pos != toks[4].size())
            throw std::invalid_argument("bad coefficient: " + toks[4]);
          coef = v;
        }
        g.add_edge(toks[1], toks[3], coef);
      } else {
        throw std::invalid_argument("unknown directive: " + kw);
      }
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return g;
}

std::string emit_path_diagram(const PathDiagram& g) {
  std::string out;
  int v = 0;
  while (v < g.vertex_count()) {
    VertexKind kind = g.kind_of(v);
    out += kind == VertexKind::kLatent ? "latent" : "measured";
    while (v < g.vertex_count() && g.kind_of(v) == kind) {
      out += " " + g.name_of(v);
      ++v;
    }
    out += "\n";
  }
  for (const auto& e : g.edges()) {
    out += "edge " + g.name_of(e.tail) + " -> " + g.name_of(e.head);
    if (e.coef) out += " " + detail::format_double(*e.coef);
    out += "\n";
  }
  return out;
}

namespace {

// All simple directed paths from src to dst, lexicographically ordered.
void simple_paths_rec(const PathDiagram& g, int at, int dst,
                      std::vector<int>& cur, std::vector<char>& used,
                      std::vector<DirectedPath>& out) {
  if (at == dst) {
    out.push_back(DirectedPath{cur});
    return;  // extending past dst would revisit it
  }
  for (int c : g.children(at)) {
    if (used[c]) continue;
    used[c] = 1;
    cur.push_back(c);
    simple_paths_rec(g, c, dst, cur, used, out);
    cur.pop_back();
    used[c] = 0;
  }
}

std::vector<DirectedPath> simple_paths(const PathDiagram& g, int src,
                                       int dst) {
  std::vector<int> cur{src};
  std::vector<char> used(g.vertex_count(), 0);
  used[src] = 1;
  std::vector<DirectedPath> out;
  simple_paths_rec(g, src, dst, cur, used, out);
  return out;
}

}  // namespace

std::vector<Trek> simple_treks(const PathDiagram& g, int i, int j) {
  if (i < 0 || i >= g.vertex_count() || j < 0 || j >= g.vertex_count())
    throw std::invalid_argument("unknown vertex id");
  std::vector<Trek> out;
  for (int top = 0; top < g.vertex_count(); ++top) {
    auto ps1 = simple_paths(g, top, i);
    if (ps1.empty()) continue;
    auto ps2 = simple_paths(g, top, j);
    for (const auto& p1 : ps1) {
      for (const auto& p2 : ps2) {
        Trek t{p1, p2, top};
        if (t.is_simple()) out.push_back(std::move(t));
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

void check_ids(const PathDiagram& g, const VertexSet& s) {
  for (int v : s) {
    if (v < 0 || v >= g.vertex_count())
      throw std::invalid_argument("unknown vertex id " + std::to_string(v));
  }
}

// Vertices that reach a member of `targets` by a directed path avoiding
// `blocked` entirely (endpoints included); zero-length paths count.
std::vector<char> reaches_avoiding(const PathDiagram& g,
                                   const VertexSet& targets,
                                   const std::vector<char>& blocked) {
  std::vector<char> seen(g.vertex_count(), 0);
  std::deque<int> queue;
  for (int t : targets) {
    if (!blocked[t] && !seen[t]) {
      seen[t] = 1;
      queue.push_back(t);
    }
  }
  while (!queue.empty()) {
    int v = queue.front();
    queue.pop_front();
    for (int p : g.parents(v)) {
      if (!blocked[p] && !seen[p]) {
        seen[p] = 1;
        queue.push_back(p);
      }
    }
  }
  return seen;
}

std::vector<char> as_mask(const PathDiagram& g, const VertexSet& s) {
  std::vector<char> m(g.vertex_count(), 0);
  for (int v : s) m[v] = 1;
  return m;
}

// Shortest directed path from src to the nearest member of `targets` in the
// graph minus `blocked`; deterministic (BFS in canonical order).
DirectedPath path_to_nearest(const PathDiagram& g, int src,
                             const std::vector<char>& target_mask,
                             const std::vector<char>& blocked) {
  std::vector<int> prev(g.vertex_count(), -2);
  std::deque<int> queue{src};
  prev[src] = -1;
  int hit = target_mask[src] ? src : -1;
  while (hit < 0 && !queue.empty()) {
    int v = queue.front();
    queue.pop_front();
    for (int c : g.children(v)) {
      if (blocked[c] || prev[c] != -2) continue;
      prev[c] = v;
      if (target_mask[c]) {
        hit = c;
        break;
      }
      queue.push_back(c);
    }
  }
  DirectedPath path;
  for (int v = hit; v != -1; v = prev[v]) path.vertices.push_back(v);
  std::reverse(path.vertices.begin(), path.vertices.end());
  return path;
}

}  // namespace

TsepResult t_separates(const PathDiagram& g, const ChokePair& pair,
                       const VertexSet& a, const VertexSet& b) {
  check_ids(g, pair.ca);
  check_ids(g, pair.cb);
  check_ids(g, a);
  check_ids(g, b);
  auto ca_mask = as_mask(g, pair.ca);
  auto cb_mask = as_mask(g, pair.cb);
  // An unblocked trek exists iff some top reaches A avoiding ca and reaches B
  // avoiding cb.
  auto reach_a = reaches_avoiding(g, a, ca_mask);
  auto reach_b = reaches_avoiding(g, b, cb_mask);
  for (int top = 0; top < g.vertex_count(); ++top) {
    if (reach_a[top] && reach_b[top]) {
      Trek witness;
      witness.top = top;
      witness.p1 = path_to_nearest(g, top, as_mask(g, a), ca_mask);
      witness.p2 = path_to_nearest(g, top, as_mask(g, b), cb_mask);
      return {false, witness};
    }
  }
  return {true, std::nullopt};
}

VertexSet directed_region(const PathDiagram& g, const VertexSet& c,
                          const VertexSet& s) {
  check_ids(g, c);
  check_ids(g, s);
  std::vector<char> none(g.vertex_count(), 0);
  auto reaches_s = reaches_avoiding(g, s, none);
  // forward reachability from c (c itself included, no blocking)
  std::vector<char> from_c(g.vertex_count(), 0);
  std::deque<int> queue;
  for (int v : c) {
    if (!from_c[v]) {
      from_c[v] = 1;
      queue.push_back(v);
    }
  }
  while (!queue.empty()) {
    int v = queue.front();
    queue.pop_front();
    for (int ch : g.children(v)) {
      if (!from_c[ch]) {
        from_c[ch] = 1;
        queue.push_back(ch);
      }
    }
  }
  auto c_mask = as_mask(g, c);
  VertexSet out;
  for (int v = 0; v < g.vertex_count(); ++v) {
    if (!c_mask[v] && from_c[v] && reaches_s[v]) out.push_back(v);
  }
  return out;
}

std::vector<int> strongly_connected_components(const PathDiagram& g,
                                               int* component_count) {
  // Tarjan, iterative.
  int n = g.vertex_count();
  std::vector<int> comp(n, -1), low(n, 0), disc(n, -1), stack;
  std::vector<char> on_stack(n, 0);
  int timer = 0, ncomp = 0;
  struct Frame {
    int v;
    size_t child;
  };
  for (int s = 0; s < n; ++s) {
    if (disc[s] != -1) continue;
    std::vector<Frame> frames{{s, 0}};
    disc[s] = low[s] = timer++;
    stack.push_back(s);
    on_stack[s] = 1;
    while (!frames.empty()) {
      auto& f = frames.back();
      const auto& ch = g.children(f.v);
      if (f.child < ch.size()) {
        int w = ch[f.child++];
        if (disc[w] == -1) {
          disc[w] = low[w] = timer++;
          stack.push_back(w);
          on_stack[w] = 1;
          frames.push_back({w, 0});
        } else if (on_stack[w]) {
          low[f.v] = std::min(low[f.v], disc[w]);
        }
      } else {
        if (low[f.v] == disc[f.v]) {
          while (true) {
            int w = stack.back();
            stack.pop_back();
            on_stack[w] = 0;
            comp[w] = ncomp;
            if (w == f.v) break;
          }
          ++ncomp;
        }
        int v = f.v;
        frames.pop_back();
        if (!frames.empty())
          low[frames.back().v] = std::min(low[frames.back().v], low[v]);
      }
    }
  }
  if (component_count) *component_count = ncomp;
  return comp;
}

VertexSet vertices_on_cycles(const PathDiagram& g) {
  int ncomp = 0;
  auto comp = strongly_connected_components(g, &ncomp);
  std::vector<int> size(ncomp, 0);
  for (int c : comp) ++size[c];
  VertexSet out;
  for (int v = 0; v < g.vertex_count(); ++v) {
    if (size[comp[v]] >= 2) out.push_back(v);
  }
  return out;
}

}  // namespace trekrank
