#ifndef TREKRANK_GRAPH_HPP
#define TREKRANK_GRAPH_HPP

#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace trekrank {

enum class VertexKind { kLatent, kMeasured };

/// Sorted vertex ids in canonical (declaration) order.
using VertexSet = std::vector<int>;

/// Sequence v0..vk where each consecutive pair is an edge; k = 0 allowed.
struct DirectedPath {
  std::vector<int> vertices;

  bool operator==(const DirectedPath&) const = default;
  auto operator<=>(const DirectedPath&) const = default;
};

/// Ordered pair of directed paths sharing a source (the top); p1 ends on the
/// row side, p2 on the column side.
struct Trek {
  DirectedPath p1, p2;
  int top = -1;

  /// Simple iff the only common vertex of p1 and p2 is the top.
  bool is_simple() const;

  bool operator==(const Trek&) const = default;
  auto operator<=>(const Trek&) const = default;
};

struct ChokePair {
  VertexSet ca, cb;

  bool operator==(const ChokePair&) const = default;
};

struct ParseError : std::runtime_error {
  int line;
  ParseError(int line_no, const std::string& what)
      : std::runtime_error("line " + std::to_string(line_no) + ": " + what),
        line(line_no) {}
};

/// Directed graph over typed vertices, possibly cyclic. Vertices keep their
/// declaration order, which is the canonical ordering used for every
/// set-valued output in the library. No self-loops.
class PathDiagram {
 public:
  struct Edge {
    int tail, head;
    std::optional<double> coef;
  };

  int add_vertex(const std::string& name, VertexKind kind);
  void add_edge(int tail, int head, std::optional<double> coef = {});
  void add_edge(const std::string& tail, const std::string& head,
                std::optional<double> coef = {});

  int vertex_count() const { return static_cast<int>(names_.size()); }
  const std::string& name_of(int v) const { return names_.at(v); }
  VertexKind kind_of(int v) const { return kinds_.at(v); }
  bool has_vertex(const std::string& name) const {
    return index_.count(name) > 0;
  }
  /// Throws std::invalid_argument for an unknown vertex.
  int index_of(const std::string& name) const;

  const std::vector<int>& parents(int v) const { return parents_.at(v); }
  const std::vector<int>& children(int v) const { return children_.at(v); }
  const std::vector<Edge>& edges() const { return edges_; }
  bool has_edge(int tail, int head) const;
  std::optional<double> edge_coef(int tail, int head) const;

  VertexSet latents() const;
  VertexSet measured() const;
  VertexSet all_vertices() const;
  /// Resolve names to a sorted id set; throws on unknown names.
  VertexSet resolve(const std::vector<std::string>& names) const;
  std::vector<std::string> names_of(const VertexSet& s) const;

 private:
  std::vector<std::string> names_;
  std::vector<VertexKind> kinds_;
  std::unordered_map<std::string, int> index_;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> parents_, children_;
};

/// Parse the line-oriented graph format:
///   # comment
///   latent <name>...
///   measured <name>...
///   edge <tail> -> <head> [<coef>]
/// Errors carry 1-based line numbers.
PathDiagram parse_path_diagram(const std::string& text);

/// Emission preserves declaration order and round-trips byte-exactly:
/// emit(parse(emit(g))) == emit(g).
std::string emit_path_diagram(const PathDiagram& g);

/// All simple treks from i to j, canonically ordered. i may equal j, in which
/// case the single-vertex trek is the only simple trek.
std::vector<Trek> simple_treks(const PathDiagram& g, int i, int j);

struct TsepResult {
  bool separated = false;
  std::optional<Trek> witness;  // one unblocked trek when not separated
};

/// (ca; cb) t-separates a from b iff every trek from a to b has p1 meeting ca
/// or p2 meeting cb. Complete for cyclic graphs: it suffices to quantify over
/// treks whose two paths are individually simple, since deleting a cycle
/// detour from a path preserves unblockedness.
TsepResult t_separates(const PathDiagram& g, const ChokePair& pair,
                       const VertexSet& a, const VertexSet& b);

/// Vertices on directed paths from c to s, excluding members of c; zero-length
/// path segments are allowed at either end. Includes vertices reachable only
/// through other members of c.
VertexSet directed_region(const PathDiagram& g, const VertexSet& c,
                          const VertexSet& s);

/// Vertices with a directed path of length >= 1 back to themselves.
VertexSet vertices_on_cycles(const PathDiagram& g);

/// Component id per vertex; components are numbered in reverse topological
/// order of the condensation (a vertex's component never precedes its
/// descendants').
std::vector<int> strongly_connected_components(const PathDiagram& g,
                                               int* component_count);

namespace detail {
bool valid_vertex_name(const std::string& name);
std::string format_double(double x);  // %.17g, round-trip stable
}  // namespace detail

}  // namespace trekrank

#endif  // TREKRANK_GRAPH_HPP
