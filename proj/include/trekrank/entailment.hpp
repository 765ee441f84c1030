#ifndef TREKRANK_ENTAILMENT_HPP
#define TREKRANK_ENTAILMENT_HPP

#include <memory>
#include <string>
#include <vector>

#include "trekrank/graph.hpp"

namespace trekrank {

struct MinChokeResult {
  ChokePair pair;
  int size = 0;
};

/// Entailed upper bound on rank(cov(rows, cols)) with a t-separating witness
/// pair achieving it.
struct RankConstraint {
  VertexSet rows, cols;
  int bound = 0;
  ChokePair witness;
};

/// Min vertex cut on the doubled trek network. Every vertex v appears as an
/// upward-leg node (v,L) and a downward-leg node (v,R) with unit vertex
/// capacity; arcs run along reversed edges on the L side, from (v,L) to (v,R)
/// at every v (the trek's top switch), and along edges on the R side; the
/// source feeds (a,L) for a in A and (b,R) drains to the sink for b in B.
/// Cutting (v,L) puts v in ca, cutting (v,R) puts v in cb. Reusable across
/// queries on one graph; all outputs deterministic.
class MinChokeSolver {
 public:
  explicit MinChokeSolver(const PathDiagram& g);
  ~MinChokeSolver();
  MinChokeSolver(MinChokeSolver&&) noexcept;

  /// Minimal #ca + #cb over t-separating pairs. a, b nonempty and disjoint.
  int bound(const VertexSet& a, const VertexSet& b);

  /// Bound plus a witness from residual reachability (valid and
  /// deterministic, not tie-broken).
  MinChokeResult solve(const VertexSet& a, const VertexSet& b);

  /// Fully tie-broken optimum: minimal total size, then minimal #ca, then
  /// lexicographically least ca, then cb, under canonical vertex order.
  /// Tie-breaking is applied by re-running constrained feasibility flows at
  /// the optimal size.
  MinChokeResult solve_canonical(const VertexSet& a, const VertexSet& b);

 private:
  struct Impl;
  const PathDiagram& g_;
  std::unique_ptr<Impl> impl_;
};

/// Minimal choke pair for disjoint nonempty a, b, with solve_canonical's
/// tie-breaking. Size is always <= min(#a, #b).
MinChokeResult min_choke(const PathDiagram& g, const VertexSet& a,
                         const VertexSet& b);

/// Exhaustive oracle: scans subset pairs in increasing total size, then
/// increasing #ca, then lexicographic sets, calling t_separates. Rejects
/// graphs above vertex_cap.
MinChokeResult brute_force_min_choke(const PathDiagram& g, const VertexSet& a,
                                     const VertexSet& b, int vertex_cap = 12);

int entailed_rank_bound(const PathDiagram& g, const VertexSet& a,
                        const VertexSet& b);

/// Every disjoint (A, B) with #A = p, #B = q over `measured` whose entailed
/// bound is below min(p, q); unordered sides deduplicated when p == q;
/// canonically ordered output.
std::vector<RankConstraint> enumerate_constraints(const PathDiagram& g,
                                                  const VertexSet& measured,
                                                  int p, int q);

/// JSON array of {rows, cols, bound, chokeA, chokeB}, canonically sorted.
std::string constraints_to_json(const PathDiagram& g,
                                const std::vector<RankConstraint>& list);

}  // namespace trekrank

#endif  // TREKRANK_ENTAILMENT_HPP
