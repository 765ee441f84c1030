#ifndef TREKRANK_SEM_HPP
#define TREKRANK_SEM_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "trekrank/graph.hpp"

namespace trekrank {

/// Product of parent powers; every exponent >= 1.
struct Monomial {
  std::map<int, int> exps;  // parent id -> exponent

  int total_degree() const;
  bool operator==(const Monomial&) const = default;
};

struct PolyTerm {
  double coef = 0.0;
  Monomial monomial;
};

/// Structural equation: variable = sum of linear terms + sum of polynomial
/// terms + gaussian error. After validation, polynomial terms are genuinely
/// non-linear (degree-1 single-parent terms are folded into the linear part).
struct EquationSpec {
  int variable = -1;
  std::vector<std::pair<int, double>> linear;  // parent id -> coefficient
  std::vector<PolyTerm> poly;
  double error_sd = 1.0;

  /// Parents this equation is non-linear in (any appearance in a surviving
  /// polynomial term).
  std::vector<int> nonlinear_parents() const;
};

/// Fixed-parameter SEM: one equation per vertex of the path diagram.
struct SemModel {
  PathDiagram graph;
  std::vector<EquationSpec> equations;  // indexed by vertex id

  /// Normalizes equations and enforces the model invariants: mentioned
  /// parents match graph parents exactly, error sds positive, vertices on
  /// cycles have purely linear equations. Throws std::invalid_argument.
  void validate();
};

struct CoefRange {
  double lo = 0.0, hi = 0.0;  // lo == hi means fixed

  bool fixed() const { return lo == hi; }
};

struct FreeEquation {
  std::vector<std::pair<int, CoefRange>> linear;
  std::vector<std::pair<CoefRange, Monomial>> poly;
  double error_sd = 1.0;
};

/// SEM with ranged coefficients; instantiation draws each ranged coefficient
/// uniformly.
struct FreeSemModel {
  PathDiagram graph;
  std::vector<FreeEquation> equations;
};

/// Vertex or error-term tag appearing in a residual ancestry set; error tags
/// render as "eps_<vertex>".
struct ResidualTag {
  bool is_error = false;
  int vertex = -1;

  auto operator<=>(const ResidualTag&) const = default;
};

/// Linear reduction of a target set onto a choke set: targets = lambda *
/// choke + f(residuals), with residual ancestry per target.
struct ReductionResult {
  VertexSet targets, choke;
  Eigen::MatrixXd lambda;  // #targets x #choke
  std::vector<std::vector<ResidualTag>> residual_ancestry;  // sorted, per row
};

struct Dataset {
  std::vector<std::string> columns;
  Eigen::MatrixXd values;  // one row per sample
  std::uint64_t seed = 0;

  int column_index(const std::string& name) const;
  Dataset select(const std::vector<std::string>& names) const;
};

struct LaViolation {
  enum class Kind { kCycleMember, kNonlinearRowSide, kNonlinearColSide };
  Kind kind;
  int vertex;
  int parent;  // -1 for cycle violations
  std::string describe(const PathDiagram& g) const;
};

/// Checks that the model is linear-acyclic below the choke pair for (a, b):
/// no member of D(ca,a) u D(cb,b) lies on a cycle, and every member of a
/// side's region is linear in its parents within that region union its choke
/// set. Empty result means the structure holds.
std::vector<LaViolation> validate_LA_below(const SemModel& model,
                                           const ChokePair& pair,
                                           const VertexSet& a,
                                           const VertexSet& b);

/// Expresses each target as a linear combination of choke vertices plus a
/// function of residuals by repeated substitution, expanding the remaining
/// region member closest to the target first (children before parents, so
/// each vertex is expanded exactly once). Requires validate_LA_below to pass
/// on the target side.
ReductionResult reduce_below_choke(const SemModel& model, const VertexSet& c,
                                   const VertexSet& a);

/// Draws all error terms independently per row, solves acyclic vertices in
/// topological order of the condensation and each purely-linear cyclic block
/// by its exact equilibrium. Deterministic in (model, n, seed). Columns cover
/// every vertex in canonical order.
Dataset simulate(const SemModel& model, long n, std::uint64_t seed);

struct PopulationCov {
  std::vector<std::string> names;
  Eigen::MatrixXd cov;
  std::optional<long> n;                      // Monte-Carlo sample count
  std::optional<Eigen::MatrixXd> standard_error;  // per entry, Monte-Carlo
};

/// Sigma = (I - B)^-1 Sigma_eps (I - B)^-T; the model must be fully linear.
PopulationCov population_cov_analytic(const SemModel& model);

/// Sample covariance of a fresh simulation, streamed, with per-entry
/// Monte-Carlo standard errors from empirical fourth moments.
PopulationCov population_cov_mc(const SemModel& model, long n,
                                std::uint64_t seed);

/// Instantiates ranged coefficients uniformly; fixed coefficients do not
/// consume randomness, so an all-fixed model is seed-independent.
SemModel draw_model(const FreeSemModel& free_model, std::uint64_t seed);

/// The simulation-study generator: latents L1..L5 with L2..L5 children of
/// L1 (linear weight U[0.25,1], cubic weight b*U[0.5,2]), five measured
/// children per latent (linear weight (1-d)*U[0.5,2], cubic weight
/// d*U[0.5,2]), impurity edges X1->X6, X15->X19, L3->X10, L4->X21 with
/// linear U[0.5,2] weights, all errors standard gaussian. Zero-weight cubic
/// terms are omitted, so b = d = 0 gives a fully linear model.
FreeSemModel study_model(double b, double d);

/// Monte-Carlo check of the reduction identity cov(a, b) = lambda *
/// cov(c, b): per entry, the sample covariance of the residual
/// a_i - sum_V lambda_iV * V against b_j, standardized by its empirical
/// standard error. Entries within a few standard errors of zero support the
/// identity.
struct ReductionCovCheck {
  Eigen::MatrixXd residual_cov;  // #a x #b
  Eigen::MatrixXd z;             // residual_cov / standard error
  double max_abs_z = 0.0;
};

ReductionCovCheck reduction_cov_check(const SemModel& model,
                                      const ReductionResult& reduction,
                                      const VertexSet& b, long n,
                                      std::uint64_t seed);

SemModel load_model(const std::string& json_text,
                    const std::string& base_dir = "");
SemModel load_model_file(const std::string& path);
std::string save_model(const SemModel& model);

std::string dataset_to_csv(const Dataset& data);
Dataset dataset_from_csv(const std::string& text);

std::string residual_tag_name(const PathDiagram& g, const ResidualTag& tag);

}  // namespace trekrank

#endif  // TREKRANK_SEM_HPP
