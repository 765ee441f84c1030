#ifndef TREKRANK_CLUSTER_HPP
#define TREKRANK_CLUSTER_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "trekrank/stats.hpp"

namespace trekrank {

struct ClusterResult {
  std::vector<std::vector<std::string>> clusters;  // disjoint, each size >= 3
  std::vector<std::string> discarded;
  double alpha = 0.0;
  double vote_threshold = 0.0;
  std::vector<std::string> variables;
  Eigen::MatrixXd votes;  // per-pair co-cluster vote fractions
};

/// p-value of the vanishing tetrad with rows {i, j} and columns {k, l}.
using TetradPValue = std::function<double(int, int, int, int)>;

/// Simplified tetrad-vote clustering. A pair (i, j) co-clusters when the
/// fraction of quadruples {i, j, k, l} (k, l over the other variables) whose
/// rows-{i,j} tetrad is retained (p > alpha) reaches vote_threshold. Clusters
/// are the connected components of that relation after discarding
/// inconsistent members: components whose internal pairs do not all
/// co-cluster are peeled one vertex at a time (fewest internal co-cluster
/// partners first) until every component is internally consistent; components
/// smaller than 3 are dropped.
ClusterResult find_pure_clusters_cov(const CovMatrix& cov, double alpha,
                                     double vote_threshold,
                                     const TetradPValue& tetrad_p = {});

ClusterResult find_pure_clusters(const Dataset& data, double alpha,
                                 double vote_threshold = 0.95);

/// Size of the largest pure subcluster contained in the output cluster,
/// divided by the cluster size. Pure subclusters under the generating model:
/// subsets of the measured children of one latent that have exactly that
/// latent parent and no measured parents.
double purity(const std::vector<std::string>& cluster, const SemModel& truth);

/// Cluster size divided by the size of the largest actual pure subcluster
/// containing it; empty when no pure subcluster contains the cluster.
std::optional<double> fraction_size(const std::vector<std::string>& cluster,
                                    const SemModel& truth);

struct ExperimentConfig {
  std::vector<long> sizes;
  std::vector<double> b_values{0.0};
  std::vector<double> d_values{0.0};
  int reps = 1;
  double alpha = 0.01;
  // operating point for the simulation-study sample sizes; the
  // find_pure_clusters default (0.95) is stricter than n ~ 1000 supports
  double vote_threshold = 0.85;
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct ExperimentRow {
  long n = 0;
  double b = 0.0, d = 0.0;
  double mean_clusters = 0.0;
  double mean_purity = 0.0;    // pooled over output clusters
  double mean_fraction = 0.0;  // pooled over clusters with a defined value
  double median_white = 1.0;   // pooled over pairs and replications
  int reps = 0;
  long screen_redraws = 0;
  bool screen_warning = false;  // rejection rate above one half
};

/// One row per (size, b, d) cell: repeatedly draw the study generator,
/// simulate, redraw on correlation-screen rejection (counting redraws),
/// cluster, and aggregate the metrics. Deterministic in the seed; jobs > 1
/// parallelizes replications without changing any output.
std::vector<ExperimentRow> run_experiment(const ExperimentConfig& config);

std::string experiment_rows_to_json(const std::vector<ExperimentRow>& rows);
std::string experiment_rows_to_csv(const std::vector<ExperimentRow>& rows);

std::string cluster_result_to_json(const ClusterResult& r);

}  // namespace trekrank

#endif  // TREKRANK_CLUSTER_HPP
