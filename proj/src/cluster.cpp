#include "trekrank/cluster.hpp"

#include <algorithm>
#include <atomic>
#include <limits>
#include <mutex>
#include <numeric>
#include <cmath>
#include <set>
#include <thread>

#include "json.hpp"
#include "trekrank/rng.hpp"

namespace trekrank {

namespace {

std::vector<std::vector<int>> components_of(
    const std::vector<int>& alive, const std::vector<std::vector<char>>& co) {
  std::vector<std::vector<int>> out;
  std::set<int> seen;
  for (int s : alive) {
    if (seen.count(s)) continue;
    std::vector<int> comp, stack{s};
    seen.insert(s);
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      comp.push_back(u);
      for (int v : alive) {
        if (!seen.count(v) && co[u][v]) {
          seen.insert(v);
          stack.push_back(v);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    out.push_back(std::move(comp));
  }
  return out;
}

}  // namespace

ClusterResult find_pure_clusters_cov(const CovMatrix& cov, double alpha,
                                     double vote_threshold,
                                     const TetradPValue& tetrad_p) {
  const int m = static_cast<int>(cov.names.size());
  if (m < 4)
    throw std::invalid_argument("clustering needs at least four variables");
  TetradPValue pv = tetrad_p;
  if (!pv) {
    pv = [&cov](int i, int j, int k, int l) {
      return wishart_tetrad_test(cov, i, j, k, l).p_value;
    };
  }

  ClusterResult res;
  res.alpha = alpha;
  res.vote_threshold = vote_threshold;
  res.variables = cov.names;
  res.votes = Eigen::MatrixXd::Identity(m, m);

  std::vector<std::vector<char>> co(m, std::vector<char>(m, 0));
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      long kept = 0, total = 0;
      for (int k = 0; k < m; ++k) {
        if (k == i || k == j) continue;
        for (int l = k + 1; l < m; ++l) {
          if (l == i || l == j) continue;
          kept += pv(i, j, k, l) > alpha;
          ++total;
        }
      }
      double vote = total ? static_cast<double>(kept) / total : 0.0;
      res.votes(i, j) = res.votes(j, i) = vote;
      co[i][j] = co[j][i] = vote >= vote_threshold;
    }
  }

  std::vector<int> alive(m);
  for (int v = 0; v < m; ++v) alive[v] = v;
  // peel inconsistent members: in a component that is not a clique of the
  // co-cluster relation, drop the vertex with the fewest internal partners
  while (true) {
    int peel = -1;
    for (const auto& comp : components_of(alive, co)) {
      if (comp.size() < 2) continue;
      bool clique = true;
      for (size_t x = 0; x < comp.size() && clique; ++x)
        for (size_t y = x + 1; y < comp.size(); ++y)
          if (!co[comp[x]][comp[y]]) {
            clique = false;
            break;
          }
      if (clique) continue;
      int worst = comp.front(), worst_deg = m + 1;
      for (int v : comp) {
        int deg = 0;
        for (int w : comp)
          if (w != v && co[v][w]) ++deg;
        if (deg < worst_deg) {
          worst = v;
          worst_deg = deg;
        }
      }
      peel = worst;
      break;
    }
    if (peel < 0) break;
    alive.erase(std::find(alive.begin(), alive.end(), peel));
  }

  std::set<int> clustered;
  for (const auto& comp : components_of(alive, co)) {
    if (comp.size() < 3) continue;
    std::vector<std::string> names;
    for (int v : comp) {
      names.push_back(cov.names[v]);
      clustered.insert(v);
    }
    res.clusters.push_back(std::move(names));
  }
  for (int v = 0; v < m; ++v)
    if (!clustered.count(v)) res.discarded.push_back(cov.names[v]);
  return res;
}

ClusterResult find_pure_clusters(const Dataset& data, double alpha,
                                 double vote_threshold) {
  return find_pure_clusters_cov(sample_cov(data), alpha, vote_threshold);
}

namespace {

// Measured children of one latent with exactly that latent parent and no
// measured parents: the maximal pure subclusters of the generating model.
std::vector<std::set<std::string>> pure_sets(const SemModel& truth) {
  const PathDiagram& g = truth.graph;
  std::vector<std::set<std::string>> out;
  for (int lat : g.latents()) {
    std::set<std::string> members;
    for (int ch : g.children(lat)) {
      if (g.kind_of(ch) != VertexKind::kMeasured) continue;
      bool pure = true;
      for (int p : g.parents(ch))
        if (p != lat) pure = false;
      if (pure) members.insert(g.name_of(ch));
    }
    if (!members.empty()) out.push_back(std::move(members));
  }
  return out;
}

}  // namespace

double purity(const std::vector<std::string>& cluster, const SemModel& truth) {
  if (cluster.empty()) throw std::invalid_argument("empty cluster");
  for (const auto& name : cluster) truth.graph.index_of(name);
  size_t best = 0;
  for (const auto& ps : pure_sets(truth)) {
    size_t inside = 0;
    for (const auto& name : cluster) inside += ps.count(name);
    best = std::max(best, inside);
  }
  return static_cast<double>(best) / static_cast<double>(cluster.size());
}

std::optional<double> fraction_size(const std::vector<std::string>& cluster,
                                    const SemModel& truth) {
  if (cluster.empty()) throw std::invalid_argument("empty cluster");
  for (const auto& name : cluster) truth.graph.index_of(name);
  for (const auto& ps : pure_sets(truth)) {
    bool contains = true;
    for (const auto& name : cluster)
      if (!ps.count(name)) {
        contains = false;
        break;
      }
    if (contains)
      return static_cast<double>(cluster.size()) /
             static_cast<double>(ps.size());
  }
  return std::nullopt;
}

namespace {

struct RepOutcome {
  int clusters = 0;
  std::vector<double> purities;
  std::vector<double> fractions;
  std::vector<double> white_p;
  long redraws = 0;
};

RepOutcome run_replication(const ExperimentConfig& config, long n, double b,
                           double d, std::uint64_t rep_base) {
  FreeSemModel generator = study_model(b, d);
  std::vector<std::string> measured_names =
      generator.graph.names_of(generator.graph.measured());
  RepOutcome out;
  constexpr int kMaxAttempts = 500;
  for (int attempt = 0;; ++attempt) {
    if (attempt >= kMaxAttempts)
      throw std::runtime_error(
          "correlation screen rejected every draw; model family degenerate");
    SemModel model = draw_model(generator,
                                CounterRng::derive(rep_base, 2 * attempt));
    Dataset data =
        simulate(model, n, CounterRng::derive(rep_base, 2 * attempt + 1));
    Dataset measured = data.select(measured_names);
    CovMatrix corr = sample_corr(measured);
    if (!screen_correlations(corr).accepted) {
      ++out.redraws;
      continue;
    }
    ClusterResult clusters =
        find_pure_clusters(measured, config.alpha, config.vote_threshold);
    out.clusters = static_cast<int>(clusters.clusters.size());
    for (const auto& cl : clusters.clusters) {
      out.purities.push_back(purity(cl, model));
      if (auto f = fraction_size(cl, model)) out.fractions.push_back(*f);
    }
    const int mcount = static_cast<int>(measured.columns.size());
    for (int i = 0; i < mcount; ++i)
      for (int j = i + 1; j < mcount; ++j)
        out.white_p.push_back(
            white_pair_test(measured.values.col(i), measured.values.col(j))
                .p_value);
    return out;
  }
}

double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  size_t k = v.size() / 2;
  return v.size() % 2 ? v[k] : (v[k - 1] + v[k]) / 2.0;
}

}  // namespace

std::vector<ExperimentRow> run_experiment(const ExperimentConfig& config) {
  if (config.reps < 1 || config.sizes.empty() || config.b_values.empty() ||
      config.d_values.empty())
    throw std::invalid_argument("experiment config incomplete");
  struct Cell {
    long n;
    double b, d;
  };
  std::vector<Cell> cells;
  for (long n : config.sizes)
    for (double b : config.b_values)
      for (double d : config.d_values) cells.push_back({n, b, d});

  const int total = static_cast<int>(cells.size()) * config.reps;
  std::vector<RepOutcome> outcomes(total);
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::string error_text;
  std::mutex error_mutex;
  auto worker = [&]() {
    while (true) {
      int task = next.fetch_add(1);
      if (task >= total || failed.load()) return;
      int cell_idx = task / config.reps;
      int rep = task % config.reps;
      const Cell& cell = cells[cell_idx];
      std::uint64_t rep_base = CounterRng::derive(
          CounterRng::derive(config.seed, cell_idx), rep);
      try {
        outcomes[task] =
            run_replication(config, cell.n, cell.b, cell.d, rep_base);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        failed = true;
        error_text = e.what();
        return;
      }
    }
  };
  int jobs = std::max(1, config.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failed) throw std::runtime_error(error_text);

  std::vector<ExperimentRow> rows;
  for (size_t c = 0; c < cells.size(); ++c) {
    ExperimentRow row;
    row.n = cells[c].n;
    row.b = cells[c].b;
    row.d = cells[c].d;
    row.reps = config.reps;
    double cluster_sum = 0.0;
    std::vector<double> purities, fractions, whites;
    for (int rep = 0; rep < config.reps; ++rep) {
      const RepOutcome& o = outcomes[c * config.reps + rep];
      cluster_sum += o.clusters;
      purities.insert(purities.end(), o.purities.begin(), o.purities.end());
      fractions.insert(fractions.end(), o.fractions.begin(),
                       o.fractions.end());
      whites.insert(whites.end(), o.white_p.begin(), o.white_p.end());
      row.screen_redraws += o.redraws;
    }
    row.mean_clusters = cluster_sum / config.reps;
    row.mean_purity =
        purities.empty()
            ? std::numeric_limits<double>::quiet_NaN()
            : std::accumulate(purities.begin(), purities.end(), 0.0) /
                  purities.size();
    row.mean_fraction =
        fractions.empty()
            ? std::numeric_limits<double>::quiet_NaN()
            : std::accumulate(fractions.begin(), fractions.end(), 0.0) /
                  fractions.size();
    row.median_white = median_of(std::move(whites));
    row.screen_warning =
        row.screen_redraws >
        static_cast<long>(config.reps);  // rejection rate above one half
    rows.push_back(row);
  }
  return rows;
}

namespace {

std::string cubic_label(const ExperimentRow& r) {
  std::string b = detail::format_double(r.b);
  if (r.d == 0.0) return b;
  return b + ":" + detail::format_double(r.d);
}

}  // namespace

std::string experiment_rows_to_json(const std::vector<ExperimentRow>& rows) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json o;
    o["size"] = r.n;
    o["b"] = r.b;
    o["d"] = r.d;
    o["mean_clusters"] = r.mean_clusters;
    o["mean_purity"] = r.mean_purity;
    o["mean_fraction"] = r.mean_fraction;
    o["median_white"] = r.median_white;
    o["reps"] = r.reps;
    o["screen_redraws"] = r.screen_redraws;
    o["screen_warning"] = r.screen_warning;
    arr.push_back(std::move(o));
  }
  return arr.dump(2);
}

std::string experiment_rows_to_csv(const std::vector<ExperimentRow>& rows) {
  std::string out =
      "size,cubic,cluster_number,average_purity,average_fraction,median_white\n";
  for (const auto& r : rows) {
    out += std::to_string(r.n) + "," + cubic_label(r) + "," +
           detail::format_double(r.mean_clusters) + "," +
           detail::format_double(r.mean_purity) + "," +
           detail::format_double(r.mean_fraction) + "," +
           detail::format_double(r.median_white) + "\n";
  }
  return out;
}

std::string cluster_result_to_json(const ClusterResult& r) {
  nlohmann::ordered_json o;
  o["clusters"] = r.clusters;
  o["discarded"] = r.discarded;
  o["alpha"] = r.alpha;
  o["vote_threshold"] = r.vote_threshold;
  nlohmann::ordered_json votes = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < r.votes.rows(); ++i) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (Eigen::Index j = 0; j < r.votes.cols(); ++j)
      row.push_back(r.votes(i, j));
    votes.push_back(std::move(row));
  }
  o["variables"] = r.variables;
  o["votes"] = std::move(votes);
  return o.dump();
}

}  // namespace trekrank
