#include "trekrank/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "trekrank/cluster.hpp"
#include "trekrank/entailment.hpp"
#include "trekrank/graph.hpp"
#include "trekrank/rng.hpp"
#include "trekrank/sem.hpp"
#include "trekrank/stats.hpp"

namespace trekrank {

namespace {

using nlohmann::ordered_json;

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot write file: " + path);
  out << text;
}

// comma-separated vertex names; "" is the empty set
std::vector<std::string> split_names(const std::string& csv) {
  std::vector<std::string> out;
  if (csv.empty()) return out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

ordered_json trek_to_json(const PathDiagram& g, const Trek& t) {
  ordered_json o;
  o["top"] = g.name_of(t.top);
  o["p1"] = g.names_of(t.p1.vertices);
  o["p2"] = g.names_of(t.p2.vertices);
  return o;
}

ordered_json matrix_to_json(const Eigen::MatrixXd& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

struct VerifyArgs {
  std::string model_path, a, b, ca, cb;
  long mc_n = 200000;
  std::uint64_t seed = 0;
  double tol = 1e-2;
};

ordered_json run_verify(const VerifyArgs& va) {
  SemModel model = load_model_file(va.model_path);
  const PathDiagram& g = model.graph;
  VertexSet a = g.resolve(split_names(va.a));
  VertexSet b = g.resolve(split_names(va.b));
  ChokePair pair{g.resolve(split_names(va.ca)), g.resolve(split_names(va.cb))};

  ordered_json o;
  auto tsep = t_separates(g, pair, a, b);
  o["t_separates"] = tsep.separated;
  auto violations = validate_LA_below(model, pair, a, b);
  ordered_json vio = ordered_json::array();
  for (const auto& v : violations) vio.push_back(v.describe(g));
  o["la_below"] = violations.empty();
  o["la_violations"] = std::move(vio);

  bool all_pass = tsep.separated && violations.empty();
  if (all_pass) {
    int bound = static_cast<int>(pair.ca.size() + pair.cb.size());
    auto pop = population_cov_mc(model, va.mc_n, va.seed);
    std::vector<int> ai(a.begin(), a.end()), bi(b.begin(), b.end());
    Eigen::MatrixXd cross(a.size(), b.size());
    for (size_t i = 0; i < a.size(); ++i)
      for (size_t j = 0; j < b.size(); ++j)
        cross(i, j) = pop.cov(a[i], b[j]);
    int rank = numerical_rank(cross, va.tol);
    ordered_json thm;
    thm["bound"] = bound;
    thm["numerical_rank"] = rank;
    thm["tol"] = va.tol;
    thm["pass"] = rank <= bound;
    all_pass = all_pass && rank <= bound;
    o["rank_bound_check"] = std::move(thm);

    if (pair.cb.empty() && !pair.ca.empty()) {
      auto reduction = reduce_below_choke(model, pair.ca, a);
      auto check = reduction_cov_check(model, reduction, b, va.mc_n,
                                       CounterRng::derive(va.seed, 1));
      ordered_json lem;
      lem["lambda"] = matrix_to_json(reduction.lambda);
      lem["max_abs_z"] = check.max_abs_z;
      lem["pass"] = check.max_abs_z <= 3.0;
      all_pass = all_pass && check.max_abs_z <= 3.0;
      o["reduction_identity_check"] = std::move(lem);
    }
  }
  o["pass"] = all_pass;
  return o;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"trek separation, entailed rank constraints, and tetrad "
               "clustering over directed graphical models"};
  app.require_subcommand(1);

  // ---- tsep ----
  auto* tsep = app.add_subcommand("tsep", "decide t-separation");
  std::string g_path, a_csv, b_csv, ca_csv, cb_csv;
  tsep->add_option("--graph", g_path)->required();
  tsep->add_option("--a", a_csv)->required();
  tsep->add_option("--b", b_csv)->required();
  tsep->add_option("--ca", ca_csv);
  tsep->add_option("--cb", cb_csv);

  // ---- choke ----
  auto* choke = app.add_subcommand("choke", "minimal choke pair");
  std::string ch_graph, ch_a, ch_b;
  bool ch_brute = false;
  choke->add_option("--graph", ch_graph)->required();
  choke->add_option("--a", ch_a)->required();
  choke->add_option("--b", ch_b)->required();
  choke->add_flag("--brute", ch_brute, "use the exhaustive oracle");

  // ---- rank-bound ----
  auto* rank = app.add_subcommand("rank-bound", "entailed rank bound");
  std::string rb_graph, rb_a, rb_b;
  rank->add_option("--graph", rb_graph)->required();
  rank->add_option("--a", rb_a)->required();
  rank->add_option("--b", rb_b)->required();

  // ---- constraints ----
  auto* cons = app.add_subcommand("constraints", "enumerate rank constraints");
  std::string co_graph, co_vars;
  int co_p = 2, co_q = 2;
  bool co_large = false;
  cons->add_option("--graph", co_graph)->required();
  cons->add_option("--p", co_p)->required();
  cons->add_option("--q", co_q)->required();
  cons->add_option("--vars", co_vars, "variable pool (default: all measured)");
  cons->add_flag("--allow-large", co_large,
                 "permit side sizes beyond the tetrad/sextad cases");

  // ---- simulate ----
  auto* sim = app.add_subcommand("simulate", "simulate a fixed model");
  std::string sm_model, sm_out, sm_columns = "all";
  long sm_n = 0;
  std::uint64_t sm_seed = 0;
  sim->add_option("--model", sm_model)->required();
  sim->add_option("--n", sm_n)->required();
  sim->add_option("--seed", sm_seed)->required();
  sim->add_option("--out", sm_out)->required();
  sim->add_option("--columns", sm_columns)
      ->check(CLI::IsMember({"all", "measured"}));

  // ---- cov ----
  auto* cov = app.add_subcommand("cov", "population covariance");
  std::string cv_model;
  bool cv_analytic = false;
  long cv_mc_n = 0;
  std::uint64_t cv_seed = 0;
  cov->add_option("--model", cv_model)->required();
  cov->add_flag("--analytic", cv_analytic);
  cov->add_option("--mc-n", cv_mc_n);
  auto* cv_seed_opt = cov->add_option("--seed", cv_seed);

  // ---- test ----
  auto* test = app.add_subcommand("test", "rank / tetrad test on data");
  std::string ts_data, ts_rows, ts_cols, ts_method = "wishart";
  int ts_boot = 200;
  std::uint64_t ts_seed = 0;
  test->add_option("--data", ts_data)->required();
  test->add_option("--rows", ts_rows)->required();
  test->add_option("--cols", ts_cols)->required();
  test->add_option("--method", ts_method)
      ->check(CLI::IsMember({"wishart", "delta", "bootstrap"}));
  test->add_option("--boot-samples", ts_boot);
  auto* ts_seed_opt = test->add_option("--seed", ts_seed);

  // ---- white ----
  auto* white = app.add_subcommand("white", "white non-linearity test");
  std::string wh_data, wh_x, wh_y;
  bool wh_all = false;
  white->add_option("--data", wh_data)->required();
  white->add_option("--x", wh_x);
  white->add_option("--y", wh_y);
  white->add_flag("--all-pairs", wh_all);

  // ---- screen ----
  auto* screen = app.add_subcommand("screen", "correlation screen");
  std::string sc_data;
  double sc_lo = 0.09, sc_hi = 0.9;
  screen->add_option("--data", sc_data)->required();
  screen->add_option("--lo", sc_lo);
  screen->add_option("--hi", sc_hi);

  // ---- cluster ----
  auto* cluster = app.add_subcommand("cluster", "tetrad-vote clustering");
  std::string cl_data;
  double cl_alpha = 0.01, cl_vote = 0.95;
  cluster->add_option("--data", cl_data)->required();
  cluster->add_option("--alpha", cl_alpha)->required();
  cluster->add_option("--vote-threshold", cl_vote);

  // ---- experiment ----
  auto* exp = app.add_subcommand("experiment", "simulation-study driver");
  std::string ex_config, ex_out_json, ex_out_csv;
  std::uint64_t ex_seed = 0;
  int ex_jobs = 1;
  exp->add_option("--config", ex_config)->required();
  exp->add_option("--seed", ex_seed)->required();
  exp->add_option("--out-json", ex_out_json);
  exp->add_option("--out-csv", ex_out_csv);
  exp->add_option("--jobs", ex_jobs);

  // ---- verify ----
  auto* verify = app.add_subcommand(
      "verify", "numerical rank-bound and reduction-identity checks");
  VerifyArgs va;
  verify->add_option("--model", va.model_path)->required();
  verify->add_option("--a", va.a)->required();
  verify->add_option("--b", va.b)->required();
  verify->add_option("--ca", va.ca);
  verify->add_option("--cb", va.cb);
  verify->add_option("--mc-n", va.mc_n);
  verify->add_option("--seed", va.seed)->required();
  verify->add_option("--tol", va.tol);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return 2;
  }

  try {
    if (*tsep) {
      auto g = parse_path_diagram(slurp(g_path));
      ChokePair pair{g.resolve(split_names(ca_csv)),
                     g.resolve(split_names(cb_csv))};
      auto r = t_separates(g, pair, g.resolve(split_names(a_csv)),
                           g.resolve(split_names(b_csv)));
      ordered_json o;
      o["separated"] = r.separated;
      if (r.witness) o["witness"] = trek_to_json(g, *r.witness);
      out << o.dump() << "\n";
    } else if (*choke) {
      auto g = parse_path_diagram(slurp(ch_graph));
      VertexSet a = g.resolve(split_names(ch_a));
      VertexSet b = g.resolve(split_names(ch_b));
      MinChokeResult r =
          ch_brute ? brute_force_min_choke(g, a, b) : min_choke(g, a, b);
      ordered_json o;
      o["chokeA"] = g.names_of(r.pair.ca);
      o["chokeB"] = g.names_of(r.pair.cb);
      o["size"] = r.size;
      out << o.dump() << "\n";
    } else if (*rank) {
      auto g = parse_path_diagram(slurp(rb_graph));
      int bound = entailed_rank_bound(g, g.resolve(split_names(rb_a)),
                                      g.resolve(split_names(rb_b)));
      ordered_json o;
      o["bound"] = bound;
      out << o.dump() << "\n";
    } else if (*cons) {
      if (!co_large && (co_p > 3 || co_q > 3)) {
        err << "side sizes beyond 3 need --allow-large\n";
        return 2;
      }
      auto g = parse_path_diagram(slurp(co_graph));
      VertexSet pool = co_vars.empty() ? g.measured()
                                       : g.resolve(split_names(co_vars));
      auto list = enumerate_constraints(g, pool, co_p, co_q);
      out << constraints_to_json(g, list) << "\n";
    } else if (*sim) {
      auto model = load_model_file(sm_model);
      Dataset data = simulate(model, sm_n, sm_seed);
      if (sm_columns == "measured")
        data = data.select(model.graph.names_of(model.graph.measured()));
      spit(sm_out, dataset_to_csv(data));
      ordered_json o;
      o["rows"] = sm_n;
      o["columns"] = data.columns;
      o["out"] = sm_out;
      out << o.dump() << "\n";
    } else if (*cov) {
      auto model = load_model_file(cv_model);
      if (cv_analytic == (cv_mc_n > 0)) {
        err << "choose exactly one of --analytic or --mc-n\n";
        return 2;
      }
      if (cv_mc_n > 0 && cv_seed_opt->count() == 0) {
        err << "--mc-n requires an explicit --seed\n";
        return 2;
      }
      PopulationCov pop = cv_analytic
                              ? population_cov_analytic(model)
                              : population_cov_mc(model, cv_mc_n, cv_seed);
      ordered_json o;
      o["names"] = pop.names;
      o["cov"] = matrix_to_json(pop.cov);
      if (pop.n) o["n"] = *pop.n;
      if (pop.standard_error) o["se"] = matrix_to_json(*pop.standard_error);
      out << o.dump() << "\n";
    } else if (*test) {
      auto data = dataset_from_csv(slurp(ts_data));
      auto cov_m = sample_cov(data);
      auto rows = split_names(ts_rows), cols = split_names(ts_cols);
      std::vector<int> ri, ci;
      for (const auto& nm : rows) ri.push_back(cov_m.index_of(nm));
      for (const auto& nm : cols) ci.push_back(cov_m.index_of(nm));
      TestResult r;
      if (ts_method == "wishart") {
        if (ri.size() != 2 || ci.size() != 2) {
          err << "wishart method needs two rows and two cols\n";
          return 2;
        }
        r = wishart_tetrad_test(cov_m, ri[0], ri[1], ci[0], ci[1]);
      } else if (ts_method == "delta") {
        r = determinant_rank_test(cov_m, ri, ci, DetVariance::kDelta);
      } else {
        if (ts_seed_opt->count() == 0) {
          err << "bootstrap method requires an explicit --seed\n";
          return 2;
        }
        r = determinant_rank_test(cov_m, ri, ci, DetVariance::kBootstrap,
                                  ts_boot, ts_seed);
      }
      out << test_result_to_json(r) << "\n";
    } else if (*white) {
      auto data = dataset_from_csv(slurp(wh_data));
      if (wh_all) {
        for (size_t i = 0; i < data.columns.size(); ++i) {
          for (size_t j = i + 1; j < data.columns.size(); ++j) {
            auto r = white_pair_test(
                data.values.col(static_cast<Eigen::Index>(i)),
                data.values.col(static_cast<Eigen::Index>(j)));
            r.vars = {data.columns[i], data.columns[j]};
            out << test_result_to_json(r) << "\n";
          }
        }
      } else {
        if (wh_x.empty() || wh_y.empty()) {
          err << "provide --x and --y, or --all-pairs\n";
          return 2;
        }
        auto r = white_pair_test(data.values.col(data.column_index(wh_x)),
                                 data.values.col(data.column_index(wh_y)));
        r.vars = {wh_x, wh_y};
        out << test_result_to_json(r) << "\n";
      }
    } else if (*screen) {
      auto data = dataset_from_csv(slurp(sc_data));
      auto corr = sample_corr(data);
      auto r = screen_correlations(corr, sc_lo, sc_hi);
      ordered_json o;
      o["accepted"] = r.accepted;
      ordered_json offs = ordered_json::array();
      for (auto [i, j] : r.offenders)
        offs.push_back({corr.names[i], corr.names[j]});
      o["offenders"] = std::move(offs);
      out << o.dump() << "\n";
    } else if (*cluster) {
      auto data = dataset_from_csv(slurp(cl_data));
      auto r = find_pure_clusters(data, cl_alpha, cl_vote);
      out << cluster_result_to_json(r) << "\n";
    } else if (*exp) {
      auto doc = nlohmann::json::parse(slurp(ex_config));
      ExperimentConfig cfg;
      cfg.sizes = doc.at("sizes").get<std::vector<long>>();
      if (doc.contains("b_values"))
        cfg.b_values = doc["b_values"].get<std::vector<double>>();
      if (doc.contains("d_values"))
        cfg.d_values = doc["d_values"].get<std::vector<double>>();
      cfg.reps = doc.at("reps").get<int>();
      if (doc.contains("alpha")) cfg.alpha = doc["alpha"].get<double>();
      if (doc.contains("vote_threshold"))
        cfg.vote_threshold = doc["vote_threshold"].get<double>();
      cfg.seed = ex_seed;
      cfg.jobs = ex_jobs;
      auto rows = run_experiment(cfg);
      std::string json = experiment_rows_to_json(rows);
      if (!ex_out_json.empty()) spit(ex_out_json, json);
      if (!ex_out_csv.empty()) spit(ex_out_csv, experiment_rows_to_csv(rows));
      out << json << "\n";
    } else if (*verify) {
      auto o = run_verify(va);
      out << o.dump(2) << "\n";
    }
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace trekrank
