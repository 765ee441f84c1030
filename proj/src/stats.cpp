#include "trekrank/stats.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "trekrank/rng.hpp"

namespace trekrank {

namespace {

constexpr double kTinyVariance = 1e-300;

// Shared by the tetrad and the m = 2 determinant statistic so the two are
// bitwise identical regardless of per-call-site contraction.
[[gnu::noinline]] double det2x2(double a00, double a01, double a10,
                                double a11) {
  return a00 * a11 - a01 * a10;
}

Eigen::MatrixXd cofactor_matrix(const Eigen::MatrixXd& m) {
  const int k = static_cast<int>(m.rows());
  Eigen::MatrixXd c(k, k);
  if (k == 1) {
    c(0, 0) = 1.0;
    return c;
  }
  Eigen::MatrixXd minor(k - 1, k - 1);
  for (int r = 0; r < k; ++r) {
    for (int col = 0; col < k; ++col) {
      int mr = 0;
      for (int i = 0; i < k; ++i) {
        if (i == r) continue;
        int mc = 0;
        for (int j = 0; j < k; ++j) {
          if (j == col) continue;
          minor(mr, mc++) = m(i, j);
        }
        ++mr;
      }
      c(r, col) = (((r + col) & 1) ? -1.0 : 1.0) * minor.determinant();
    }
  }
  return c;
}

}  // namespace

double normal_two_sided_p(double z) {
  return std::erfc(std::abs(z) / std::sqrt(2.0));
}

int CovMatrix::index_of(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  throw std::invalid_argument("unknown variable: " + name);
}

Eigen::MatrixXd CovMatrix::block(const std::vector<int>& rows,
                                 const std::vector<int>& cols) const {
  Eigen::MatrixXd out(rows.size(), cols.size());
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t c = 0; c < cols.size(); ++c)
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          m(rows[r], cols[c]);
  return out;
}

CovMatrix sample_cov(const Dataset& data) {
  const long n = data.values.rows();
  if (n < 2) throw std::invalid_argument("need at least two samples");
  Eigen::RowVectorXd mean = data.values.colwise().mean();
  Eigen::MatrixXd centered = data.values.rowwise() - mean;
  CovMatrix out;
  out.names = data.columns;
  out.m = centered.transpose() * centered / static_cast<double>(n - 1);
  out.n = n;
  return out;
}

CovMatrix correlation_from_cov(const CovMatrix& cov) {
  CovMatrix out = cov;
  const Eigen::Index k = cov.m.rows();
  Eigen::VectorXd sd = cov.m.diagonal().array().sqrt();
  for (Eigen::Index i = 0; i < k; ++i) {
    if (!(sd[i] > 0.0))
      throw std::invalid_argument("degenerate (constant) column: " +
                                  cov.names[i]);
  }
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j)
      out.m(i, j) = cov.m(i, j) / (sd[i] * sd[j]);
  return out;
}

CovMatrix sample_corr(const Dataset& data) {
  return correlation_from_cov(sample_cov(data));
}

TestResult wishart_tetrad_test(const CovMatrix& cov, int i, int j, int k,
                               int l) {
  if (!cov.n) throw std::invalid_argument("tetrad test requires a sample size");
  const long n = *cov.n;
  if (n <= 4) throw std::invalid_argument("tetrad test requires n > 4");
  std::vector<int> ids{i, j, k, l};
  for (int v : ids)
    if (v < 0 || v >= cov.m.rows())
      throw std::invalid_argument("variable index out of range");
  std::vector<int> uniq = ids;
  std::sort(uniq.begin(), uniq.end());
  if (std::unique(uniq.begin(), uniq.end()) != uniq.end())
    throw std::invalid_argument("tetrad variables must be distinct");

  const Eigen::MatrixXd& s = cov.m;
  double tau = det2x2(s(i, k), s(i, l), s(j, k), s(j, l));
  double dij = s(i, i) * s(j, j) - s(i, j) * s(i, j);
  double dkl = s(k, k) * s(l, l) - s(k, l) * s(k, l);
  if (!(dij > 0.0) || !(dkl > 0.0))
    throw std::invalid_argument("singular 2x2 marginal in tetrad test");
  Eigen::MatrixXd quad = cov.block(ids, ids);
  double det4 = quad.determinant();
  double nn = static_cast<double>(n);
  double var = dij * dkl * (nn + 1.0) / ((nn - 1.0) * (nn - 2.0)) -
               det4 / (nn - 2.0);
  if (!(var > 0.0)) var = kTinyVariance;

  TestResult r;
  r.method = "wishart_tetrad";
  r.vars = {cov.names[i], cov.names[j], cov.names[k], cov.names[l]};
  r.statistic = tau;
  r.variance = var;
  r.p_value = tau == 0.0 ? 1.0 : normal_two_sided_p(tau / std::sqrt(var));
  return r;
}

TestResult determinant_rank_test(const CovMatrix& cov,
                                 const std::vector<int>& rows,
                                 const std::vector<int>& cols,
                                 DetVariance variance, int bootstrap_samples,
                                 std::uint64_t seed) {
  if (!cov.n)
    throw std::invalid_argument("determinant test requires a sample size");
  const long n = *cov.n;
  const int m = static_cast<int>(rows.size());
  if (m == 0 || rows.size() != cols.size())
    throw std::invalid_argument("determinant test needs a square cross block");
  if (n <= static_cast<long>(m) * m)
    throw std::invalid_argument("determinant test requires n > m^2");
  for (int v : rows)
    if (v < 0 || v >= cov.m.rows())
      throw std::invalid_argument("variable index out of range");
  for (int v : cols)
    if (v < 0 || v >= cov.m.rows())
      throw std::invalid_argument("variable index out of range");
  {
    auto check_distinct = [](std::vector<int> side) {
      std::sort(side.begin(), side.end());
      return std::unique(side.begin(), side.end()) == side.end();
    };
    if (!check_distinct(rows) || !check_distinct(cols))
      throw std::invalid_argument("variables within a side must be distinct");
  }

  Eigen::MatrixXd block = cov.block(rows, cols);
  double det = m == 2 ? det2x2(block(0, 0), block(0, 1), block(1, 0),
                               block(1, 1))
                      : block.determinant();
  double var = 0.0;

  if (variance == DetVariance::kDelta) {
    // gradient at the nearest rank-(m-1) matrix: the null-constrained point
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(
        block, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::VectorXd sv = svd.singularValues();
    sv[m - 1] = 0.0;
    Eigen::MatrixXd projected =
        svd.matrixU() * sv.asDiagonal() * svd.matrixV().transpose();
    Eigen::MatrixXd grad = cofactor_matrix(projected);
    const Eigen::MatrixXd& s = cov.m;
    double nn = static_cast<double>(n);
    for (int r1 = 0; r1 < m; ++r1)
      for (int c1 = 0; c1 < m; ++c1)
        for (int r2 = 0; r2 < m; ++r2)
          for (int c2 = 0; c2 < m; ++c2) {
            int a = rows[r1], b = cols[c1], aa = rows[r2], bb = cols[c2];
            double cov_s =
                (s(a, aa) * s(b, bb) + s(a, bb) * s(b, aa)) / nn;
            var += grad(r1, c1) * grad(r2, c2) * cov_s;
          }
  } else {
    // parametric bootstrap from N(0, Sigma_hat) over the involved variables
    std::vector<int> involved = rows;
    involved.insert(involved.end(), cols.begin(), cols.end());
    std::sort(involved.begin(), involved.end());
    involved.erase(std::unique(involved.begin(), involved.end()),
                   involved.end());
    std::vector<int> rpos(m), cpos(m);
    for (int t = 0; t < m; ++t) {
      rpos[t] = static_cast<int>(std::lower_bound(involved.begin(),
                                                  involved.end(), rows[t]) -
                                 involved.begin());
      cpos[t] = static_cast<int>(std::lower_bound(involved.begin(),
                                                  involved.end(), cols[t]) -
                                 involved.begin());
    }
    Eigen::MatrixXd sigma = cov.block(involved, involved);
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument("covariance not positive definite");
    Eigen::MatrixXd chol = llt.matrixL();
    const int k = static_cast<int>(involved.size());
    CounterRng rng(seed);
    double sum = 0.0, sumsq = 0.0;
    Eigen::VectorXd z(k);
    Eigen::MatrixXd acc(k, k);
    Eigen::VectorXd mean(k);
    for (int rep = 0; rep < bootstrap_samples; ++rep) {
      acc.setZero();
      mean.setZero();
      for (long obs = 0; obs < n; ++obs) {
        for (int t = 0; t < k; ++t) z[t] = rng.normal();
        Eigen::VectorXd x = chol * z;
        acc.noalias() += x * x.transpose();
        mean += x;
      }
      mean /= static_cast<double>(n);
      Eigen::MatrixXd sboot =
          (acc - static_cast<double>(n) * mean * mean.transpose()) /
          static_cast<double>(n - 1);
      Eigen::MatrixXd bblock(m, m);
      for (int r = 0; r < m; ++r)
        for (int c = 0; c < m; ++c) bblock(r, c) = sboot(rpos[r], cpos[c]);
      double dd = bblock.determinant();
      sum += dd;
      sumsq += dd * dd;
    }
    double mean_det = sum / bootstrap_samples;
    var = (sumsq - bootstrap_samples * mean_det * mean_det) /
          (bootstrap_samples - 1);
  }
  if (!(var > 0.0)) var = kTinyVariance;

  TestResult r;
  r.method = variance == DetVariance::kDelta ? "determinant_delta"
                                             : "determinant_bootstrap";
  for (int v : rows) r.vars.push_back(cov.names[v]);
  for (int v : cols) r.vars.push_back(cov.names[v]);
  r.statistic = det;
  r.variance = var;
  r.p_value = det == 0.0 ? 1.0 : normal_two_sided_p(det / std::sqrt(var));
  return r;
}

int numerical_rank(const Eigen::MatrixXd& m, double tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv[0] <= 0.0) return 0;
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] / sv[0] >= tol) ++rank;
  return rank;
}

TestResult white_pair_test(const Eigen::VectorXd& x,
                           const Eigen::VectorXd& y) {
  const long n = x.size();
  if (y.size() != n) throw std::invalid_argument("length mismatch");
  if (n <= 10) throw std::invalid_argument("white test requires n > 10");
  double xm = x.mean();
  double sxx = (x.array() - xm).square().sum();
  if (!(sxx > 0.0)) throw std::invalid_argument("degenerate regressor");

  // y on (1, x)
  double ym = y.mean();
  double sxy = ((x.array() - xm) * (y.array() - ym)).sum();
  double slope = sxy / sxx;
  Eigen::VectorXd resid = y.array() - (ym + slope * (x.array() - xm));
  // a numerically perfect linear fit leaves only rounding dust; the
  // auxiliary regression would fit that dust, not heteroskedasticity
  double y_scale = std::sqrt((y.array() - ym).square().sum() /
                             static_cast<double>(n));
  double resid_scale = std::sqrt(resid.squaredNorm() / static_cast<double>(n));
  if (resid_scale <= 1e-12 * std::max(1.0, y_scale)) {
    TestResult exact;
    exact.method = "white_pair";
    exact.statistic = 0.0;
    exact.df = 2.0;
    exact.p_value = 1.0;
    return exact;
  }
  Eigen::VectorXd r2v = resid.array().square();

  // r^2 on (1, x, x^2) via least squares
  Eigen::MatrixXd design(n, 3);
  design.col(0).setOnes();
  design.col(1) = x;
  design.col(2) = x.array().square();
  Eigen::VectorXd beta =
      design.colPivHouseholderQr().solve(r2v);
  Eigen::VectorXd fitted = design * beta;
  double sst = (r2v.array() - r2v.mean()).square().sum();
  double ssr = (r2v - fitted).squaredNorm();
  double r_squared = sst > 0.0 ? 1.0 - ssr / sst : 0.0;
  if (r_squared < 0.0) r_squared = 0.0;

  TestResult r;
  r.method = "white_pair";
  r.statistic = static_cast<double>(n) * r_squared;
  r.df = 2.0;
  // chi-square survival with 2 df
  r.p_value = std::exp(-r.statistic / 2.0);
  return r;
}

ScreenResult screen_correlations(const CovMatrix& corr, double lo, double hi) {
  ScreenResult out;
  const Eigen::Index k = corr.m.rows();
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = i + 1; j < k; ++j) {
      double r = std::abs(corr.m(i, j));
      if (r < lo || r > hi)
        out.offenders.push_back(
            {static_cast<int>(i), static_cast<int>(j)});
    }
  }
  out.accepted = out.offenders.empty();
  return out;
}

std::string test_result_to_json(const TestResult& r) {
  nlohmann::ordered_json o;
  o["method"] = r.method;
  o["vars"] = r.vars;
  o["statistic"] = r.statistic;
  o["p"] = r.p_value;
  if (r.df) o["df"] = *r.df;
  if (r.variance) o["variance"] = *r.variance;
  return o.dump();
}

}  // namespace trekrank
