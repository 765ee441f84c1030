#ifndef TREKRANK_STATS_HPP
#define TREKRANK_STATS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trekrank/sem.hpp"

namespace trekrank {

/// Symmetric covariance or correlation matrix with variable names; n absent
/// for population matrices.
struct CovMatrix {
  std::vector<std::string> names;
  Eigen::MatrixXd m;
  std::optional<long> n;

  int index_of(const std::string& name) const;
  Eigen::MatrixXd block(const std::vector<int>& rows,
                        const std::vector<int>& cols) const;
};

struct TestResult {
  std::string method;
  std::vector<std::string> vars;
  double statistic = 0.0;
  double p_value = 1.0;
  std::optional<double> df;
  std::optional<double> variance;
};

/// Unbiased covariance (divisor n - 1). Requires n >= 2.
CovMatrix sample_cov(const Dataset& data);
/// Correlation derived from the covariance; constant columns are rejected.
CovMatrix sample_corr(const Dataset& data);

CovMatrix correlation_from_cov(const CovMatrix& cov);

/// Wishart (1928) test of a vanishing tetrad: statistic s_ik s_jl - s_il s_jk
/// for rows {i, j} and columns {k, l}, two-sided normal p-value with
/// Var = D_ij D_kl (n+1) / ((n-1)(n-2)) - det4 / (n-2).
TestResult wishart_tetrad_test(const CovMatrix& cov, int i, int j, int k,
                               int l);

enum class DetVariance { kDelta, kBootstrap };

/// Determinant test of rank(cov(rows, cols)) <= m - 1 for a square m x m
/// cross block. The delta-method variance uses the cofactor gradient
/// evaluated at the nearest rank-deficient matrix with normal-theory
/// covariances of sample covariances, Cov(s_ab, s_cd) = (s_ac s_bd +
/// s_ad s_bc)/n. The bootstrap variant resamples parametrically from
/// N(0, Sigma_hat) over the involved variables.
TestResult determinant_rank_test(const CovMatrix& cov,
                                 const std::vector<int>& rows,
                                 const std::vector<int>& cols,
                                 DetVariance variance = DetVariance::kDelta,
                                 int bootstrap_samples = 200,
                                 std::uint64_t seed = 0);

/// Count of singular values with sigma_i / sigma_1 >= tol; the zero matrix
/// has rank 0.
int numerical_rank(const Eigen::MatrixXd& m, double tol);

/// White's test of non-linearity for a pair: regress y on (1, x), then the
/// squared residuals on (1, x, x^2); n R^2 of the auxiliary regression is
/// chi-square with 2 df under linearity.
TestResult white_pair_test(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

struct ScreenResult {
  bool accepted = true;
  std::vector<std::pair<int, int>> offenders;  // index pairs into names
};

/// Reject when any off-diagonal |rho| < lo or > hi.
ScreenResult screen_correlations(const CovMatrix& corr, double lo = 0.09,
                                 double hi = 0.9);

std::string test_result_to_json(const TestResult& r);

double normal_two_sided_p(double z);

}  // namespace trekrank

#endif  // TREKRANK_STATS_HPP
