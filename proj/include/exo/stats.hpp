#ifndef EXO_STATS_HPP_
#define EXO_STATS_HPP_

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "exo/common.hpp"

namespace exo::stats {

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  enum class Method { Exact, Approximate } method = Method::Exact;
  int n = 0;
  bool adjusted = false;
};

const char* method_name(TestResult::Method m);

/// Survival function of the chi-squared distribution (regularized upper
/// incomplete gamma).
double chi2_survival(double x, int dof);

/// Friedman test on an n-subjects x k-treatments matrix. Within-subject
/// mid-ranks; Q = 12 n / (k (k+1)) * sum_j (Rbar_j - (k+1)/2)^2. Exact
/// permutation enumeration (all k!^n within-subject rank arrangements) when
/// feasible and n <= 8, chi-squared with k-1 dof otherwise. Missing (NaN)
/// cells are an error.
TestResult friedman(const Eigen::MatrixXd& blocks);

/// Two-sided Wilcoxon signed-rank test on paired differences. Zeros dropped,
/// mid-ranks for ties; W = sum of positive ranks. Exact 2^n sign enumeration
/// for n <= 20, normal approximation with tie correction and continuity
/// correction above. All-zero input is an error ("degenerate sample").
TestResult wilcoxon_signed_rank(std::span<const double> differences);

/// Bonferroni adjustment: p_adj = min(1, m * p). Requires m >= p count.
std::vector<double> bonferroni(std::span<const double> p_values,
                               int m_comparisons);

/// Mid-ranks of the values (average rank across ties).
std::vector<double> mid_ranks(std::span<const double> values);

}  // namespace exo::stats

#endif  // EXO_STATS_HPP_
