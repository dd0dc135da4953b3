#include "exo/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace exo::stats {

const char* method_name(TestResult::Method m) {
  return m == TestResult::Method::Exact ? "exact" : "approximate";
}

namespace {

// Regularized incomplete gamma, series and continued-fraction forms.
double gamma_p_series(double a, double x) {
  double sum = 1.0 / a;
  double term = sum;
  for (int n = 1; n < 500; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-15) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_cf(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1e300;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::abs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double chi2_survival(double x, int dof) {
  if (dof < 1) throw ValidationError("chi2_survival: dof must be >= 1");
  if (x <= 0.0) return 1.0;
  const double a = 0.5 * dof;
  const double xs = 0.5 * x;
  if (xs < a + 1.0) return 1.0 - gamma_p_series(a, xs);
  return gamma_q_cf(a, xs);
}

std::vector<double> mid_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

namespace {

double friedman_q(const std::vector<double>& rank_sums, int n, int k) {
  double q = 0.0;
  for (int j = 0; j < k; ++j) {
    const double rbar = rank_sums[j] / n;
    const double d = rbar - 0.5 * (k + 1);
    q += d * d;
  }
  return 12.0 * n / (k * (k + 1.0)) * q;
}

// Exact upper-tail probability of Q by dynamic programming over the
// within-subject rank arrangements (each subject's observed rank multiset
// permuted uniformly).
double friedman_exact_p(const std::vector<std::vector<double>>& row_ranks,
                        double q_observed, int k) {
  const int n = static_cast<int>(row_ranks.size());
  // States: rank-sum vectors scaled by 2 to keep mid-ranks integral.
  using Key = std::vector<int>;
  std::map<Key, double> states;
  states[Key(k, 0)] = 1.0;
  double arrangements_per_row = 1.0;
  for (int j = 2; j <= k; ++j) arrangements_per_row *= j;

  for (int row = 0; row < n; ++row) {
    std::vector<int> scaled(k);
    for (int j = 0; j < k; ++j)
      scaled[j] = static_cast<int>(std::lround(2.0 * row_ranks[row][j]));
    std::sort(scaled.begin(), scaled.end());
    std::map<Key, double> next;
    do {
      for (const auto& [key, count] : states) {
        Key nk = key;
        for (int j = 0; j < k; ++j) nk[j] += scaled[j];
        next[nk] += count;
      }
    } while (std::next_permutation(scaled.begin(), scaled.end()));
    // next_permutation over a multiset enumerates distinct arrangements; the
    // null assigns equal mass to all k! orderings, which collapses to the
    // distinct ones with multiplicity. Track the multiplicity factor.
    states = std::move(next);
  }

  // Each distinct arrangement of a row with ties stands for several of the
  // k! equally likely orderings; the multiplicity is constant per row, so it
  // cancels between numerator and denominator.
  double total = 0.0, tail = 0.0;
  for (const auto& [key, count] : states) {
    std::vector<double> sums(k);
    for (int j = 0; j < k; ++j) sums[j] = 0.5 * key[j];
    const double q = friedman_q(sums, n, k);
    total += count;
    if (q >= q_observed - 1e-9) tail += count;
  }
  return tail / total;
}

}  // namespace

TestResult friedman(const Eigen::MatrixXd& blocks) {
  const int n = static_cast<int>(blocks.rows());
  const int k = static_cast<int>(blocks.cols());
  if (n < 2 || k < 2)
    throw ValidationError("friedman: need >= 2 subjects and >= 2 treatments");
  if (!blocks.allFinite())
    throw ValidationError("friedman: missing cells");

  std::vector<std::vector<double>> row_ranks(n);
  std::vector<double> rank_sums(k, 0.0);
  for (int i = 0; i < n; ++i) {
    std::vector<double> row(k);
    for (int j = 0; j < k; ++j) row[j] = blocks(i, j);
    row_ranks[i] = mid_ranks(row);
    for (int j = 0; j < k; ++j) rank_sums[j] += row_ranks[i][j];
  }
  const double q = friedman_q(rank_sums, n, k);

  TestResult r;
  r.statistic = q;
  r.n = n;

  double k_fact = 1.0;
  for (int j = 2; j <= k; ++j) k_fact *= j;
  const bool exact_feasible = n <= 8 && std::pow(k_fact, n) <= 2e7;
  if (exact_feasible) {
    r.method = TestResult::Method::Exact;
    r.p_value = friedman_exact_p(row_ranks, q, k);
  } else {
    r.method = TestResult::Method::Approximate;
    r.p_value = chi2_survival(q, k - 1);
  }
  return r;
}

TestResult wilcoxon_signed_rank(std::span<const double> differences) {
  std::vector<double> d;
  for (double v : differences) {
    if (!std::isfinite(v))
      throw ValidationError("wilcoxon: non-finite difference");
    if (v != 0.0) d.push_back(v);
  }
  if (d.empty()) throw ExecutionError("degenerate sample");
  const int n = static_cast<int>(d.size());

  std::vector<double> abs_d(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) abs_d[i] = std::abs(d[i]);
  const std::vector<double> ranks = mid_ranks(abs_d);

  double w_pos = 0.0, rank_total = 0.0, rank_sq = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] > 0.0) w_pos += ranks[i];
    rank_total += ranks[i];
    rank_sq += ranks[i] * ranks[i];
  }

  TestResult r;
  r.statistic = w_pos;
  r.n = n;

  if (n <= 20) {
    r.method = TestResult::Method::Exact;
    const double w_hi = std::max(w_pos, rank_total - w_pos);
    const double w_lo = std::min(w_pos, rank_total - w_pos);
    const std::uint64_t total = 1ULL << n;
    std::uint64_t count = 0;
    for (std::uint64_t mask = 0; mask < total; ++mask) {
      double w = 0.0;
      for (int i = 0; i < n; ++i)
        if (mask & (1ULL << i)) w += ranks[static_cast<std::size_t>(i)];
      if (w >= w_hi - 1e-12 || w <= w_lo + 1e-12) ++count;
    }
    r.p_value = std::min(1.0, static_cast<double>(count) /
                                  static_cast<double>(total));
  } else {
    r.method = TestResult::Method::Approximate;
    const double mean = rank_total / 2.0;
    const double sd = std::sqrt(rank_sq / 4.0);
    double z = std::abs(w_pos - mean) - 0.5;  // continuity correction
    z = std::max(z, 0.0) / sd;
    r.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  }
  return r;
}

std::vector<double> bonferroni(std::span<const double> p_values,
                               int m_comparisons) {
  if (m_comparisons < static_cast<int>(p_values.size()))
    throw ValidationError(
        "bonferroni: m must be >= the number of p-values");
  std::vector<double> out;
  out.reserve(p_values.size());
  for (double p : p_values) {
    if (!(p >= 0.0 && p <= 1.0))
      throw ValidationError("bonferroni: p-values must lie in [0, 1]");
    out.push_back(std::min(1.0, m_comparisons * p));
  }
  return out;
}

}  // namespace exo::stats
