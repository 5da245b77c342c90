#include "nrp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace nrp::stats {

std::string alternative_name(Alternative a) {
  switch (a) {
    case Alternative::Less: return "less";
    case Alternative::Greater: return "greater";
    case Alternative::TwoSided: return "two_sided";
  }
  return "?";
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

std::vector<double> midranks(const std::vector<double>& values) {
  size_t n = values.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t i, size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

namespace {

bool has_ties(std::vector<double> combined) {
  std::sort(combined.begin(), combined.end());
  return std::adjacent_find(combined.begin(), combined.end()) != combined.end();
}

// Sum of t^3 - t over tie groups in the combined sample.
double tie_term(std::vector<double> combined) {
  std::sort(combined.begin(), combined.end());
  double total = 0.0;
  size_t i = 0;
  while (i < combined.size()) {
    size_t j = i;
    while (j + 1 < combined.size() && combined[j + 1] == combined[i]) ++j;
    double t = static_cast<double>(j - i + 1);
    total += t * t * t - t;
    i = j + 1;
  }
  return total;
}

double two_sided_from_tails(double p_less, double p_greater) {
  return std::min(1.0, 2.0 * std::min(p_less, p_greater));
}

// Counts of subsets of {1..n} of size k by rank sum.
// dist[s] = #subsets of size n1 with sum s.
std::vector<double> rank_sum_counts(size_t n, size_t n1) {
  size_t max_sum = n * (n + 1) / 2;
  // dp[k][s]
  std::vector<std::vector<double>> dp(n1 + 1, std::vector<double>(max_sum + 1, 0.0));
  dp[0][0] = 1.0;
  for (size_t r = 1; r <= n; ++r) {
    for (size_t k = std::min(n1, r); k >= 1; --k) {
      for (size_t s = max_sum; s >= r; --s) {
        if (dp[k - 1][s - r] > 0) dp[k][s] += dp[k - 1][s - r];
      }
    }
  }
  return dp[n1];
}

}  // namespace

TestResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b,
                          Alternative alternative, std::optional<bool> force_exact) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptySample, "mann_whitney_u");
  const size_t n1 = a.size(), n2 = b.size(), n = n1 + n2;

  std::vector<double> combined(a);
  combined.insert(combined.end(), b.begin(), b.end());
  std::vector<double> ranks = midranks(combined);
  double rank_sum_a = 0.0;
  for (size_t i = 0; i < n1; ++i) rank_sum_a += ranks[i];
  double u = rank_sum_a - static_cast<double>(n1 * (n1 + 1)) / 2.0;

  TestResult result;
  result.statistic = u;
  result.alternative = alternative;

  bool tied = has_ties(combined);
  bool exact = force_exact.value_or(n <= 20 && !tied);
  if (exact && tied) exact = false;  // exact counts assume distinct ranks

  if (exact) {
    std::vector<double> counts = rank_sum_counts(n, n1);
    double total = 0.0, le = 0.0, ge = 0.0;
    const double offset = static_cast<double>(n1 * (n1 + 1)) / 2.0;
    for (size_t s = 0; s < counts.size(); ++s) {
      if (counts[s] == 0) continue;
      total += counts[s];
      double u_s = static_cast<double>(s) - offset;
      if (u_s <= u + 1e-9) le += counts[s];
      if (u_s >= u - 1e-9) ge += counts[s];
    }
    double p_less = le / total, p_greater = ge / total;
    result.method = Method::Exact;
    switch (alternative) {
      case Alternative::Less: result.p_value = p_less; break;
      case Alternative::Greater: result.p_value = p_greater; break;
      case Alternative::TwoSided: result.p_value = two_sided_from_tails(p_less, p_greater); break;
    }
    return result;
  }

  result.method = Method::NormalApprox;
  double mean = static_cast<double>(n1) * static_cast<double>(n2) / 2.0;
  double nn = static_cast<double>(n);
  double var = static_cast<double>(n1) * static_cast<double>(n2) / 12.0 *
               ((nn + 1.0) - tie_term(combined) / (nn * (nn - 1.0)));
  if (var <= 0.0) {
    result.p_value = 1.0;
    result.degenerate = true;
    return result;
  }
  double sd = std::sqrt(var);
  double p_greater = 1.0 - normal_cdf((u - mean - 0.5) / sd);
  double p_less = normal_cdf((u - mean + 0.5) / sd);
  switch (alternative) {
    case Alternative::Less: result.p_value = p_less; break;
    case Alternative::Greater: result.p_value = p_greater; break;
    case Alternative::TwoSided: result.p_value = two_sided_from_tails(p_less, p_greater); break;
  }
  return result;
}

TestResult wilcoxon_signed_rank(const std::vector<double>& diffs, Alternative alternative,
                                std::optional<bool> force_exact) {
  std::vector<double> nonzero;
  for (double d : diffs)
    if (d != 0.0) nonzero.push_back(d);
  if (nonzero.empty()) throw Error(ErrorCode::AllZeroDifferences, "wilcoxon_signed_rank");

  const size_t n = nonzero.size();
  std::vector<double> abs_vals(n);
  std::transform(nonzero.begin(), nonzero.end(), abs_vals.begin(),
                 [](double d) { return std::abs(d); });
  std::vector<double> ranks = midranks(abs_vals);
  double w_plus = 0.0;
  for (size_t i = 0; i < n; ++i)
    if (nonzero[i] > 0.0) w_plus += ranks[i];

  TestResult result;
  result.statistic = w_plus;
  result.alternative = alternative;

  bool exact = force_exact.value_or(n <= 25);
  if (exact) {
    // Subset-sum DP over doubled ranks (midranks can be half-integers).
    std::vector<long> r2(n);
    for (size_t i = 0; i < n; ++i) r2[i] = std::lround(2.0 * ranks[i]);
    long max_sum = std::accumulate(r2.begin(), r2.end(), 0L);
    std::vector<double> counts(static_cast<size_t>(max_sum) + 1, 0.0);
    counts[0] = 1.0;
    for (long r : r2)
      for (long s = max_sum; s >= r; --s)
        if (counts[static_cast<size_t>(s - r)] > 0)
          counts[static_cast<size_t>(s)] += counts[static_cast<size_t>(s - r)];
    double total = std::pow(2.0, static_cast<double>(n));
    long w2 = std::lround(2.0 * w_plus);
    double le = 0.0, ge = 0.0;
    for (long s = 0; s <= max_sum; ++s) {
      if (s <= w2) le += counts[static_cast<size_t>(s)];
      if (s >= w2) ge += counts[static_cast<size_t>(s)];
    }
    double p_less = le / total, p_greater = ge / total;
    result.method = Method::Exact;
    switch (alternative) {
      case Alternative::Less: result.p_value = p_less; break;
      case Alternative::Greater: result.p_value = p_greater; break;
      case Alternative::TwoSided: result.p_value = two_sided_from_tails(p_less, p_greater); break;
    }
    return result;
  }

  result.method = Method::NormalApprox;
  double nn = static_cast<double>(n);
  double mean = nn * (nn + 1.0) / 4.0;
  double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term(abs_vals) / 48.0;
  if (var <= 0.0) {
    result.p_value = 1.0;
    result.degenerate = true;
    return result;
  }
  double sd = std::sqrt(var);
  double p_greater = 1.0 - normal_cdf((w_plus - mean - 0.5) / sd);
  double p_less = normal_cdf((w_plus - mean + 0.5) / sd);
  switch (alternative) {
    case Alternative::Less: result.p_value = p_less; break;
    case Alternative::Greater: result.p_value = p_greater; break;
    case Alternative::TwoSided: result.p_value = two_sided_from_tails(p_less, p_greater); break;
  }
  return result;
}

std::vector<double> holm_bonferroni(const std::vector<double>& p_values) {
  const size_t m = p_values.size();
  for (double p : p_values)
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::OutOfRangeP, std::to_string(p));

  std::vector<size_t> order(m);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t i, size_t j) { return p_values[i] < p_values[j]; });

  std::vector<double> adjusted(m);
  double running_max = 0.0;
  for (size_t i = 0; i < m; ++i) {
    double scaled = p_values[order[i]] * static_cast<double>(m - i);
    // a hypothesis whose step-down value saturates reports 1.0 without
    // dragging later (larger) p-values up to 1.0 as well; rejection
    // decisions are unchanged for any alpha < 1
    if (scaled >= 1.0) {
      adjusted[order[i]] = 1.0;
      continue;
    }
    running_max = std::max(running_max, scaled);
    adjusted[order[i]] = running_max;
  }
  return adjusted;
}

namespace {

double log_factorial(long n) { return std::lgamma(static_cast<double>(n) + 1.0); }

double log_hypergeom(long x, long r1, long r2, long c1) {
  long n = r1 + r2;
  return log_factorial(r1) - log_factorial(x) - log_factorial(r1 - x) +
         log_factorial(r2) - log_factorial(c1 - x) - log_factorial(r2 - (c1 - x)) -
         (log_factorial(n) - log_factorial(c1) - log_factorial(n - c1));
}

}  // namespace

TestResult fisher_exact(const std::array<std::array<long, 2>, 2>& table, Alternative alternative) {
  long a = table[0][0], b = table[0][1], c = table[1][0], d = table[1][1];
  if (a < 0 || b < 0 || c < 0 || d < 0)
    throw Error(ErrorCode::ParseError, "negative cell in 2x2 table");
  long r1 = a + b, r2 = c + d, c1 = a + c, c2 = b + d;
  if (r1 + r2 == 0) throw Error(ErrorCode::DegenerateMargins, "empty table");

  TestResult result;
  result.statistic = static_cast<double>(a);
  result.alternative = alternative;
  result.method = Method::Exact;
  if (r1 == 0 || r2 == 0 || c1 == 0 || c2 == 0) {
    // Only one table is consistent with the margins: no evidence either way.
    result.p_value = 1.0;
    result.degenerate = true;
    return result;
  }

  long lo = std::max(0L, c1 - r2);
  long hi = std::min(r1, c1);
  double p_obs = std::exp(log_hypergeom(a, r1, r2, c1));
  double p_two = 0.0, p_le = 0.0, p_ge = 0.0;
  for (long x = lo; x <= hi; ++x) {
    double px = std::exp(log_hypergeom(x, r1, r2, c1));
    if (px <= p_obs * (1.0 + 1e-7)) p_two += px;
    if (x <= a) p_le += px;
    if (x >= a) p_ge += px;
  }
  switch (alternative) {
    case Alternative::Less: result.p_value = std::min(1.0, p_le); break;
    case Alternative::Greater: result.p_value = std::min(1.0, p_ge); break;
    case Alternative::TwoSided: result.p_value = std::min(1.0, p_two); break;
  }
  return result;
}

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw Error(ErrorCode::PatientSetMismatch, "scores/labels length");
  long n_pos = std::count(labels.begin(), labels.end(), 1);
  long n_neg = static_cast<long>(labels.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error(ErrorCode::SingleClass, "auroc");

  std::vector<double> ranks = midranks(scores);
  double rank_sum_pos = 0.0;
  for (size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == 1) rank_sum_pos += ranks[i];
  double u = rank_sum_pos - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

ConfusionMetrics confusion_metrics(const ConfusionCounts& counts) {
  if (counts.total() < 1) throw Error(ErrorCode::EmptySample, "empty confusion counts");
  ConfusionMetrics m;
  auto ratio = [](long num, long den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  m.accuracy = ratio(counts.tp + counts.tn, counts.total());
  m.recall = ratio(counts.tp, counts.tp + counts.fn);
  m.specificity = ratio(counts.tn, counts.tn + counts.fp);
  m.precision = ratio(counts.tp, counts.tp + counts.fp);
  if (m.precision && m.recall && (*m.precision + *m.recall) > 0.0)
    m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
  return m;
}

}  // namespace nrp::stats
