#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "nrp/errors.hpp"

namespace nrp::stats {

enum class Alternative { Less, Greater, TwoSided };
enum class Method { Exact, NormalApprox };

std::string alternative_name(Alternative a);

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  Method method = Method::Exact;
  Alternative alternative = Alternative::TwoSided;
  bool degenerate = false;  // zero-variance / degenerate-margin fallbacks
};

/// Mann-Whitney U test. Exact (count-based) p-value when |a|+|b| <= 20 and
/// there are no ties, otherwise normal approximation with tie and continuity
/// corrections. The statistic is U of sample a.
TestResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b,
                          Alternative alternative, std::optional<bool> force_exact = {});

/// Wilcoxon signed-rank test on paired differences; zeros dropped. Exact
/// sign-flip distribution when n <= 25 after dropping, else normal approx.
/// The statistic is W+ (sum of positive ranks).
TestResult wilcoxon_signed_rank(const std::vector<double>& diffs, Alternative alternative,
                                std::optional<bool> force_exact = {});

/// Holm-Bonferroni step-down adjustment; output in input order.
std::vector<double> holm_bonferroni(const std::vector<double>& p_values);

/// Fisher's exact test on a 2x2 table [[a,b],[c,d]], fixed margins.
/// Two-sided p sums hypergeometric probabilities <= the observed table's.
TestResult fisher_exact(const std::array<std::array<long, 2>, 2>& table,
                        Alternative alternative = Alternative::TwoSided);

/// AUROC by the pairwise-comparison formulation (ties count 1/2),
/// computed via midranks.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

struct ConfusionCounts {
  long tp = 0, fp = 0, tn = 0, fn = 0;
  long total() const { return tp + fp + tn + fn; }
};

struct ConfusionMetrics {
  std::optional<double> accuracy, recall, specificity, precision, f1;
};

/// Standard definitions; zero-denominator metrics are left unset.
ConfusionMetrics confusion_metrics(const ConfusionCounts& counts);

/// Midranks (average ranks for ties), 1-based.
std::vector<double> midranks(const std::vector<double>& values);

double normal_cdf(double z);

}  // namespace nrp::stats
