#pragma once

#include <string>
#include <vector>

#include "nrp/errors.hpp"

namespace nrp {

struct GbmConfig {
  int n_estimators = 10;
  int max_depth = 3;
  double learning_rate = 0.9;
  int min_leaf = 2;
  int seed = 0;  // boosting is deterministic; kept for config plumbing
};

/// One node of a depth-limited regression tree, stored flat.
/// Leaf iff left < 0.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf output (Newton step on logistic residuals)
};

struct RegressionTree {
  std::vector<TreeNode> nodes;

  double predict(const std::vector<double>& x) const;
};

/// Logistic-loss gradient-boosted ensemble.
struct GbmModel {
  double init_score = 0.0;  // log-odds of training prevalence
  double learning_rate = 0.9;
  std::vector<RegressionTree> trees;
  std::vector<std::string> feature_names;
  std::vector<double> importances;  // normalized squared-error reduction
};

/// Fits depth-limited variance-reduction trees on logistic residuals with
/// deterministic tie-breaking (lowest feature index, then lowest threshold).
GbmModel fit_gbm(const std::vector<std::vector<double>>& X, const std::vector<int>& y,
                 const GbmConfig& cfg, const std::vector<std::string>& feature_names = {});

/// sigmoid(init + lr * sum of tree outputs); strictly inside (0,1).
double predict_score(const GbmModel& model, const std::vector<double>& x);

}  // namespace nrp
