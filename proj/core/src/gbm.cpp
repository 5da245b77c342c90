#include "nrp/gbm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nrp {

namespace {

constexpr double kHessianFloor = 1e-12;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct SplitChoice {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;  // squared-error reduction
};

struct TreeBuilder {
  const std::vector<std::vector<double>>& X;
  const std::vector<double>& residual;
  const std::vector<double>& hessian;
  const GbmConfig& cfg;
  std::vector<double>& importance_acc;
  RegressionTree tree;

  SplitChoice best_split(const std::vector<int>& rows) const {
    const size_t n_features = X.front().size();
    const double n = static_cast<double>(rows.size());
    double total = 0.0;
    for (int r : rows) total += residual[r];
    const double parent_score = total * total / n;

    SplitChoice best;
    std::vector<int> order(rows);
    for (size_t f = 0; f < n_features; ++f) {
      std::stable_sort(order.begin(), order.end(),
                       [&](int a, int b) { return X[a][f] < X[b][f]; });
      double left_sum = 0.0;
      for (size_t i = 0; i + 1 < order.size(); ++i) {
        left_sum += residual[order[i]];
        double lv = X[order[i]][f], rv = X[order[i + 1]][f];
        if (lv == rv) continue;
        size_t n_left = i + 1, n_right = order.size() - n_left;
        if (n_left < static_cast<size_t>(cfg.min_leaf) ||
            n_right < static_cast<size_t>(cfg.min_leaf))
          continue;
        double right_sum = total - left_sum;
        double gain = left_sum * left_sum / static_cast<double>(n_left) +
                      right_sum * right_sum / static_cast<double>(n_right) - parent_score;
        double threshold = 0.5 * (lv + rv);
        // ties resolved by scan order: lowest feature index, lowest threshold
        if (gain > best.gain + 1e-15) {
          best.found = true;
          best.feature = static_cast<int>(f);
          best.threshold = threshold;
          best.gain = gain;
        }
      }
    }
    return best;
  }

  int build(const std::vector<int>& rows, int depth) {
    int index = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();

    SplitChoice split;
    if (depth < cfg.max_depth && rows.size() >= 2 * static_cast<size_t>(cfg.min_leaf))
      split = best_split(rows);

    if (!split.found) {
      double num = 0.0, den = 0.0;
      for (int r : rows) {
        num += residual[r];
        den += hessian[r];
      }
      tree.nodes[index].value = num / std::max(den, kHessianFloor);
      return index;
    }

    importance_acc[split.feature] += split.gain;
    std::vector<int> left_rows, right_rows;
    for (int r : rows) {
      if (X[r][split.feature] <= split.threshold)
        left_rows.push_back(r);
      else
        right_rows.push_back(r);
    }
    int left = build(left_rows, depth + 1);
    int right = build(right_rows, depth + 1);
    tree.nodes[index].feature = split.feature;
    tree.nodes[index].threshold = split.threshold;
    tree.nodes[index].left = left;
    tree.nodes[index].right = right;
    return index;
  }
};

}  // namespace

double RegressionTree::predict(const std::vector<double>& x) const {
  int i = 0;
  while (nodes[i].left >= 0)
    i = x[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
  return nodes[i].value;
}

GbmModel fit_gbm(const std::vector<std::vector<double>>& X, const std::vector<int>& y,
                 const GbmConfig& cfg, const std::vector<std::string>& feature_names) {
  const size_t n = X.size();
  if (n == 0 || X.front().empty())
    throw Error(ErrorCode::DegenerateConfig, "empty training matrix");
  const size_t n_features = X.front().size();
  for (const auto& row : X)
    for (double v : row)
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteFeature, "non-finite feature value");

  long n_pos = std::count(y.begin(), y.end(), 1);
  if (n_pos == 0 || n_pos == static_cast<long>(n))
    throw Error(ErrorCode::SingleClassTraining, "training labels are single-class");
  if (n < 2 * static_cast<size_t>(cfg.min_leaf))
    throw Error(ErrorCode::DegenerateConfig, "fewer than 2*min_leaf rows");

  GbmModel model;
  model.learning_rate = cfg.learning_rate;
  double prevalence = static_cast<double>(n_pos) / static_cast<double>(n);
  model.init_score = std::log(prevalence / (1.0 - prevalence));
  model.feature_names = feature_names;
  if (model.feature_names.empty())
    for (size_t f = 0; f < n_features; ++f) model.feature_names.push_back("f" + std::to_string(f));
  model.importances.assign(n_features, 0.0);

  std::vector<double> score(n, model.init_score);
  std::vector<double> residual(n), hessian(n);
  std::vector<int> all_rows(n);
  std::iota(all_rows.begin(), all_rows.end(), 0);

  for (int stage = 0; stage < cfg.n_estimators; ++stage) {
    for (size_t i = 0; i < n; ++i) {
      double p = sigmoid(score[i]);
      residual[i] = static_cast<double>(y[i]) - p;
      hessian[i] = p * (1.0 - p);
    }
    TreeBuilder builder{X, residual, hessian, cfg, model.importances, {}};
    builder.build(all_rows, 0);
    RegressionTree tree = std::move(builder.tree);
    for (size_t i = 0; i < n; ++i) score[i] += cfg.learning_rate * tree.predict(X[i]);
    model.trees.push_back(std::move(tree));
  }

  double total_gain = std::accumulate(model.importances.begin(), model.importances.end(), 0.0);
  if (total_gain > 0.0)
    for (double& imp : model.importances) imp /= total_gain;
  return model;
}

double predict_score(const GbmModel& model, const std::vector<double>& x) {
  if (x.size() != model.importances.size())
    throw Error(ErrorCode::DimensionMismatch, "feature vector length");
  double z = model.init_score;
  for (const RegressionTree& tree : model.trees) z += model.learning_rate * tree.predict(x);
  double p = 1.0 / (1.0 + std::exp(-z));
  // keep scores strictly inside (0,1)
  constexpr double eps = 1e-12;
  return std::clamp(p, eps, 1.0 - eps);
}

}  // namespace nrp
