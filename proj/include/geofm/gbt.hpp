#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

namespace geofm::gbt {

using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct GBTParams {
  double learning_rate = 0.1;
  int max_depth = 3;
  int n_rounds = 100;
  int min_samples_leaf = 1;

  friend bool operator==(const GBTParams&, const GBTParams&) = default;
};

/// Throws ContractError unless lr in (0, 1], depth >= 1, rounds >= 1, leaf >= 1.
void validate(const GBTParams& params);

/// Internal nodes carry `feature >= 0`; rows with x[feature] >= threshold go right.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool is_leaf() const noexcept { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> row) const noexcept;
  int depth() const;
  friend bool operator==(const RegressionTree&, const RegressionTree&) = default;
};

/// prediction(x) = base_score + learning_rate * sum_t tree_t(x).
struct GBTModel {
  double base_score = 0.0;
  std::vector<RegressionTree> trees;
  GBTParams params;
  std::size_t n_features = 0;

  friend bool operator==(const GBTModel&, const GBTModel&) = default;
};

/// Optional per-round diagnostics filled by `fit`.
struct FitTrace {
  /// Training MSE before any tree (index 0) and after each round.
  std::vector<double> train_mse;
};

/// Squared-loss gradient boosting with exact greedy splits over midpoints of
/// consecutive unique feature values. Rows are put in a canonical order first,
/// so the model depends only on the multiset of (x, y) rows.
GBTModel fit(const FeatureMatrix& X, std::span<const double> y, const GBTParams& params,
             FitTrace* trace = nullptr);

std::vector<double> predict(const GBTModel& model, const FeatureMatrix& X);

/// Prediction using only the first `n_trees` trees. A model fit for R rounds
/// truncated to k trees is identical to a model fit for k rounds.
std::vector<double> predict(const GBTModel& model, const FeatureMatrix& X, std::size_t n_trees);

/// Predictions after each checkpoint tree count (ascending), in one pass.
std::vector<std::vector<double>> staged_predict(const GBTModel& model, const FeatureMatrix& X,
                                                std::span<const int> checkpoints);

nlohmann::json to_json(const GBTModel& model);
GBTModel model_from_json(const nlohmann::json& doc);

}  // namespace geofm::gbt
