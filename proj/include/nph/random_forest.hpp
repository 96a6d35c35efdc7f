#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace nph {

/// Gini impurity 1 - sum(p_k^2) over nonnegative class counts.
/// Throws InvalidInput when the counts sum to zero.
double gini(const Eigen::ArrayXd& counts);

/// Forest hyperparameters (criterion is always gini).
struct ForestParams {
  int n_estimators = 200;
  int max_depth = 4;
  int min_samples_split = 3;
  int max_features = 2;

  void validate() const;
};

/// Axis-aligned binary split node; feature < 0 marks a leaf carrying the
/// training class counts.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  Eigen::ArrayXd histogram;  // leaf class counts
};

class DecisionTree {
public:
  DecisionTree() = default;
  explicit DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  const std::vector<TreeNode>& nodes() const { return nodes_; }

  /// Leaf class counts for one feature row (x[feature] < threshold goes left).
  const Eigen::ArrayXd& leaf_histogram(const double* row) const;

  int depth() const;

private:
  friend class RandomForest;
  std::vector<TreeNode> nodes_;
};

/// Bagged forest of gini-split decision trees over a fixed-width feature
/// matrix. Deterministic given (data, params, seed): each tree draws its
/// bootstrap sample and feature subsets from a stream derived from
/// (seed, tree index), so parallel training cannot reorder randomness.
class RandomForest {
public:
  RandomForest() = default;

  /// X: one row per sample. y: class IDs in [0, n_classes). Every class must
  /// appear at least once; training is impossible for an absent class.
  static RandomForest train(const Eigen::MatrixXd& X, const std::vector<int>& y, int n_classes,
                            const ForestParams& params, std::uint64_t seed);

  /// Bootstrap row indices used for one tree; exposed so tests can replay
  /// exactly what each tree saw.
  static std::vector<int> bootstrap_indices(std::uint64_t seed, int tree_index, int n_samples);

  /// Summed normalized leaf histograms over all trees.
  Eigen::ArrayXd predict_proba(const double* row) const;

  /// Argmax of predict_proba; ties break to the lowest class ID.
  int predict(const double* row) const;

  int n_classes() const { return n_classes_; }
  int n_features() const { return n_features_; }
  const std::vector<DecisionTree>& trees() const { return trees_; }
  const ForestParams& params() const { return params_; }

  /// Versioned JSON model file (trees stored as nested nodes).
  void save(const std::filesystem::path& path) const;
  static RandomForest load(const std::filesystem::path& path);

  /// Tree invariants: depth bound and split feature ranges.
  void validate() const;

  static RandomForest from_trees(std::vector<DecisionTree> trees, int n_classes, int n_features,
                                 const ForestParams& params);

private:
  std::vector<DecisionTree> trees_;
  ForestParams params_;
  int n_classes_ = 0;
  int n_features_ = 0;
};

}  // namespace nph
