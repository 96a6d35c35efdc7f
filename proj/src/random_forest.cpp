#include "nph/random_forest.hpp"

#include "nph/errors.hpp"
#include "nph/parallel.hpp"
#include "nph/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

namespace nph {

double gini(const Eigen::ArrayXd& counts) {
  if ((counts < 0.0).any()) throw InvalidInput("gini: negative count");
  const double total = counts.sum();
  if (!(total > 0.0)) throw InvalidInput("gini: zero total count");
  const Eigen::ArrayXd p = counts / total;
  return 1.0 - (p * p).sum();
}

void ForestParams::validate() const {
  if (n_estimators < 1) throw InvalidInput("ForestParams: n_estimators must be >= 1");
  if (max_depth < 1) throw InvalidInput("ForestParams: max_depth must be >= 1");
  if (min_samples_split < 2) throw InvalidInput("ForestParams: min_samples_split must be >= 2");
  if (max_features < 1) throw InvalidInput("ForestParams: max_features must be >= 1");
}

const Eigen::ArrayXd& DecisionTree::leaf_histogram(const double* row) const {
  int node = 0;
  while (nodes_[std::size_t(node)].feature >= 0) {
    const TreeNode& n = nodes_[std::size_t(node)];
    node = row[n.feature] < n.threshold ? n.left : n.right;
  }
  return nodes_[std::size_t(node)].histogram;
}

int DecisionTree::depth() const {
  // depth of a node = depth of parent + 1; root depth 0
  std::vector<int> depth_of(nodes_.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const TreeNode& n = nodes_[i];
    if (n.feature < 0) continue;
    depth_of[std::size_t(n.left)] = depth_of[i] + 1;
    depth_of[std::size_t(n.right)] = depth_of[i] + 1;
    deepest = std::max({deepest, depth_of[std::size_t(n.left)], depth_of[std::size_t(n.right)]});
  }
  return deepest;
}

namespace {

struct TreeBuilder {
  const Eigen::MatrixXd& X;
  const std::vector<int>& y;
  int n_classes;
  const ForestParams& params;
  Rng& rng;
  std::vector<TreeNode> nodes;

  Eigen::ArrayXd class_counts(const std::vector<int>& rows) const {
    Eigen::ArrayXd counts = Eigen::ArrayXd::Zero(n_classes);
    for (int r : rows) counts[y[std::size_t(r)]] += 1.0;
    return counts;
  }

  int make_leaf(const Eigen::ArrayXd& counts) {
    TreeNode leaf;
    leaf.histogram = counts;
    nodes.push_back(std::move(leaf));
    return int(nodes.size()) - 1;
  }

  // Sampled feature subset, in ascending index order so equal-gain ties
  // resolve to the smallest feature index.
  std::vector<int> sample_features() {
    const int n_feat = int(X.cols());
    const int k = std::min(params.max_features, n_feat);
    std::vector<int> all(static_cast<std::size_t>(n_feat));
    std::iota(all.begin(), all.end(), 0);
    for (int i = 0; i < k; ++i) {
      const int j = i + int(rng.uniform_int(std::uint64_t(n_feat - i)));
      std::swap(all[std::size_t(i)], all[std::size_t(j)]);
    }
    all.resize(std::size_t(k));
    std::sort(all.begin(), all.end());
    return all;
  }

  int build(std::vector<int>& rows, int depth) {
    const Eigen::ArrayXd counts = class_counts(rows);
    const bool pure = (counts > 0.0).count() <= 1;
    if (pure || depth >= params.max_depth || int(rows.size()) < params.min_samples_split)
      return make_leaf(counts);

    const double parent_gini = gini(counts);
    const double n_total = double(rows.size());

    int best_feature = -1;
    double best_threshold = 0.0;
    double best_decrease = 1e-12;  // require a real improvement

    std::vector<std::pair<double, int>> ordered(rows.size());
    for (int f : sample_features()) {
      for (std::size_t i = 0; i < rows.size(); ++i)
        ordered[i] = {X(rows[i], f), y[std::size_t(rows[i])]};
      std::sort(ordered.begin(), ordered.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });

      Eigen::ArrayXd left = Eigen::ArrayXd::Zero(n_classes);
      Eigen::ArrayXd right = counts;
      for (std::size_t i = 0; i + 1 < ordered.size(); ++i) {
        left[ordered[i].second] += 1.0;
        right[ordered[i].second] -= 1.0;
        if (ordered[i].first == ordered[i + 1].first) continue;  // split only between distinct values
        const double threshold = 0.5 * (ordered[i].first + ordered[i + 1].first);
        // guard against midpoints that collapse onto a sample value in floats
        if (!(ordered[i].first < threshold && threshold <= ordered[i + 1].first)) continue;
        const double nl = double(i + 1), nr = n_total - nl;
        const double decrease =
            parent_gini - (nl / n_total) * gini(left) - (nr / n_total) * gini(right);
        if (decrease > best_decrease) {
          best_decrease = decrease;
          best_feature = f;
          best_threshold = threshold;
        }
      }
    }

    if (best_feature < 0) return make_leaf(counts);

    std::vector<int> left_rows, right_rows;
    for (int r : rows) (X(r, best_feature) < best_threshold ? left_rows : right_rows).push_back(r);
    rows.clear();
    rows.shrink_to_fit();

    TreeNode split;
    split.feature = best_feature;
    split.threshold = best_threshold;
    nodes.push_back(std::move(split));
    const int idx = int(nodes.size()) - 1;
    const int left_idx = build(left_rows, depth + 1);
    const int right_idx = build(right_rows, depth + 1);
    nodes[std::size_t(idx)].left = left_idx;
    nodes[std::size_t(idx)].right = right_idx;
    return idx;
  }
};

nlohmann::json node_to_json(const std::vector<TreeNode>& nodes, int idx) {
  const TreeNode& n = nodes[std::size_t(idx)];
  nlohmann::json j;
  if (n.feature < 0) {
    j["counts"] = std::vector<double>(n.histogram.data(), n.histogram.data() + n.histogram.size());
  } else {
    j["feature"] = n.feature;
    j["threshold"] = n.threshold;
    j["left"] = node_to_json(nodes, n.left);
    j["right"] = node_to_json(nodes, n.right);
  }
  return j;
}

int node_from_json(const nlohmann::json& j, std::vector<TreeNode>& nodes, int n_classes) {
  TreeNode n;
  if (j.contains("counts")) {
    const auto counts = j["counts"].get<std::vector<double>>();
    if (int(counts.size()) != n_classes)
      throw IoError("forest file: leaf histogram width disagrees with n_classes");
    n.histogram = Eigen::Map<const Eigen::ArrayXd>(counts.data(), Eigen::Index(counts.size()));
    nodes.push_back(std::move(n));
    return int(nodes.size()) - 1;
  }
  n.feature = j.at("feature").get<int>();
  n.threshold = j.at("threshold").get<double>();
  nodes.push_back(std::move(n));
  const int idx = int(nodes.size()) - 1;
  const int left = node_from_json(j.at("left"), nodes, n_classes);
  const int right = node_from_json(j.at("right"), nodes, n_classes);
  nodes[std::size_t(idx)].left = left;
  nodes[std::size_t(idx)].right = right;
  return idx;
}

}  // namespace

std::vector<int> RandomForest::bootstrap_indices(std::uint64_t seed, int tree_index, int n_samples) {
  Rng rng = Rng::stream(seed, std::uint64_t(tree_index));
  std::vector<int> idx(static_cast<std::size_t>(n_samples));
  for (auto& i : idx) i = int(rng.uniform_int(std::uint64_t(n_samples)));
  return idx;
}

RandomForest RandomForest::train(const Eigen::MatrixXd& X, const std::vector<int>& y, int n_classes,
                                 const ForestParams& params, std::uint64_t seed) {
  params.validate();
  if (X.rows() == 0) throw InvalidInput("train_forest: empty training set");
  if (int(y.size()) != X.rows()) throw InvalidInput("train_forest: X/y size mismatch");
  if (n_classes < 2) throw InvalidInput("train_forest: need at least 2 classes");

  std::vector<std::int64_t> present(std::size_t(n_classes), 0);
  for (int label : y) {
    if (label < 0 || label >= n_classes) throw InvalidInput("train_forest: label out of range");
    ++present[std::size_t(label)];
  }
  for (int c = 0; c < n_classes; ++c)
    if (present[std::size_t(c)] == 0)
      throw InvalidInput("train_forest: class " + std::to_string(c) +
                         " missing from training data (untrainable class)");

  RandomForest forest;
  forest.params_ = params;
  forest.n_classes_ = n_classes;
  forest.n_features_ = int(X.cols());
  forest.trees_.resize(std::size_t(params.n_estimators));

  parallel_chunks(0, params.n_estimators, [&](std::int64_t t0, std::int64_t t1) {
    for (std::int64_t t = t0; t < t1; ++t) {
      Rng rng = Rng::stream(seed, std::uint64_t(t));
      std::vector<int> rows(static_cast<std::size_t>(X.rows()));
      for (auto& r : rows) r = int(rng.uniform_int(std::uint64_t(X.rows())));
      TreeBuilder builder{X, y, n_classes, params, rng, {}};
      builder.build(rows, 0);
      forest.trees_[std::size_t(t)] = DecisionTree(std::move(builder.nodes));
    }
  });
  return forest;
}

Eigen::ArrayXd RandomForest::predict_proba(const double* row) const {
  Eigen::ArrayXd votes = Eigen::ArrayXd::Zero(n_classes_);
  for (const auto& tree : trees_) {
    const Eigen::ArrayXd& hist = tree.leaf_histogram(row);
    votes += hist / hist.sum();
  }
  return votes / double(trees_.size());
}

int RandomForest::predict(const double* row) const {
  const Eigen::ArrayXd votes = predict_proba(row);
  int best = 0;
  for (int c = 1; c < n_classes_; ++c)
    if (votes[c] > votes[best]) best = c;  // strict: ties keep the lowest ID
  return best;
}

void RandomForest::save(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["format"] = "nph-forest-v1";
  j["n_classes"] = n_classes_;
  j["n_features"] = n_features_;
  j["params"] = {{"n_estimators", params_.n_estimators},
                 {"max_depth", params_.max_depth},
                 {"min_samples_split", params_.min_samples_split},
                 {"max_features", params_.max_features}};
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : trees_) trees.push_back(node_to_json(tree.nodes(), 0));
  j["trees"] = std::move(trees);

  std::ofstream out(path);
  if (!out) throw IoError("cannot open forest file for writing: " + path.string());
  out << j.dump() << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

RandomForest RandomForest::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open forest file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad forest file " + path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "nph-forest-v1")
    throw IoError("unrecognized forest file format: " + path.string());

  RandomForest forest;
  forest.n_classes_ = j.at("n_classes").get<int>();
  forest.n_features_ = j.at("n_features").get<int>();
  const auto& p = j.at("params");
  forest.params_.n_estimators = p.at("n_estimators").get<int>();
  forest.params_.max_depth = p.at("max_depth").get<int>();
  forest.params_.min_samples_split = p.at("min_samples_split").get<int>();
  forest.params_.max_features = p.at("max_features").get<int>();
  for (const auto& tj : j.at("trees")) {
    std::vector<TreeNode> nodes;
    node_from_json(tj, nodes, forest.n_classes_);
    forest.trees_.emplace_back(std::move(nodes));
  }
  forest.validate();
  return forest;
}

void RandomForest::validate() const {
  if (trees_.empty()) throw InvalidInput("forest: no trees");
  for (const auto& tree : trees_) {
    if (tree.depth() > params_.max_depth) throw InvalidInput("forest: tree exceeds max_depth");
    for (const auto& n : tree.nodes()) {
      if (n.feature >= n_features_)
        throw InvalidInput("forest: split feature index out of range");
      if (n.feature < 0 && int(n.histogram.size()) != n_classes_)
        throw InvalidInput("forest: leaf histogram width mismatch");
    }
  }
}

RandomForest RandomForest::from_trees(std::vector<DecisionTree> trees, int n_classes, int n_features,
                                      const ForestParams& params) {
  RandomForest forest;
  forest.trees_ = std::move(trees);
  forest.n_classes_ = n_classes;
  forest.n_features_ = n_features;
  forest.params_ = params;
  forest.validate();
  return forest;
}

}  // namespace nph
