#pragma once

#include <memory>
#include <random>
#include <vector>

#include "tabbench/common.hpp"

namespace tabbench::tree {

enum class Impurity { Variance, Gini };
enum class MaxFeatures { All, Sqrt, Log2 };

struct TreeParams {
    int max_depth = 1 << 20;  // effectively unlimited
    Eigen::Index min_samples_split = 2;
    Eigen::Index min_samples_leaf = 1;
    MaxFeatures max_features = MaxFeatures::All;
    Impurity impurity = Impurity::Gini;
    std::uint64_t seed = 0;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::unique_ptr<TreeNode> left;
    std::unique_ptr<TreeNode> right;
    double value = 0.0;
    Eigen::Index n_samples = 0;
    double impurity = 0.0;  // weighted node impurity, for pruning

    bool is_leaf() const { return feature < 0; }
};

using TreePtr = std::unique_ptr<TreeNode>;

// Greedy CART induction: best split by impurity decrease over (optionally
// subsampled) features, midpoint thresholds, ties broken by lowest feature
// index then lowest threshold. Rows go left when x <= threshold.
TreePtr fit_tree(const Matrix& X, const Array& targets, const Array& weights,
                 const TreeParams& params);

double predict_row(const TreeNode& node, const Eigen::Ref<const Eigen::RowVectorXd>& row);
Array predict_tree(const TreeNode& node, const Matrix& X);

TreeNode& find_leaf(TreeNode& node, const Eigen::Ref<const Eigen::RowVectorXd>& row);

int depth(const TreeNode& node);
Eigen::Index count_leaves(const TreeNode& node);

// Weakest-link cost-complexity pruning: collapse internal nodes whose
// per-leaf impurity saving falls below alpha.
void prune_ccp(TreePtr& root, double alpha, double total_weight);

}  // namespace tabbench::tree
