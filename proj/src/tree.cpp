#include "tabbench/tree.hpp"

#include <algorithm>
#include <numeric>

namespace tabbench::tree {

namespace {

struct Builder {
    const Matrix& X;
    const Array& t;
    const Array& w;
    const TreeParams& params;
    std::mt19937_64 rng;

    Eigen::Index n_features_to_try() const {
        const auto d = X.cols();
        switch (params.max_features) {
            case MaxFeatures::All:
                return d;
            case MaxFeatures::Sqrt:
                return std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::sqrt(static_cast<double>(d))));
            case MaxFeatures::Log2:
                return std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::log2(static_cast<double>(d))));
        }
        return d;
    }

    std::vector<Eigen::Index> sample_features() {
        const auto d = X.cols();
        const auto k = n_features_to_try();
        std::vector<Eigen::Index> all(static_cast<std::size_t>(d));
        std::iota(all.begin(), all.end(), Eigen::Index{0});
        if (k >= d) return all;
        for (Eigen::Index i = 0; i < k; ++i) {
            std::uniform_int_distribution<Eigen::Index> pick(i, d - 1);
            std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(pick(rng))]);
        }
        all.resize(static_cast<std::size_t>(k));
        std::sort(all.begin(), all.end());  // ascending order keeps tie-breaks deterministic
        return all;
    }

    // Weighted sum-of-squared-errors of targets; ordering of candidate
    // splits is identical for variance and (binary) gini impurity.
    static double sse(double sw, double swt, double swtt) {
        if (sw <= 0.0) return 0.0;
        return std::max(0.0, swtt - swt * swt / sw);
    }

    double node_impurity(double sw, double swt, double swtt) const {
        if (params.impurity == Impurity::Variance) return sse(sw, swt, swtt);
        const double p = sw > 0.0 ? swt / sw : 0.0;
        return sw * 2.0 * p * (1.0 - p);
    }

    TreePtr build(std::vector<Eigen::Index>& idx, int depth) {
        auto node = std::make_unique<TreeNode>();
        node->n_samples = static_cast<Eigen::Index>(idx.size());
        double sw = 0.0, swt = 0.0, swtt = 0.0;
        for (auto i : idx) {
            sw += w(i);
            swt += w(i) * t(i);
            swtt += w(i) * t(i) * t(i);
        }
        node->value = sw > 0.0 ? swt / sw : 0.0;
        node->impurity = node_impurity(sw, swt, swtt);

        const double parent_sse = sse(sw, swt, swtt);
        if (depth >= params.max_depth || node->n_samples < params.min_samples_split ||
            parent_sse <= 1e-12) {
            return node;
        }

        int best_feature = -1;
        double best_threshold = 0.0;
        double best_gain = 1e-12;
        Eigen::Index best_pos = 0;

        std::vector<std::pair<double, Eigen::Index>> vals;
        vals.reserve(idx.size());
        for (auto f : sample_features()) {
            vals.clear();
            for (auto i : idx) vals.emplace_back(X(i, f), i);
            std::sort(vals.begin(), vals.end());

            double lw = 0.0, lwt = 0.0, lwtt = 0.0;
            for (std::size_t j = 0; j + 1 < vals.size(); ++j) {
                const auto i = vals[j].second;
                lw += w(i);
                lwt += w(i) * t(i);
                lwtt += w(i) * t(i) * t(i);
                if (vals[j].first == vals[j + 1].first) continue;
                const auto left_n = static_cast<Eigen::Index>(j + 1);
                const auto right_n = static_cast<Eigen::Index>(vals.size()) - left_n;
                if (left_n < params.min_samples_leaf || right_n < params.min_samples_leaf) continue;
                const double gain =
                    parent_sse - sse(lw, lwt, lwtt) - sse(sw - lw, swt - lwt, swtt - lwtt);
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = static_cast<int>(f);
                    best_threshold = 0.5 * (vals[j].first + vals[j + 1].first);
                    best_pos = left_n;
                }
            }
        }
        if (best_feature < 0) return node;

        std::vector<Eigen::Index> left, right;
        left.reserve(static_cast<std::size_t>(best_pos));
        for (auto i : idx) {
            (X(i, best_feature) <= best_threshold ? left : right).push_back(i);
        }
        if (left.empty() || right.empty()) return node;  // numeric guard at the midpoint

        node->feature = best_feature;
        node->threshold = best_threshold;
        node->left = build(left, depth + 1);
        node->right = build(right, depth + 1);
        return node;
    }
};

}  // namespace

TreePtr fit_tree(const Matrix& X, const Array& targets, const Array& weights,
                 const TreeParams& params) {
    if (X.rows() == 0) throw FitError("fit_tree: empty input");
    if (X.rows() != targets.size() || X.rows() != weights.size())
        throw ConfigError("fit_tree: row count mismatch");
    Builder b{X, targets, weights, params, std::mt19937_64(params.seed)};
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(X.rows()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    return b.build(idx, 0);
}

double predict_row(const TreeNode& node, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    const TreeNode* cur = &node;
    while (!cur->is_leaf()) {
        cur = row(cur->feature) <= cur->threshold ? cur->left.get() : cur->right.get();
    }
    return cur->value;
}

Array predict_tree(const TreeNode& node, const Matrix& X) {
    Array out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) = predict_row(node, X.row(i));
    return out;
}

TreeNode& find_leaf(TreeNode& node, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    TreeNode* cur = &node;
    while (!cur->is_leaf()) {
        cur = row(cur->feature) <= cur->threshold ? cur->left.get() : cur->right.get();
    }
    return *cur;
}

int depth(const TreeNode& node) {
    if (node.is_leaf()) return 0;
    return 1 + std::max(depth(*node.left), depth(*node.right));
}

Eigen::Index count_leaves(const TreeNode& node) {
    if (node.is_leaf()) return 1;
    return count_leaves(*node.left) + count_leaves(*node.right);
}

namespace {

double subtree_leaf_impurity(const TreeNode& node) {
    if (node.is_leaf()) return node.impurity;
    return subtree_leaf_impurity(*node.left) + subtree_leaf_impurity(*node.right);
}

// Weakest link: the internal node with the smallest per-leaf impurity saving.
TreeNode* weakest_link(TreeNode& node, double total_weight, double& best_g) {
    if (node.is_leaf()) return nullptr;
    TreeNode* best = nullptr;
    const double r_node = node.impurity / total_weight;
    const double r_sub = subtree_leaf_impurity(node) / total_weight;
    const auto leaves = count_leaves(node);
    const double g = (r_node - r_sub) / static_cast<double>(leaves - 1);
    if (g < best_g) {
        best_g = g;
        best = &node;
    }
    for (auto* child : {node.left.get(), node.right.get()}) {
        if (TreeNode* c = weakest_link(*child, total_weight, best_g)) best = c;
    }
    return best;
}

}  // namespace

void prune_ccp(TreePtr& root, double alpha, double total_weight) {
    if (alpha <= 0.0 || !root) return;
    while (!root->is_leaf()) {
        double best_g = std::numeric_limits<double>::infinity();
        TreeNode* target = weakest_link(*root, total_weight, best_g);
        if (!target || best_g > alpha) break;
        target->feature = -1;
        target->left.reset();
        target->right.reset();
    }
}

}  // namespace tabbench::tree
