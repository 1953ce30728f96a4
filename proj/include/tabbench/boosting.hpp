#pragma once

#include <vector>

#include "tabbench/common.hpp"
#include "tabbench/tree.hpp"

namespace tabbench::boosting {

enum class Order { First, Second };
enum class Growth { Depthwise, LossGuide };

struct BoostParams {
    double learning_rate = 0.1;
    int n_estimators = 100;
    int max_depth = 6;
    double min_split_loss = 0.0;     // gamma; second-order mode only
    double col_subsample_tree = 1.0;
    double col_subsample_level = 1.0;
    Order order = Order::First;
    Growth growth = Growth::Depthwise;
    int max_bins = 0;    // 0 disables histogram pre-binning
    int max_leaves = 31; // LossGuide leaf budget
    Eigen::Index min_samples_split = 2;
    Eigen::Index min_samples_leaf = 1;
    std::uint64_t seed = 0;
};

struct BoostedEnsemble {
    double base_score = 0.0;  // log-odds of the train positive rate
    double learning_rate = 0.0;
    std::vector<tree::TreePtr> trees;
    std::vector<double> train_loss;  // mean logistic loss after each iteration

    Array raw_scores(const Matrix& X) const;  // base + lr * sum of tree outputs
    Array predict(const Matrix& X) const;     // sigmoid of raw scores
};

// Logistic-loss boosting. order=First fits trees to residuals y - p with
// variance splits and Newton leaf values; order=Second uses the
// gradient/hessian split gain with L2 stabilizer fixed at 1 and rejects
// splits whose gain does not exceed min_split_loss.
BoostedEnsemble fit_boosted(const Matrix& X, const Array& y, const BoostParams& params);

}  // namespace tabbench::boosting
