#pragma once

#include <vector>

#include "tabbench/common.hpp"
#include "tabbench/tree.hpp"

namespace tabbench::forest {

struct ForestParams {
    int n_estimators = 100;
    tree::MaxFeatures max_features = tree::MaxFeatures::Sqrt;
    Eigen::Index min_samples_split = 2;
    Eigen::Index min_samples_leaf = 1;
    double ccp_alpha = 0.0;
    std::uint64_t seed = 0;
};

struct ForestEnsemble {
    std::vector<tree::TreePtr> trees;

    // Mean over trees of the leaf class-1 fraction, always in [0, 1].
    Array predict(const Matrix& X) const;
};

// Bagged gini trees: each tree sees a seeded bootstrap resample of size n
// (realized as integer sample weights) and an optional weakest-link
// cost-complexity pruning pass when ccp_alpha > 0.
ForestEnsemble fit_forest(const Matrix& X, const Array& y, const ForestParams& params);

}  // namespace tabbench::forest
