#include "tabbench/forest.hpp"

#include <random>

namespace tabbench::forest {

Array ForestEnsemble::predict(const Matrix& X) const {
    if (trees.empty()) throw DataError("forest predict: no trees");
    Array out = Array::Zero(X.rows());
    for (const auto& t : trees) out += tree::predict_tree(*t, X);
    return out / static_cast<double>(trees.size());
}

ForestEnsemble fit_forest(const Matrix& X, const Array& y, const ForestParams& params) {
    const auto n = X.rows();
    if (n == 0) throw FitError("fit_forest: empty train split");
    if (y.size() != n) throw ConfigError("fit_forest: label count mismatch");
    const double pos_rate = y.mean();
    if (pos_rate <= 0.0 || pos_rate >= 1.0)
        throw FitError("fit_forest: train split has a single class");
    if (params.n_estimators <= 0) throw ConfigError("fit_forest: n_estimators must be positive");

    ForestEnsemble model;
    model.trees.reserve(static_cast<std::size_t>(params.n_estimators));
    for (int m = 0; m < params.n_estimators; ++m) {
        std::mt19937_64 rng(mix_seed(params.seed, static_cast<std::uint64_t>(m)));
        std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
        Array weights = Array::Zero(n);
        for (Eigen::Index i = 0; i < n; ++i) weights(pick(rng)) += 1.0;

        // Rows drawn zero times still flow through fit_tree with weight 0;
        // restrict to the support so sample-count thresholds mean what the
        // bootstrap intends.
        std::vector<Eigen::Index> support;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (weights(i) > 0.0) support.push_back(i);
        }
        Matrix Xb(static_cast<Eigen::Index>(support.size()), X.cols());
        Array yb(static_cast<Eigen::Index>(support.size()));
        Array wb(static_cast<Eigen::Index>(support.size()));
        for (std::size_t j = 0; j < support.size(); ++j) {
            const auto src = support[j];
            Xb.row(static_cast<Eigen::Index>(j)) = X.row(src);
            yb(static_cast<Eigen::Index>(j)) = y(src);
            wb(static_cast<Eigen::Index>(j)) = weights(src);
        }

        tree::TreeParams tp;
        tp.max_features = params.max_features;
        tp.min_samples_split = params.min_samples_split;
        tp.min_samples_leaf = params.min_samples_leaf;
        tp.impurity = tree::Impurity::Gini;
        tp.seed = mix_seed(params.seed, 0x9e3779b97f4a7c15ULL ^ static_cast<std::uint64_t>(m));
        auto t = tree::fit_tree(Xb, yb, wb, tp);
        if (params.ccp_alpha > 0.0) {
            tree::prune_ccp(t, params.ccp_alpha, static_cast<double>(n));
        }
        model.trees.push_back(std::move(t));
    }
    return model;
}

}  // namespace tabbench::forest
