#include "tabbench/boosting.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <queue>
#include <random>

namespace tabbench::boosting {

namespace {

constexpr double kHessFloor = 1e-16;

// Per-row boosting statistics accumulated along a split scan.
struct Accum {
    double r = 0.0;   // sum of residuals y - p
    double r2 = 0.0;  // sum of squared residuals
    double h = 0.0;   // sum of hessians p(1-p)
    Eigen::Index cnt = 0;

    void add(double ri, double hi) {
        r += ri;
        r2 += ri * ri;
        h += hi;
        ++cnt;
    }
    Accum operator-(const Accum& o) const {
        return {r - o.r, r2 - o.r2, h - o.h, cnt - o.cnt};
    }
};

double sse(const Accum& a) {
    if (a.cnt == 0) return 0.0;
    return std::max(0.0, a.r2 - a.r * a.r / static_cast<double>(a.cnt));
}

struct Candidate {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

struct Grower {
    const Matrix& X;
    const Array& residual;  // y - p
    const Array& hess;      // p(1-p)
    const BoostParams& params;
    std::mt19937_64 rng;
    std::vector<Eigen::Index> tree_features;          // after col_subsample_tree
    std::map<int, std::vector<Eigen::Index>> by_level;  // after col_subsample_level
    // Quantile bin upper edges per feature; empty vector = raw value scan.
    const std::vector<std::vector<double>>* bin_edges;

    Grower(const Matrix& X_, const Array& r_, const Array& h_, const BoostParams& p_,
           std::uint64_t seed, const std::vector<std::vector<double>>* edges)
        : X(X_), residual(r_), hess(h_), params(p_), rng(seed), bin_edges(edges) {
        tree_features = subsample(all_features(), params.col_subsample_tree);
    }

    std::vector<Eigen::Index> all_features() const {
        std::vector<Eigen::Index> f(static_cast<std::size_t>(X.cols()));
        std::iota(f.begin(), f.end(), Eigen::Index{0});
        return f;
    }

    std::vector<Eigen::Index> subsample(std::vector<Eigen::Index> pool, double ratio) {
        if (ratio >= 1.0) return pool;
        const auto k = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(pool.size()))));
        for (std::size_t i = 0; i < k; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
            std::swap(pool[i], pool[pick(rng)]);
        }
        pool.resize(k);
        std::sort(pool.begin(), pool.end());
        return pool;
    }

    const std::vector<Eigen::Index>& features_at(int level) {
        auto it = by_level.find(level);
        if (it == by_level.end()) {
            it = by_level.emplace(level, subsample(tree_features, params.col_subsample_level)).first;
        }
        return it->second;
    }

    double split_gain(const Accum& total, const Accum& left) const {
        const Accum right = total - left;
        if (params.order == Order::First) {
            return sse(total) - sse(left) - sse(right);
        }
        // G = sum of p - y = -r; gain formula is sign-symmetric in G.
        const double gl = left.r, gr = right.r, g = total.r;
        return 0.5 * (gl * gl / (left.h + 1.0) + gr * gr / (right.h + 1.0) -
                      g * g / (total.h + 1.0)) -
               params.min_split_loss;
    }

    double leaf_value(const Accum& a) const {
        if (params.order == Order::First) return a.r / std::max(a.h, kHessFloor);
        return a.r / (a.h + 1.0);
    }

    Accum accumulate(const std::vector<Eigen::Index>& idx) const {
        Accum total;
        for (auto i : idx) total.add(residual(i), hess(i));
        return total;
    }

    Candidate best_split(const std::vector<Eigen::Index>& idx, const Accum& total, int level) {
        Candidate best;
        best.gain = 1e-12;
        const auto n = static_cast<Eigen::Index>(idx.size());
        if (n < params.min_samples_split) return best;

        std::vector<std::pair<double, Eigen::Index>> vals;
        for (auto f : features_at(level)) {
            if (bin_edges && !(*bin_edges)[static_cast<std::size_t>(f)].empty()) {
                scan_binned(idx, total, f, best);
                continue;
            }
            vals.clear();
            vals.reserve(idx.size());
            for (auto i : idx) vals.emplace_back(X(i, f), i);
            std::sort(vals.begin(), vals.end());
            Accum left;
            for (Eigen::Index j = 0; j + 1 < n; ++j) {
                const auto i = vals[static_cast<std::size_t>(j)].second;
                left.add(residual(i), hess(i));
                const double x0 = vals[static_cast<std::size_t>(j)].first;
                const double x1 = vals[static_cast<std::size_t>(j + 1)].first;
                if (x0 == x1) continue;
                if (left.cnt < params.min_samples_leaf || n - left.cnt < params.min_samples_leaf)
                    continue;
                const double gain = split_gain(total, left);
                if (gain > best.gain) {
                    best.gain = gain;
                    best.feature = static_cast<int>(f);
                    best.threshold = 0.5 * (x0 + x1);
                }
            }
        }
        return best;
    }

    void scan_binned(const std::vector<Eigen::Index>& idx, const Accum& total, Eigen::Index f,
                     Candidate& best) {
        const auto& edges = (*bin_edges)[static_cast<std::size_t>(f)];
        std::vector<Accum> bins(edges.size() + 1);
        for (auto i : idx) {
            const auto b = static_cast<std::size_t>(
                std::lower_bound(edges.begin(), edges.end(), X(i, f)) - edges.begin());
            bins[b].add(residual(i), hess(i));
        }
        const auto n = static_cast<Eigen::Index>(idx.size());
        Accum left;
        for (std::size_t b = 0; b + 1 < bins.size(); ++b) {
            left.r += bins[b].r;
            left.r2 += bins[b].r2;
            left.h += bins[b].h;
            left.cnt += bins[b].cnt;
            if (left.cnt == 0 || left.cnt == n) continue;
            if (left.cnt < params.min_samples_leaf || n - left.cnt < params.min_samples_leaf)
                continue;
            const double gain = split_gain(total, left);
            if (gain > best.gain) {
                best.gain = gain;
                best.feature = static_cast<int>(f);
                best.threshold = edges[b];
            }
        }
    }

    void partition(const std::vector<Eigen::Index>& idx, const Candidate& c,
                   std::vector<Eigen::Index>& left, std::vector<Eigen::Index>& right) const {
        for (auto i : idx) {
            (X(i, c.feature) <= c.threshold ? left : right).push_back(i);
        }
    }

    tree::TreePtr make_leaf(const Accum& total) const {
        auto node = std::make_unique<tree::TreeNode>();
        node->n_samples = total.cnt;
        node->value = leaf_value(total);
        return node;
    }

    tree::TreePtr grow(std::vector<Eigen::Index>& root_idx) {
        if (params.growth == Growth::LossGuide) return grow_loss_guide(root_idx);
        return grow_depthwise(root_idx, 0);
    }

    tree::TreePtr grow_depthwise(std::vector<Eigen::Index>& idx, int level) {
        const Accum total = accumulate(idx);
        auto node = make_leaf(total);
        if (level >= params.max_depth) return node;
        const Candidate c = best_split(idx, total, level);
        if (c.feature < 0) return node;
        std::vector<Eigen::Index> left, right;
        partition(idx, c, left, right);
        if (left.empty() || right.empty()) return node;
        node->feature = c.feature;
        node->threshold = c.threshold;
        node->left = grow_depthwise(left, level + 1);
        node->right = grow_depthwise(right, level + 1);
        return node;
    }

    struct OpenLeaf {
        tree::TreeNode* node;
        std::vector<Eigen::Index> idx;
        Candidate cand;
        int level;
        std::uint64_t order;  // creation order, deterministic tie-break
    };

    tree::TreePtr grow_loss_guide(std::vector<Eigen::Index>& root_idx) {
        auto cmp = [](const OpenLeaf& a, const OpenLeaf& b) {
            if (a.cand.gain != b.cand.gain) return a.cand.gain < b.cand.gain;
            return a.order > b.order;
        };
        std::priority_queue<OpenLeaf, std::vector<OpenLeaf>, decltype(cmp)> heap(cmp);
        std::uint64_t counter = 0;

        const Accum root_total = accumulate(root_idx);
        auto root = make_leaf(root_total);
        {
            Candidate c = best_split(root_idx, root_total, 0);
            if (c.feature >= 0) heap.push({root.get(), root_idx, c, 0, counter++});
        }
        int n_leaves = 1;
        while (!heap.empty() && n_leaves < params.max_leaves) {
            OpenLeaf top = std::move(const_cast<OpenLeaf&>(heap.top()));
            heap.pop();
            std::vector<Eigen::Index> left, right;
            partition(top.idx, top.cand, left, right);
            if (left.empty() || right.empty()) continue;
            top.node->feature = top.cand.feature;
            top.node->threshold = top.cand.threshold;
            const Accum lt = accumulate(left), rt = accumulate(right);
            top.node->left = make_leaf(lt);
            top.node->right = make_leaf(rt);
            ++n_leaves;
            const int child_level = top.level + 1;
            if (child_level < params.max_depth) {
                Candidate cl = best_split(left, lt, child_level);
                if (cl.feature >= 0)
                    heap.push({top.node->left.get(), std::move(left), cl, child_level, counter++});
                Candidate cr = best_split(right, rt, child_level);
                if (cr.feature >= 0)
                    heap.push({top.node->right.get(), std::move(right), cr, child_level, counter++});
            }
        }
        return root;
    }
};

std::vector<std::vector<double>> quantile_edges(const Matrix& X, int max_bins) {
    std::vector<std::vector<double>> edges(static_cast<std::size_t>(X.cols()));
    if (max_bins <= 1) return edges;
    std::vector<double> col(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index f = 0; f < X.cols(); ++f) {
        for (Eigen::Index i = 0; i < X.rows(); ++i) col[static_cast<std::size_t>(i)] = X(i, f);
        std::sort(col.begin(), col.end());
        std::vector<double>& e = edges[static_cast<std::size_t>(f)];
        for (int b = 1; b < max_bins; ++b) {
            const auto pos = static_cast<std::size_t>(
                std::min<double>(static_cast<double>(col.size()) - 1.0,
                                 std::floor(static_cast<double>(b) / max_bins * col.size())));
            const double v = col[pos];
            if (e.empty() || v > e.back()) e.push_back(v);
        }
        // An edge at or past the max value would leave the last bin empty.
        while (!e.empty() && e.back() >= col.back()) e.pop_back();
    }
    return edges;
}

}  // namespace

Array BoostedEnsemble::raw_scores(const Matrix& X) const {
    Array out = Array::Constant(X.rows(), base_score);
    for (const auto& t : trees) out += learning_rate * tree::predict_tree(*t, X);
    return out;
}

Array BoostedEnsemble::predict(const Matrix& X) const { return sigmoid(raw_scores(X)); }

BoostedEnsemble fit_boosted(const Matrix& X, const Array& y, const BoostParams& params) {
    const auto n = X.rows();
    if (n == 0) throw FitError("fit_boosted: empty train split");
    if (y.size() != n) throw ConfigError("fit_boosted: label count mismatch");
    const double pos_rate = y.mean();
    if (pos_rate <= 0.0 || pos_rate >= 1.0)
        throw FitError("fit_boosted: train split has a single class");
    if (params.n_estimators < 0 || params.learning_rate < 0.0)
        throw ConfigError("fit_boosted: invalid parameters");

    BoostedEnsemble model;
    model.base_score = std::log(pos_rate / (1.0 - pos_rate));
    model.learning_rate = params.learning_rate;

    const auto edges = quantile_edges(X, params.max_bins);
    const bool use_bins = params.max_bins > 1;

    Array raw = Array::Constant(n, model.base_score);
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});

    for (int m = 0; m < params.n_estimators; ++m) {
        const Array p = sigmoid(raw);
        const Array residual = y - p;
        const Array hess = p * (1.0 - p);
        Grower grower(X, residual, hess, params, mix_seed(params.seed, static_cast<std::uint64_t>(m)),
                      use_bins ? &edges : nullptr);
        std::vector<Eigen::Index> root_idx = idx;
        auto t = grower.grow(root_idx);
        raw += params.learning_rate * tree::predict_tree(*t, X);
        model.trees.push_back(std::move(t));

        const Array scores = sigmoid(raw);
        double loss = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double s = clamp_prob(scores(i));
            loss += -(y(i) * std::log(s) + (1.0 - y(i)) * std::log(1.0 - s));
        }
        model.train_loss.push_back(loss / static_cast<double>(n));
    }
    return model;
}

}  // namespace tabbench::boosting
