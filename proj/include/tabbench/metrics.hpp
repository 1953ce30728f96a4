#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "tabbench/common.hpp"

namespace tabbench::metrics {

// Model scores in [0,1], binary labels, and subgroup ids in [0,4).
struct ScoredPredictions {
    Array score;
    Array label;
    IntVector group_id;

    Eigen::Index size() const { return score.size(); }
    void validate() const;
};

// One metric summarized overall and over the four subgroups. Groups with no
// samples carry n=0 and are excluded from worst_group / disparity.
struct ReportEntry {
    std::string metric;
    double overall = 0.0;
    std::array<double, kNumGroups> per_group{};
    std::array<Eigen::Index, kNumGroups> group_n{};
    double worst_group = 0.0;
    double disparity = 0.0;

    std::string csv_row() const;
};

struct BinomialCI {
    double lower;
    double upper;
    long k;
    long n;
    double level;
};

enum class MetricKind { Benefit, Loss };

double accuracy(const ScoredPredictions& preds, double threshold = 0.5);
double cross_entropy(const ScoredPredictions& preds);

// Per-example binary cross-entropy, the default loss inside the risk metrics.
Array bce_losses(const Array& score, const Array& label);

// Summarize a scalar metric over the four subgroups. `eval` is applied to
// the full set and to each nonempty group; worst_group is the min for
// benefit metrics and the max for loss metrics.
template <typename Eval>
ReportEntry report(const ScoredPredictions& preds, const std::string& name,
                   MetricKind kind, Eval&& eval);

ReportEntry accuracy_report(const ScoredPredictions& preds, double threshold = 0.5);
ReportEntry cross_entropy_report(const ScoredPredictions& preds);

// CVaR at level alpha: the exact maximum of sum(q_i * l_i) over the simplex
// with q_i <= 1/(alpha*n). Returns the maximizing weights as well so the
// robust objectives can reuse them.
double cvar_risk(const Array& losses, double alpha);
Array cvar_weights(const Array& losses, double alpha);

// CVaR after dropping the ceil(eps*n) largest losses (ties broken by index,
// lower index dropped first).
double doro_cvar_risk(const Array& losses, double alpha, double epsilon);

// sup of sum(q_i * l_i) over the simplex with
// (1/2) * n * sum((q_i - 1/n)^2) <= rho, solved by active-set elimination.
double chi2_risk(const Array& losses, double rho);
Array chi2_weights(const Array& losses, double rho);

double demographic_parity_diff(const ScoredPredictions& preds, double threshold = 0.5);
double equalized_odds_diff(const ScoredPredictions& preds, double threshold = 0.5);

// Exact binomial interval via Beta quantiles (bisection on the regularized
// incomplete beta, absolute tolerance 1e-8 on the endpoints).
BinomialCI clopper_pearson(long k, long n, double level = 0.95);

// Regularized incomplete beta I_x(a, b); exposed for the test oracles.
double incomplete_beta(double a, double b, double x);

// Pearson product-moment correlation; NaN when either series has zero
// variance.
double pearson_r(const Array& xs, const Array& ys);

// --- implementation of the templated report ---

template <typename Eval>
ReportEntry report(const ScoredPredictions& preds, const std::string& name,
                   MetricKind kind, Eval&& eval) {
    preds.validate();
    ReportEntry entry;
    entry.metric = name;
    entry.overall = eval(preds);

    bool any_group = false;
    double worst = 0.0;
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (int g = 0; g < kNumGroups; ++g) {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index i = 0; i < preds.size(); ++i) {
            if (preds.group_id(i) == g) idx.push_back(i);
        }
        entry.group_n[g] = static_cast<Eigen::Index>(idx.size());
        if (idx.empty()) {
            entry.per_group[g] = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        ScoredPredictions sub;
        sub.score.resize(static_cast<Eigen::Index>(idx.size()));
        sub.label.resize(static_cast<Eigen::Index>(idx.size()));
        sub.group_id.resize(static_cast<Eigen::Index>(idx.size()));
        for (Eigen::Index j = 0; j < sub.size(); ++j) {
            sub.score(j) = preds.score(idx[static_cast<std::size_t>(j)]);
            sub.label(j) = preds.label(idx[static_cast<std::size_t>(j)]);
            sub.group_id(j) = g;
        }
        double v = eval(sub);
        entry.per_group[g] = v;
        any_group = true;
        if (first) {
            worst = v;
            lo = hi = v;
            first = false;
        } else {
            worst = (kind == MetricKind::Benefit) ? std::min(worst, v) : std::max(worst, v);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (!any_group) throw DataError("report: all groups empty");
    entry.worst_group = worst;
    entry.disparity = hi - lo;
    return entry;
}

}  // namespace tabbench::metrics
