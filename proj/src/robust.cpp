#include "tabbench/robust.hpp"

#include <algorithm>
#include <numeric>

#include "tabbench/metrics.hpp"

namespace tabbench::robust {

namespace {

// Indices ordered by descending loss; equal losses keep ascending index
// order so the lowest index is dropped first.
std::vector<Eigen::Index> order_desc(const Array& losses) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(losses.size()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return losses(a) > losses(b); });
    return idx;
}

// Split example indices into the epsilon-largest-loss set (dropped) and
// the kept remainder, in original index order.
std::vector<Eigen::Index> doro_kept(const Array& losses, double epsilon) {
    const auto n = losses.size();
    const auto drop = static_cast<Eigen::Index>(std::ceil(epsilon * static_cast<double>(n)));
    if (drop >= n) throw ObjectiveError("DORO cut excludes every example in the batch");
    auto idx = order_desc(losses);
    idx.erase(idx.begin(), idx.begin() + drop);
    std::sort(idx.begin(), idx.end());
    return idx;
}

Array gather(const Array& losses, const std::vector<Eigen::Index>& idx) {
    Array out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) out(static_cast<Eigen::Index>(j)) = losses(idx[j]);
    return out;
}

Array scatter(const Array& sub_weights, const std::vector<Eigen::Index>& idx, Eigen::Index n) {
    Array out = Array::Zero(n);
    for (std::size_t j = 0; j < idx.size(); ++j)
        out(idx[j]) = sub_weights(static_cast<Eigen::Index>(j));
    return out;
}

Eigen::Vector4d group_means(const Array& losses, const IntVector& group_ids,
                            Eigen::Vector4i* counts_out = nullptr) {
    Eigen::Vector4d sums = Eigen::Vector4d::Zero();
    Eigen::Vector4i counts = Eigen::Vector4i::Zero();
    for (Eigen::Index i = 0; i < losses.size(); ++i) {
        const int g = group_ids(i);
        if (g < 0 || g >= kNumGroups) throw DataError("batch_loss: group id out of range");
        sums(g) += losses(i);
        counts(g) += 1;
    }
    Eigen::Vector4d means = Eigen::Vector4d::Zero();  // absent groups contribute 0
    for (int g = 0; g < kNumGroups; ++g) {
        if (counts(g) > 0) means(g) = sums(g) / counts(g);
    }
    if (counts_out) *counts_out = counts;
    return means;
}

}  // namespace

void Objective::validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("objective: alpha must be in (0, 1]");
    if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ConfigError("objective: epsilon must be in [0, 1)");
    if (!(eta > 0.0)) throw ConfigError("objective: eta must be positive");
    if (!(lambda >= 0.0)) throw ConfigError("objective: lambda must be nonnegative");
}

std::string Objective::variant_name() const {
    switch (variant) {
        case Variant::ERM: return "erm";
        case Variant::CVaR: return "cvar";
        case Variant::Chi2: return "chi2";
        case Variant::CVaRDoro: return "cvar_doro";
        case Variant::Chi2Doro: return "chi2_doro";
        case Variant::GroupDRO: return "group_dro";
        case Variant::MWLD: return "mwld";
    }
    return "unknown";
}

double group_dro_update(GroupWeights& state, const Eigen::Vector4d& group_mean_losses) {
    if (!group_mean_losses.allFinite()) throw FitError("group DRO: non-finite group loss");
    Eigen::Vector4d w = state.w.array() * (state.eta * group_mean_losses.array()).exp();
    const double total = w.sum();
    if (!(total > 0.0) || !w.allFinite()) throw FitError("group DRO: weight update overflowed");
    state.w = w / total;
    return state.w.dot(group_mean_losses);
}

BatchLoss batch_loss(const Objective& objective, const Array& losses, const IntVector& group_ids,
                     GroupWeights* state) {
    const auto n = losses.size();
    if (n < 1) throw ObjectiveError("batch_loss: empty batch");
    if (group_ids.size() != n) throw DataError("batch_loss: group id count mismatch");

    BatchLoss out;
    switch (objective.variant) {
        case Variant::ERM: {
            out.weights = Array::Constant(n, 1.0 / static_cast<double>(n));
            out.loss = losses.mean();
            return out;
        }
        case Variant::CVaR: {
            out.weights = metrics::cvar_weights(losses, objective.alpha);
            out.loss = (out.weights * losses).sum();
            return out;
        }
        case Variant::Chi2: {
            out.weights = metrics::chi2_weights(losses, objective.chi2_rho());
            out.loss = (out.weights * losses).sum();
            return out;
        }
        case Variant::CVaRDoro:
        case Variant::Chi2Doro: {
            const auto kept = doro_kept(losses, objective.epsilon);
            const Array sub = gather(losses, kept);
            const Array sub_w = objective.variant == Variant::CVaRDoro
                                    ? metrics::cvar_weights(sub, objective.alpha)
                                    : metrics::chi2_weights(sub, objective.chi2_rho());
            out.weights = scatter(sub_w, kept, n);
            out.loss = (out.weights * losses).sum();
            return out;
        }
        case Variant::GroupDRO: {
            if (!state) throw ConfigError("batch_loss: group DRO requires group-weight state");
            Eigen::Vector4i counts;
            const Eigen::Vector4d means = group_means(losses, group_ids, &counts);
            out.loss = group_dro_update(*state, means);
            out.weights = Array::Zero(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                const int g = group_ids(i);
                out.weights(i) = state->w(g) / static_cast<double>(counts(g));
            }
            return out;
        }
        case Variant::MWLD: {
            const double mean = losses.mean();
            const double popvar = (losses - mean).square().mean();
            out.loss = mean + objective.lambda * popvar;
            out.weights = (1.0 + 2.0 * objective.lambda * (losses - mean)) /
                          static_cast<double>(n);
            return out;
        }
    }
    throw ConfigError("batch_loss: unknown objective variant");
}

double validation_objective(const Objective& objective, const Array& losses,
                            const IntVector& group_ids) {
    if (losses.size() < 1) throw DataError("validation_objective: empty validation split");
    switch (objective.variant) {
        case Variant::ERM:
            return losses.mean();
        case Variant::CVaR:
            return metrics::cvar_risk(losses, objective.alpha);
        case Variant::Chi2:
            return metrics::chi2_risk(losses, objective.chi2_rho());
        case Variant::CVaRDoro:
            return metrics::doro_cvar_risk(losses, objective.alpha, objective.epsilon);
        case Variant::Chi2Doro: {
            const auto kept = doro_kept(losses, objective.epsilon);
            return metrics::chi2_risk(gather(losses, kept), objective.chi2_rho());
        }
        case Variant::GroupDRO: {
            Eigen::Vector4i counts;
            const Eigen::Vector4d means = group_means(losses, group_ids, &counts);
            double worst = -std::numeric_limits<double>::infinity();
            for (int g = 0; g < kNumGroups; ++g) {
                if (counts(g) > 0) worst = std::max(worst, means(g));
            }
            return worst;
        }
        case Variant::MWLD: {
            const double mean = losses.mean();
            return mean + objective.lambda * (losses - mean).square().mean();
        }
    }
    throw ConfigError("validation_objective: unknown objective variant");
}

}  // namespace tabbench::robust
