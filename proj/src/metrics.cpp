#include "tabbench/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <sstream>

namespace tabbench::metrics {

void ScoredPredictions::validate() const {
    if (score.size() == 0) throw DataError("empty predictions");
    if (score.size() != label.size() || score.size() != group_id.size())
        throw ConfigError("prediction arrays have mismatched lengths");
    for (Eigen::Index i = 0; i < score.size(); ++i) {
        if (!std::isfinite(score(i)) || score(i) < 0.0 || score(i) > 1.0)
            throw DataError("score outside [0,1] at row " + std::to_string(i));
        if (group_id(i) < 0 || group_id(i) >= kNumGroups)
            throw DataError("group id outside [0,4) at row " + std::to_string(i));
    }
}

std::string ReportEntry::csv_row() const {
    std::ostringstream os;
    os.precision(9);
    os << metric << ',' << overall;
    for (double v : per_group) os << ',' << v;
    os << ',' << worst_group << ',' << disparity;
    for (auto n : group_n) os << ',' << n;
    return os.str();
}

double accuracy(const ScoredPredictions& preds, double threshold) {
    preds.validate();
    Eigen::Index correct = 0;
    for (Eigen::Index i = 0; i < preds.size(); ++i) {
        const double yhat = preds.score(i) >= threshold ? 1.0 : 0.0;
        if (yhat == preds.label(i)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(preds.size());
}

Array bce_losses(const Array& score, const Array& label) {
    Array out(score.size());
    for (Eigen::Index i = 0; i < score.size(); ++i) {
        const double s = clamp_prob(score(i));
        out(i) = -label(i) * std::log(s) - (1.0 - label(i)) * std::log(1.0 - s);
    }
    return out;
}

double cross_entropy(const ScoredPredictions& preds) {
    preds.validate();
    return bce_losses(preds.score, preds.label).mean();
}

ReportEntry accuracy_report(const ScoredPredictions& preds, double threshold) {
    return report(preds, "accuracy", MetricKind::Benefit,
                  [threshold](const ScoredPredictions& p) { return accuracy(p, threshold); });
}

ReportEntry cross_entropy_report(const ScoredPredictions& preds) {
    return report(preds, "cross_entropy", MetricKind::Loss,
                  [](const ScoredPredictions& p) { return cross_entropy(p); });
}

namespace {

// Indices sorted by loss descending; equal losses keep ascending index order.
std::vector<Eigen::Index> sort_desc(const Array& losses) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(losses.size()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return losses(a) > losses(b); });
    return idx;
}

double check_alpha(double alpha, Eigen::Index n) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("cvar: alpha must be in (0,1]");
    if (alpha * static_cast<double>(n) < 1.0) {
        std::cerr << "warning: alpha*n < 1; clamping alpha to 1/n\n";
        return 1.0 / static_cast<double>(n);
    }
    return alpha;
}

}  // namespace

Array cvar_weights(const Array& losses, double alpha) {
    const Eigen::Index n = losses.size();
    if (n == 0) throw DataError("cvar: empty losses");
    alpha = check_alpha(alpha, n);
    const double an = alpha * static_cast<double>(n);
    const double cap = 1.0 / an;
    const auto order = sort_desc(losses);
    const auto k = static_cast<Eigen::Index>(std::floor(an));

    Array q = Array::Zero(n);
    double assigned = 0.0;
    for (Eigen::Index r = 0; r < k && r < n; ++r) {
        q(order[static_cast<std::size_t>(r)]) = cap;
        assigned += cap;
    }
    const double rem = 1.0 - assigned;
    if (rem > 1e-15 && k < n) q(order[static_cast<std::size_t>(k)]) = rem;
    return q;
}

double cvar_risk(const Array& losses, double alpha) {
    return (cvar_weights(losses, alpha) * losses).sum();
}

double doro_cvar_risk(const Array& losses, double alpha, double epsilon) {
    const Eigen::Index n = losses.size();
    if (n == 0) throw DataError("doro: empty losses");
    if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ConfigError("doro: epsilon must be in [0,1)");
    const auto drop = static_cast<Eigen::Index>(std::ceil(epsilon * static_cast<double>(n)));
    if (drop >= n) throw ConfigError("doro: epsilon drops every point");
    if (drop == 0) return cvar_risk(losses, alpha);

    const auto order = sort_desc(losses);
    Array kept(n - drop);
    // Keep original order among survivors.
    std::vector<bool> dropped(static_cast<std::size_t>(n), false);
    for (Eigen::Index r = 0; r < drop; ++r) dropped[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = true;
    Eigen::Index j = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        if (!dropped[static_cast<std::size_t>(i)]) kept(j++) = losses(i);
    return cvar_risk(kept, alpha);
}

Array chi2_weights(const Array& losses, double rho) {
    const Eigen::Index n = losses.size();
    if (n == 0) throw DataError("chi2: empty losses");
    if (rho < 0.0) throw ConfigError("chi2: rho must be nonnegative");
    const double dn = static_cast<double>(n);
    Array q = Array::Constant(n, 1.0 / dn);
    if (rho == 0.0 || n == 1) return q;

    // A point mass costs (n-1)/2 in chi^2 divergence; beyond that the
    // maximizing distribution is degenerate on the largest loss.
    if (rho >= (dn - 1.0) / 2.0) {
        Eigen::Index best = 0;
        losses.maxCoeff(&best);
        q.setZero();
        q(best) = 1.0;
        return q;
    }

    // Active-set elimination: on the current support the maximizer is the
    // minimum-divergence point plus a step along the centered losses that
    // exhausts the divergence budget; entries pushed negative are clamped to
    // zero and removed.
    std::vector<Eigen::Index> support(static_cast<std::size_t>(n));
    std::iota(support.begin(), support.end(), Eigen::Index{0});
    while (true) {
        const double m = static_cast<double>(support.size());
        double mean = 0.0;
        for (auto i : support) mean += losses(i);
        mean /= m;
        double ss = 0.0;
        for (auto i : support) ss += (losses(i) - mean) * (losses(i) - mean);

        const double base = 1.0 / dn + (dn - m) / (dn * m);
        double budget = rho - (dn - m) / (2.0 * m);
        if (budget < 0.0) budget = 0.0;

        q.setZero();
        if (ss <= 0.0) {
            for (auto i : support) q(i) = 1.0 / m;
            return q;
        }
        const double t = std::sqrt(2.0 * budget / (dn * ss));
        bool clamped = false;
        std::vector<Eigen::Index> next;
        for (auto i : support) {
            const double v = base + t * (losses(i) - mean);
            if (v < 0.0) {
                clamped = true;
            } else {
                next.push_back(i);
                q(i) = v;
            }
        }
        if (!clamped) return q;
        support = std::move(next);
    }
}

double chi2_risk(const Array& losses, double rho) {
    return (chi2_weights(losses, rho) * losses).sum();
}

double demographic_parity_diff(const ScoredPredictions& preds, double threshold) {
    preds.validate();
    std::vector<double> rates;
    for (int g = 0; g < kNumGroups; ++g) {
        Eigen::Index n = 0, pos = 0;
        for (Eigen::Index i = 0; i < preds.size(); ++i) {
            if (preds.group_id(i) != g) continue;
            ++n;
            if (preds.score(i) >= threshold) ++pos;
        }
        if (n > 0) rates.push_back(static_cast<double>(pos) / static_cast<double>(n));
    }
    if (rates.size() < 2) throw DataError("demographic parity: fewer than 2 nonempty groups");
    const auto [lo, hi] = std::minmax_element(rates.begin(), rates.end());
    return *hi - *lo;
}

double equalized_odds_diff(const ScoredPredictions& preds, double threshold) {
    preds.validate();
    std::vector<double> tprs, fprs;
    for (int g = 0; g < kNumGroups; ++g) {
        Eigen::Index tp = 0, fn = 0, fp = 0, tn = 0;
        for (Eigen::Index i = 0; i < preds.size(); ++i) {
            if (preds.group_id(i) != g) continue;
            const bool yhat = preds.score(i) >= threshold;
            if (preds.label(i) == 1.0) {
                yhat ? ++tp : ++fn;
            } else {
                yhat ? ++fp : ++tn;
            }
        }
        if (tp + fn == 0 || fp + tn == 0) {
            if (tp + fn + fp + tn > 0)
                std::cerr << "warning: group " << g << " lacks both classes; excluded from EO\n";
            continue;
        }
        tprs.push_back(static_cast<double>(tp) / static_cast<double>(tp + fn));
        fprs.push_back(static_cast<double>(fp) / static_cast<double>(fp + tn));
    }
    if (tprs.size() < 2) throw DataError("equalized odds: fewer than 2 comparable groups");
    const auto [tlo, thi] = std::minmax_element(tprs.begin(), tprs.end());
    const auto [flo, fhi] = std::minmax_element(fprs.begin(), fprs.end());
    return std::max(*thi - *tlo, *fhi - *flo);
}

namespace {

// Continued-fraction evaluation of the regularized incomplete beta (Lentz).
double betacf(double a, double b, double x) {
    constexpr int max_iter = 300;
    constexpr double eps = 3e-16;
    constexpr double fpmin = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const double dm = m;
        double aa = dm * (b - dm) * x / ((qam + 2.0 * dm) * (a + 2.0 * dm));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + dm) * (qab + dm) * x / ((a + 2.0 * dm) * (qap + 2.0 * dm));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    return h;
}

double beta_quantile(double a, double b, double p) {
    // Bisection; the CDF is monotone in x, tolerance 1e-8 on x.
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (incomplete_beta(a, b, mid) < p) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_beta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    const double front = std::exp(a * std::log(x) + b * std::log(1.0 - x) - ln_beta);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * betacf(a, b, x) / a;
    }
    return 1.0 - std::exp(b * std::log(1.0 - x) + a * std::log(x) - ln_beta) * betacf(b, a, 1.0 - x) / b;
}

BinomialCI clopper_pearson(long k, long n, double level) {
    if (n < 1) throw ConfigError("clopper_pearson: n must be >= 1");
    if (k < 0 || k > n) throw ConfigError("clopper_pearson: require 0 <= k <= n");
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("clopper_pearson: bad level");
    const double tail = (1.0 - level) / 2.0;
    BinomialCI ci{0.0, 1.0, k, n, level};
    if (k > 0) ci.lower = beta_quantile(static_cast<double>(k), static_cast<double>(n - k + 1), tail);
    if (k < n) ci.upper = beta_quantile(static_cast<double>(k + 1), static_cast<double>(n - k), 1.0 - tail);
    return ci;
}

double pearson_r(const Array& xs, const Array& ys) {
    if (xs.size() != ys.size()) throw ConfigError("pearson_r: length mismatch");
    if (xs.size() < 2) throw ConfigError("pearson_r: need at least 2 points");
    const double mx = xs.mean();
    const double my = ys.mean();
    const Array dx = xs - mx;
    const Array dy = ys - my;
    const double sx = std::sqrt((dx * dx).sum());
    const double sy = std::sqrt((dy * dy).sum());
    if (sx == 0.0 || sy == 0.0) return std::numeric_limits<double>::quiet_NaN();
    double r = (dx * dy).sum() / (sx * sy);
    return std::clamp(r, -1.0, 1.0);
}

}  // namespace tabbench::metrics
