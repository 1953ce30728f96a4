#pragma once

// Independent reference implementations used only by the tests. These take
// different algorithmic routes than the library code they check.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "tabbench/common.hpp"

namespace oracles {

using tabbench::Array;

// CVaR via the Rockafellar-Uryasev form:
//   min_eta  eta + (1/(alpha n)) * sum (l_i - eta)_+
// The minimum is attained at one of the loss values.
inline double cvar_dual(const Array& losses, double alpha) {
    const double an = alpha * static_cast<double>(losses.size());
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < losses.size(); ++j) {
        const double eta = losses(j);
        double s = 0.0;
        for (Eigen::Index i = 0; i < losses.size(); ++i) s += std::max(0.0, losses(i) - eta);
        best = std::min(best, eta + s / an);
    }
    return best;
}

// Euclidean projection onto the probability simplex.
inline Array project_simplex(Array v) {
    const Eigen::Index n = v.size();
    std::vector<double> u(v.data(), v.data() + n);
    std::sort(u.begin(), u.end(), std::greater<>());
    double css = 0.0, tau = 0.0;
    int rho = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        css += u[static_cast<std::size_t>(i)];
        const double t = (css - 1.0) / static_cast<double>(i + 1);
        if (u[static_cast<std::size_t>(i)] - t > 0.0) {
            rho = static_cast<int>(i) + 1;
            tau = t;
        }
    }
    (void)rho;
    for (Eigen::Index i = 0; i < n; ++i) v(i) = std::max(0.0, v(i) - tau);
    return v;
}

// chi^2-constrained risk via Lagrangian duality: for fixed multiplier
// lam > 0 the inner problem
//   max_{q in simplex} q.l - lam * (n/2) * ||q - u||^2
// is solved exactly by a simplex projection of u + l/(lam n); the dual
// g(lam) = lam*rho + inner(lam) is convex and is minimized by golden
// section over a wide bracket.
inline double chi2_dual(const Array& losses, double rho) {
    const Eigen::Index n = losses.size();
    const double dn = static_cast<double>(n);
    const Array u = Array::Constant(n, 1.0 / dn);
    if (rho <= 0.0) return losses.mean();
    if (n == 1) return losses(0);

    auto g = [&](double lam) {
        Array q = project_simplex(u + losses / (lam * dn));
        const double div = 0.5 * dn * ((q - u) * (q - u)).sum();
        return lam * rho + (q * losses).sum() - lam * div;
    };

    // If even a vanishing multiplier keeps the divergence within budget, the
    // constraint is slack and the optimum is the unconstrained simplex max.
    const double pm_div = (dn - 1.0) / 2.0;
    if (rho >= pm_div) return losses.maxCoeff();

    double lo = 1e-9, hi = 1e9;
    for (int it = 0; it < 300; ++it) {
        const double m1 = lo + (hi - lo) / 3.0;
        const double m2 = hi - (hi - lo) / 3.0;
        if (g(m1) < g(m2)) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    return g(0.5 * (lo + hi));
}

// Beta CDF by numerical integration of the density (Simpson), independent of
// the continued-fraction route in the library.
inline double beta_cdf_quadrature(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_beta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    auto pdf = [&](double t) {
        if (t <= 0.0 || t >= 1.0) return 0.0;
        return std::exp((a - 1.0) * std::log(t) + (b - 1.0) * std::log(1.0 - t) - ln_beta);
    };
    const int steps = 20000;
    const double h = x / steps;
    double s = pdf(0.0) + pdf(x);
    for (int i = 1; i < steps; ++i) s += (i % 2 == 1 ? 4.0 : 2.0) * pdf(i * h);
    return s * h / 3.0;
}

struct Point {
    double x, y;
    std::size_t id;
};

// Brute-force upper-right convex envelope: deduplicate, keep the Pareto
// (max-max) nondominated points, then discard any point lying on or below a
// segment between two other surviving points.
inline std::vector<std::size_t> frontier_brute(std::vector<Point> pts) {
    // Dedup coordinates, keeping the smallest id.
    std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
        if (a.x != b.x) return a.x < b.x;
        if (a.y != b.y) return a.y < b.y;
        return a.id < b.id;
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const Point& a, const Point& b) { return a.x == b.x && a.y == b.y; }),
              pts.end());

    std::vector<Point> pareto;
    for (const auto& p : pts) {
        bool dominated = false;
        for (const auto& q : pts) {
            if ((q.x > p.x && q.y >= p.y) || (q.x >= p.x && q.y > p.y)) {
                dominated = true;
                break;
            }
        }
        if (!dominated) pareto.push_back(p);
    }

    std::vector<std::size_t> out;
    for (const auto& p : pareto) {
        bool cut = false;
        for (const auto& a : pareto) {
            for (const auto& b : pareto) {
                if (!(a.x < p.x && p.x < b.x)) continue;
                const double yi = a.y + (b.y - a.y) * (p.x - a.x) / (b.x - a.x);
                if (yi >= p.y) {
                    cut = true;
                    break;
                }
            }
            if (cut) break;
        }
        if (!cut) out.push_back(p.id);
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace oracles
