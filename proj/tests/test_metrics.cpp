#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "tabbench/metrics.hpp"

using namespace tabbench;
using namespace tabbench::metrics;

namespace {

Array arr(std::initializer_list<double> v) {
    Array a(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) a(i++) = x;
    return a;
}

IntVector ivec(std::initializer_list<int> v) {
    IntVector a(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (int x : v) a(i++) = x;
    return a;
}

ScoredPredictions preds(std::initializer_list<double> s, std::initializer_list<double> y,
                        std::initializer_list<int> g) {
    return {arr(s), arr(y), ivec(g)};
}

}  // namespace

TEST_CASE("accuracy basics") {
    CHECK(accuracy(preds({0.7, 0.2}, {1, 0}, {0, 0})) == 1.0);
    CHECK(accuracy(preds({0.5}, {1}, {0})) == 1.0);  // >= convention at the boundary
    CHECK(accuracy(preds({0.6, 0.6, 0.1, 0.1}, {1, 0, 1, 0}, {0, 0, 0, 0})) == 0.5);
    CHECK_THROWS_AS(accuracy(ScoredPredictions{Array(0), Array(0), IntVector(0)}), DataError);
}

TEST_CASE("cross entropy basics") {
    CHECK(cross_entropy(preds({0.5}, {1}, {0})) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(cross_entropy(preds({1.0}, {1}, {0})) <= 1e-11);
    CHECK(cross_entropy(preds({0.9, 0.1}, {1, 0}, {0, 0})) ==
          doctest::Approx(-std::log(0.9)).epsilon(1e-12));
}

TEST_CASE("report worst group and disparity") {
    // Group accuracies 1.0, 0.5, 0.75, 0.75.
    auto p = preds({0.9, 0.1, 0.9, 0.9, 0.9, 0.9, 0.9, 0.1, 0.9, 0.9, 0.9, 0.1},
                   {1, 0, 1, 0, 1, 1, 1, 1, 1, 1, 1, 1},
                   {0, 0, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3});
    auto e = accuracy_report(p);
    CHECK(e.per_group[0] == 1.0);
    CHECK(e.per_group[1] == 0.5);
    CHECK(e.worst_group == 0.5);
    CHECK(e.disparity == 0.5);

    auto same = accuracy_report(preds({0.9, 0.1, 0.9, 0.1}, {1, 0, 1, 0}, {0, 1, 2, 3}));
    CHECK(same.disparity == 0.0);
}

TEST_CASE("report excludes empty groups") {
    auto p = preds({0.9, 0.1}, {1, 0}, {0, 1});
    auto e = accuracy_report(p);
    CHECK(e.group_n[2] == 0);
    CHECK(e.worst_group == 1.0);
}

TEST_CASE("cvar closed form") {
    CHECK(cvar_risk(arr({1, 2, 3, 4}), 1.0) == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(cvar_risk(arr({1, 2, 3, 4}), 0.5) == doctest::Approx(3.5).epsilon(1e-12));
    // alpha*n = 1.5: (4 + 0.5*3)/1.5
    CHECK(cvar_risk(arr({1, 2, 3, 4}), 0.375) == doctest::Approx(5.5 / 1.5).epsilon(1e-12));
    CHECK_THROWS_AS(cvar_risk(arr({1.0}), 1.5), ConfigError);
}

TEST_CASE("cvar matches dual oracle on random instances") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> loss(0.0, 5.0);
    for (int rep = 0; rep < 300; ++rep) {
        const int n = 1 + static_cast<int>(rng() % 8);
        Array l(n);
        for (int i = 0; i < n; ++i) l(i) = loss(rng);
        std::uniform_real_distribution<double> ad(1.0 / n, 1.0);
        const double alpha = ad(rng);
        CHECK(cvar_risk(l, alpha) == doctest::Approx(oracles::cvar_dual(l, alpha)).epsilon(1e-9));
    }
}

TEST_CASE("cvar properties") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> loss(0.0, 3.0);
    for (int rep = 0; rep < 50; ++rep) {
        const int n = 2 + static_cast<int>(rng() % 7);
        Array l(n);
        for (int i = 0; i < n; ++i) l(i) = loss(rng);
        double prev = l.maxCoeff() + 1e-9;
        for (double alpha = 1.0 / n; alpha <= 1.0; alpha += 0.07) {
            const double v = cvar_risk(l, alpha);
            CHECK(v <= prev + 1e-9);  // monotone nonincreasing in alpha
            CHECK(v >= l.mean() - 1e-9);
            CHECK(v <= l.maxCoeff() + 1e-9);
            prev = v;
        }
        // translation equivariance
        const double c = 1.7;
        CHECK(cvar_risk(l + c, 0.4) == doctest::Approx(cvar_risk(l, 0.4) + c).epsilon(1e-9));
        // weights respect the cap and sum to one
        const Array q = cvar_weights(l, 0.4);
        CHECK(q.sum() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(q.maxCoeff() <= 1.0 / (0.4 * n) + 1e-12);
        CHECK(q.minCoeff() >= 0.0);
    }
}

TEST_CASE("doro cvar") {
    CHECK(doro_cvar_risk(arr({10, 1, 2, 3, 4}), 0.5, 0.2) == doctest::Approx(3.5).epsilon(1e-12));
    CHECK(doro_cvar_risk(arr({1, 2, 3, 4}), 0.5, 0.0) ==
          doctest::Approx(cvar_risk(arr({1, 2, 3, 4}), 0.5)).epsilon(1e-12));
    CHECK(doro_cvar_risk(arr({2, 2, 2, 2, 2}), 0.6, 0.2) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK_THROWS_AS(doro_cvar_risk(arr({1, 2}), 0.5, 0.9), ConfigError);

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> loss(0.0, 5.0);
    for (int rep = 0; rep < 100; ++rep) {
        const int n = 3 + static_cast<int>(rng() % 6);
        Array l(n);
        for (int i = 0; i < n; ++i) l(i) = loss(rng);
        std::uniform_real_distribution<double> ad(2.0 / n, 1.0);
        const double alpha = ad(rng);
        const double eps = 0.34 * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        // dropping the largest losses cannot increase the risk
        CHECK(doro_cvar_risk(l, alpha, eps) <= cvar_risk(l, alpha) + 1e-12);
        const double c = 0.9;
        CHECK(doro_cvar_risk(l + c, alpha, eps) ==
              doctest::Approx(doro_cvar_risk(l, alpha, eps) + c).epsilon(1e-9));
    }
}

TEST_CASE("chi2 risk endpoints") {
    CHECK(chi2_risk(arr({1, 2, 3}), 0.0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(chi2_risk(arr({1, 2, 3}), 100.0) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK_THROWS_AS(chi2_risk(arr({1, 2, 3}), -0.1), ConfigError);
}

TEST_CASE("chi2 matches dual oracle on random instances") {
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> loss(0.0, 4.0);
    std::uniform_real_distribution<double> rd(0.0, 10.0);
    for (int rep = 0; rep < 300; ++rep) {
        const int n = 1 + static_cast<int>(rng() % 8);
        Array l(n);
        for (int i = 0; i < n; ++i) l(i) = loss(rng);
        const double rho = rd(rng);
        CHECK(chi2_risk(l, rho) == doctest::Approx(oracles::chi2_dual(l, rho)).epsilon(1e-6));

        const Array q = chi2_weights(l, rho);
        CHECK(q.sum() == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(q.minCoeff() >= -1e-12);
        const double div = 0.5 * n * ((q - 1.0 / n) * (q - 1.0 / n)).sum();
        CHECK(div <= rho + 1e-9);
        CHECK(chi2_risk(l, rho) >= l.mean() - 1e-9);
        const double c = 2.3;
        CHECK(chi2_risk(l + c, rho) == doctest::Approx(chi2_risk(l, rho) + c).epsilon(1e-9));
    }
}

TEST_CASE("demographic parity diff") {
    // Group positive rates 0.6, 0.4, 0.5, 0.5 over 5-row groups.
    std::vector<double> s;
    std::vector<int> g;
    auto add_group = [&](int gid, int pos, int n) {
        for (int i = 0; i < n; ++i) {
            s.push_back(i < pos ? 0.9 : 0.1);
            g.push_back(gid);
        }
    };
    add_group(0, 3, 5);
    add_group(1, 2, 5);
    add_group(2, 5, 10);
    add_group(3, 5, 10);
    ScoredPredictions p;
    p.score = Eigen::Map<Array>(s.data(), static_cast<Eigen::Index>(s.size()));
    p.label = Array::Zero(static_cast<Eigen::Index>(s.size()));
    p.group_id = Eigen::Map<IntVector>(g.data(), static_cast<Eigen::Index>(g.size()));
    CHECK(demographic_parity_diff(p) == doctest::Approx(0.2).epsilon(1e-12));

    CHECK(demographic_parity_diff(preds({0.9, 0.9, 0.1, 0.1}, {0, 0, 0, 0}, {0, 1, 2, 3})) == 1.0);
    CHECK(demographic_parity_diff(preds({0.9, 0.9}, {0, 0}, {0, 1})) == 0.0);
    CHECK_THROWS_AS(demographic_parity_diff(preds({0.9, 0.9}, {0, 0}, {0, 0})), DataError);
}

TEST_CASE("equalized odds diff") {
    // Group 0: TPR 1.0, FPR 0.0. Group 1: TPR 0.5, FPR 0.0.
    auto p = preds({0.9, 0.1, 0.9, 0.1, 0.1, 0.1}, {1, 0, 1, 1, 0, 0}, {0, 0, 1, 1, 1, 1});
    CHECK(equalized_odds_diff(p) == doctest::Approx(0.5).epsilon(1e-12));
    // identical groups -> 0
    auto q = preds({0.9, 0.1, 0.9, 0.1}, {1, 0, 1, 0}, {0, 0, 1, 1});
    CHECK(equalized_odds_diff(q) == 0.0);
    // a group without negatives is excluded
    auto r = preds({0.9, 0.1, 0.9, 0.1, 0.9}, {1, 0, 1, 0, 1}, {0, 0, 1, 1, 2});
    CHECK(equalized_odds_diff(r) == 0.0);
    CHECK_THROWS_AS(equalized_odds_diff(preds({0.9, 0.9}, {1, 1}, {0, 1})), DataError);
}

TEST_CASE("clopper pearson endpoints and oracle") {
    CHECK(clopper_pearson(0, 20).lower == 0.0);
    CHECK(clopper_pearson(20, 20).upper == 1.0);
    auto ci = clopper_pearson(5, 10);
    CHECK(ci.lower == doctest::Approx(0.187).epsilon(0.01));
    CHECK(ci.upper == doctest::Approx(0.813).epsilon(0.01));
    CHECK(ci.lower <= 0.5);
    CHECK(ci.upper >= 0.5);
    CHECK_THROWS_AS(clopper_pearson(11, 10), ConfigError);

    // Endpoints satisfy the defining tail equations under the quadrature CDF.
    CHECK(oracles::beta_cdf_quadrature(5, 6, ci.lower) == doctest::Approx(0.025).epsilon(1e-4));
    CHECK(oracles::beta_cdf_quadrature(6, 5, ci.upper) == doctest::Approx(0.975).epsilon(1e-4));
}

TEST_CASE("clopper pearson coverage") {
    std::mt19937_64 rng(123);
    for (double p : {0.1, 0.5, 0.9}) {
        std::binomial_distribution<long> bin(100, p);
        int covered = 0;
        const int trials = 10000;
        for (int t = 0; t < trials; ++t) {
            auto ci = clopper_pearson(bin(rng), 100);
            if (ci.lower <= p && p <= ci.upper) ++covered;
        }
        const double sigma = std::sqrt(0.95 * 0.05 / trials);
        CHECK(static_cast<double>(covered) / trials >= 0.95 - 3.0 * sigma);
    }
}

TEST_CASE("pearson correlation") {
    Array x = arr({1, 2, 3, 4});
    CHECK(pearson_r(x, x) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pearson_r(x, -x) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(pearson_r(arr({1, 2, 3}), arr({1, 3, 2})) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(std::isnan(pearson_r(arr({1, 1, 1}), arr({1, 2, 3}))));
    CHECK_THROWS_AS(pearson_r(arr({1, 2}), arr({1, 2, 3})), ConfigError);
}

TEST_CASE("report csv row shape") {
    auto e = accuracy_report(preds({0.9, 0.1, 0.9, 0.1}, {1, 0, 1, 0}, {0, 1, 2, 3}));
    const std::string row = e.csv_row();
    CHECK(std::count(row.begin(), row.end(), ',') == 11);
    CHECK(row.rfind("accuracy,", 0) == 0);
}
