#include <algorithm>
#include <numeric>
#include <random>

#include "doctest.h"
#include "tabbench/metrics.hpp"
#include "tabbench/robust.hpp"

using namespace tabbench;
using namespace tabbench::robust;

namespace {

IntVector cyclic_groups(Eigen::Index n) {
    IntVector g(n);
    for (Eigen::Index i = 0; i < n; ++i) g(i) = static_cast<int>(i % 4);
    return g;
}

Array random_losses(Eigen::Index n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 3.0);
    Array l(n);
    for (Eigen::Index i = 0; i < n; ++i) l(i) = u(rng);
    return l;
}

}  // namespace

TEST_CASE("robust: ERM is the uniform average") {
    Array l(2);
    l << 1, 3;
    auto out = batch_loss(Objective{}, l, cyclic_groups(2), nullptr);
    CHECK(out.loss == doctest::Approx(2.0));
    CHECK(out.weights(0) == doctest::Approx(0.5));
    CHECK(out.weights(1) == doctest::Approx(0.5));
}

TEST_CASE("robust: CVaR alpha=0.5 on (1,2,3,4)") {
    Array l(4);
    l << 1, 2, 3, 4;
    Objective obj;
    obj.variant = Variant::CVaR;
    obj.alpha = 0.5;
    auto out = batch_loss(obj, l, cyclic_groups(4), nullptr);
    CHECK(out.loss == doctest::Approx(3.5));
    CHECK(out.weights(0) == doctest::Approx(0.0));
    CHECK(out.weights(1) == doctest::Approx(0.0));
    CHECK(out.weights(2) == doctest::Approx(0.5));
    CHECK(out.weights(3) == doctest::Approx(0.5));
}

TEST_CASE("robust: MWLD on constant losses is the mean") {
    Array l = Array::Ones(3);
    Objective obj;
    obj.variant = Variant::MWLD;
    obj.lambda = 1.0;
    auto out = batch_loss(obj, l, cyclic_groups(3), nullptr);
    CHECK(out.loss == doctest::Approx(1.0));
}

TEST_CASE("robust: MWLD scalar is mean plus lambda times population variance") {
    Array l(4);
    l << 0, 1, 2, 5;
    Objective obj;
    obj.variant = Variant::MWLD;
    obj.lambda = 0.5;
    const double mean = 2.0;
    const double popvar = (4.0 + 1.0 + 0.0 + 9.0) / 4.0;
    auto out = batch_loss(obj, l, cyclic_groups(4), nullptr);
    CHECK(out.loss == doctest::Approx(mean + 0.5 * popvar));
    // Weight identity q_i = 1/B + 2*lambda*(l_i - mean)/B.
    for (Eigen::Index i = 0; i < 4; ++i) {
        CHECK(out.weights(i) == doctest::Approx(0.25 + 2.0 * 0.5 * (l(i) - mean) / 4.0));
    }
}

TEST_CASE("robust: scalar equals weights dot losses for the DRO family") {
    // MWLD is excluded: its published weight identity scales the variance
    // term by 2 relative to the scalar definition.
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 50; ++rep) {
        Array l = random_losses(17, rng);
        IntVector g = cyclic_groups(17);
        std::vector<Objective> objs;
        {
            Objective o;
            objs.push_back(o);
            o.variant = Variant::CVaR;
            o.alpha = 0.3;
            objs.push_back(o);
            o.variant = Variant::Chi2;
            o.alpha = 0.4;
            objs.push_back(o);
            o.variant = Variant::CVaRDoro;
            o.alpha = 0.5;
            o.epsilon = 0.1;
            objs.push_back(o);
            o.variant = Variant::Chi2Doro;
            objs.push_back(o);
        }
        for (const auto& o : objs) {
            auto out = batch_loss(o, l, g, nullptr);
            CHECK(out.loss == doctest::Approx((out.weights * l).sum()).epsilon(1e-12));
        }
        GroupWeights state;
        Objective gd;
        gd.variant = Variant::GroupDRO;
        auto out = batch_loss(gd, l, g, &state);
        CHECK(out.loss == doctest::Approx((out.weights * l).sum()).epsilon(1e-12));
    }
}

TEST_CASE("robust: CVaR and chi2 batch losses dominate ERM") {
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 40; ++rep) {
        Array l = random_losses(23, rng);
        const double erm = l.mean();
        Objective cv;
        cv.variant = Variant::CVaR;
        cv.alpha = 0.4;
        Objective c2;
        c2.variant = Variant::Chi2;
        c2.alpha = 0.4;
        CHECK(batch_loss(cv, l, cyclic_groups(23), nullptr).loss >= erm - 1e-12);
        CHECK(batch_loss(c2, l, cyclic_groups(23), nullptr).loss >= erm - 1e-12);
    }
}

TEST_CASE("robust: DORO zeroes the epsilon largest losses") {
    Array l(5);
    l << 10, 1, 2, 3, 4;
    Objective obj;
    obj.variant = Variant::CVaRDoro;
    obj.alpha = 0.5;
    obj.epsilon = 0.2;  // ceil(1) = drop the single largest loss
    auto out = batch_loss(obj, l, cyclic_groups(5), nullptr);
    CHECK(out.weights(0) == doctest::Approx(0.0));
    CHECK(out.loss == doctest::Approx(3.5));
    CHECK(out.loss == doctest::Approx(metrics::doro_cvar_risk(l, 0.5, 0.2)));
}

TEST_CASE("robust: DORO tie-break drops the lowest index first") {
    Array l(4);
    l << 5, 5, 1, 2;
    Objective obj;
    obj.variant = Variant::CVaRDoro;
    obj.alpha = 1.0;
    obj.epsilon = 0.25;
    auto out = batch_loss(obj, l, cyclic_groups(4), nullptr);
    CHECK(out.weights(0) == doctest::Approx(0.0));  // index 0 dropped, index 1 kept
    CHECK(out.weights(1) > 0.0);
}

TEST_CASE("robust: DORO excluding everything is an objective error") {
    Array l(2);
    l << 1, 2;
    Objective obj;
    obj.variant = Variant::CVaRDoro;
    obj.epsilon = 0.9;  // ceil(1.8) = 2 = everything
    CHECK_THROWS_AS(batch_loss(obj, l, cyclic_groups(2), nullptr), ObjectiveError);
}

TEST_CASE("robust: group DRO update matches the hand-computed example") {
    GroupWeights state;
    state.eta = 0.01;
    state.w << 0.5, 0.5, 0.0, 0.0;
    Eigen::Vector4d losses(1.0, 0.0, 0.0, 0.0);
    group_dro_update(state, losses);
    CHECK(state.w(0) == doctest::Approx(0.502500).epsilon(1e-6));
    CHECK(state.w(1) == doctest::Approx(0.497500).epsilon(1e-6));
}

TEST_CASE("robust: group DRO equal losses leave weights unchanged") {
    GroupWeights state;
    state.eta = 0.3;
    Eigen::Vector4d losses = Eigen::Vector4d::Constant(0.7);
    group_dro_update(state, losses);
    for (int g = 0; g < 4; ++g) CHECK(state.w(g) == doctest::Approx(0.25));
}

TEST_CASE("robust: group DRO weights stay on the simplex over 10000 steps") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    GroupWeights state;
    state.eta = 0.1;
    for (int step = 0; step < 10000; ++step) {
        Eigen::Vector4d losses(u(rng), u(rng), u(rng), u(rng));
        group_dro_update(state, losses);
        CHECK(state.w.minCoeff() >= 0.0);
        CHECK(std::abs(state.w.sum() - 1.0) <= 1e-12);
    }
}

TEST_CASE("robust: group DRO concentrates on the worst group") {
    GroupWeights state;
    state.eta = 1.0;
    Eigen::Vector4d losses(0.1, 0.9, 0.3, 0.2);
    double prev = state.w(1);
    for (int step = 0; step < 50; ++step) {
        group_dro_update(state, losses);
        CHECK(state.w(1) >= prev - 1e-15);  // monotone growth of the argmax weight
        prev = state.w(1);
    }
    CHECK(state.w(1) > 0.999);
}

TEST_CASE("robust: group DRO batch weights sum the group means") {
    Array l(8);
    l << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8;
    IntVector g = cyclic_groups(8);
    GroupWeights state;
    state.eta = 0.05;
    Objective obj;
    obj.variant = Variant::GroupDRO;
    auto out = batch_loss(obj, l, g, &state);
    Eigen::Vector4d means;
    means << 0.3, 0.4, 0.5, 0.6;
    CHECK(out.loss == doctest::Approx(state.w.dot(means)));
    CHECK(out.weights.sum() == doctest::Approx(1.0));
}

TEST_CASE("robust: permutation equivariance of batch weights") {
    std::mt19937_64 rng(17);
    Array l = random_losses(12, rng);
    IntVector g = cyclic_groups(12);
    std::vector<Eigen::Index> perm(12);
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    Array lp(12);
    IntVector gp(12);
    for (Eigen::Index i = 0; i < 12; ++i) {
        lp(i) = l(perm[static_cast<std::size_t>(i)]);
        gp(i) = g(perm[static_cast<std::size_t>(i)]);
    }
    for (Variant v : {Variant::ERM, Variant::CVaR, Variant::Chi2, Variant::MWLD}) {
        Objective obj;
        obj.variant = v;
        obj.alpha = 0.4;
        obj.lambda = 0.3;
        auto a = batch_loss(obj, l, g, nullptr);
        auto b = batch_loss(obj, lp, gp, nullptr);
        CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-12));
        for (Eigen::Index i = 0; i < 12; ++i) {
            CHECK(b.weights(i) ==
                  doctest::Approx(a.weights(perm[static_cast<std::size_t>(i)])).epsilon(1e-12));
        }
    }
}

TEST_CASE("robust: validation objective degenerate cases") {
    std::mt19937_64 rng(19);
    Array l = random_losses(20, rng);
    IntVector g = cyclic_groups(20);

    Objective erm;
    CHECK(validation_objective(erm, l, g) == doctest::Approx(l.mean()));

    Objective cv1;
    cv1.variant = Variant::CVaR;
    cv1.alpha = 1.0;
    CHECK(validation_objective(cv1, l, g) == doctest::Approx(l.mean()));

    Objective gd;
    gd.variant = Variant::GroupDRO;
    double worst = 0.0;
    for (int grp = 0; grp < 4; ++grp) {
        double sum = 0.0;
        int cnt = 0;
        for (Eigen::Index i = 0; i < 20; ++i) {
            if (g(i) == grp) {
                sum += l(i);
                ++cnt;
            }
        }
        worst = std::max(worst, sum / cnt);
    }
    CHECK(validation_objective(gd, l, g) == doctest::Approx(worst));
}

TEST_CASE("robust: objective validation rejects bad parameters") {
    Objective o;
    o.alpha = 0.0;
    CHECK_THROWS_AS(o.validate(), ConfigError);
    o.alpha = 0.5;
    o.epsilon = 1.0;
    CHECK_THROWS_AS(o.validate(), ConfigError);
    o.epsilon = 0.1;
    o.eta = 0.0;
    CHECK_THROWS_AS(o.validate(), ConfigError);
    o.eta = 0.1;
    o.lambda = -1.0;
    CHECK_THROWS_AS(o.validate(), ConfigError);
    o.lambda = 0.0;
    CHECK_NOTHROW(o.validate());
}

TEST_CASE("robust: chi2 alpha-to-rho mapping") {
    Objective o;
    o.variant = Variant::Chi2;
    o.alpha = 0.5;
    CHECK(o.chi2_rho() == doctest::Approx(0.5));
    o.alpha = 1.0;
    CHECK(o.chi2_rho() == doctest::Approx(0.0));
}
