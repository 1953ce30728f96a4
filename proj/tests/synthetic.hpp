#pragma once

#include <random>

#include "tabbench/data.hpp"

namespace testutil {

// In-memory dataset with 4 subgroups, a learnable signal, and fixed
// 80/10/10 splits laid out deterministically by row index.
inline tabbench::data::TabularDataset make_synthetic(Eigen::Index n, std::uint64_t seed,
                                                     const std::string& name = "synthetic") {
    using namespace tabbench;
    data::TabularDataset ds;
    ds.name = name;
    ds.X.resize(n, 5);
    ds.y.resize(n);
    ds.group_id.resize(n);
    ds.split.resize(static_cast<std::size_t>(n));

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        // Decouple group from the split slot (both cycle, at coprime strides).
        const int group = static_cast<int>((i / 10) % 4);
        ds.group_id(i) = group;
        for (int j = 0; j < 5; ++j) ds.X(i, j) = g(rng);
        // Signal in x0/x1 plus a mild group shift so subgroup metrics differ.
        const double logit =
            1.8 * ds.X(i, 0) + 0.9 * ds.X(i, 1) + 0.35 * (group - 1.5);
        ds.y(i) = u(rng) < 1.0 / (1.0 + std::exp(-logit)) ? 1.0 : 0.0;
        const auto slot = i % 10;
        ds.split[static_cast<std::size_t>(i)] = slot < 8   ? data::Split::Train
                                                : slot == 8 ? data::Split::Val
                                                            : data::Split::Test;
    }
    return ds;
}

}  // namespace testutil
