#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace tabbench {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Array = Eigen::ArrayXd;
using IntVector = Eigen::VectorXi;

inline constexpr int kNumGroups = 4;

// Error taxonomy: parameter/config problems vs data problems vs runtime
// failures. The CLI maps ConfigError to exit code 2, everything else to 1.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};
struct FitError : std::runtime_error {
    explicit FitError(const std::string& msg) : std::runtime_error(msg) {}
};

inline double sigmoid(double z) {
    if (z >= 0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    double e = std::exp(z);
    return e / (1.0 + e);
}

inline Array sigmoid(const Array& z) {
    return z.unaryExpr([](double v) { return sigmoid(v); });
}

// Clamp a probability away from 0/1 before taking logs.
inline double clamp_prob(double p) {
    constexpr double eps = 1e-12;
    return std::min(std::max(p, eps), 1.0 - eps);
}

// SplitMix64; used to derive per-run seeds from (base_seed, config_id) so
// sweep results do not depend on scheduling order.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace tabbench
