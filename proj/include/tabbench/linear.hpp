#pragma once

#include "tabbench/common.hpp"

namespace tabbench::linear {

enum class LinearKind { Logistic, SquaredHinge };

struct LinearParams {
    LinearKind kind = LinearKind::Logistic;
    double l2_c = 1.0;  // penalty is ||w||^2 / (2C); bias unpenalized
    double lr = 0.1;
    int iters = 2000;
    double tol = 1e-8;
    std::uint64_t seed = 0;
    bool use_rff = false;     // random Fourier feature map before the linear layer
    double gamma = 1.0;       // RBF bandwidth for the RFF map
    int n_components = 100;   // RFF output dimension
};

struct LinearModel {
    Vector w;
    double b = 0.0;
    LinearKind kind = LinearKind::Logistic;
    bool use_rff = false;
    Matrix omega;   // n_components x d, rows drawn from Normal(0, 2*gamma*I)
    Vector phase;   // n_components, Uniform[0, 2pi)

    Matrix transform(const Matrix& X) const;  // RFF map, or X unchanged
    Array predict(const Matrix& X) const;     // sigmoid of the margin, in (0,1)
};

// Objective and gradient over theta = [w; b] on pre-transformed features,
// exposed so the gradient can be checked against finite differences.
double linear_objective(const Vector& theta, const Matrix& Phi, const Array& y, LinearKind kind,
                        double c);
Vector linear_gradient(const Vector& theta, const Matrix& Phi, const Array& y, LinearKind kind,
                       double c);

// Full-batch gradient descent from zero weights; stops when the gradient
// norm drops below tol or after iters steps.
LinearModel fit_linear(const Matrix& X, const Array& y, const LinearParams& params);

}  // namespace tabbench::linear
