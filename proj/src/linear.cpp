#include "tabbench/linear.hpp"

#include <iostream>
#include <random>

namespace tabbench::linear {

namespace {

// Stable log(1 + exp(z)).
double softplus(double z) {
    if (z > 30.0) return z;
    if (z < -30.0) return 0.0;
    return std::log1p(std::exp(z));
}

void warn_if_unstandardized(const Matrix& X) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        const double mean = X.col(j).mean();
        const double var = (X.col(j).array() - mean).square().mean();
        if (std::abs(mean) > 3.0 || var > 25.0) {
            std::cerr << "warning: linear model input column " << j
                      << " looks unstandardized (mean " << mean << ", var " << var << ")\n";
            return;
        }
    }
}

}  // namespace

double linear_objective(const Vector& theta, const Matrix& Phi, const Array& y, LinearKind kind,
                        double c) {
    const auto d = Phi.cols();
    const Vector w = theta.head(d);
    const double b = theta(d);
    const Array z = (Phi * w).array() + b;
    const Array ys = 2.0 * y - 1.0;  // {0,1} -> {-1,+1}
    double data = 0.0;
    if (kind == LinearKind::Logistic) {
        for (Eigen::Index i = 0; i < z.size(); ++i) data += softplus(-ys(i) * z(i));
    } else {
        const Array m = (1.0 - ys * z).max(0.0);
        data = (m * m).sum();
    }
    return data / static_cast<double>(Phi.rows()) + w.squaredNorm() / (2.0 * c);
}

Vector linear_gradient(const Vector& theta, const Matrix& Phi, const Array& y, LinearKind kind,
                       double c) {
    const auto d = Phi.cols();
    const auto n = Phi.rows();
    const Vector w = theta.head(d);
    const double b = theta(d);
    const Array z = (Phi * w).array() + b;
    const Array ys = 2.0 * y - 1.0;
    Array dz(n);
    if (kind == LinearKind::Logistic) {
        for (Eigen::Index i = 0; i < n; ++i) dz(i) = -ys(i) * sigmoid(-ys(i) * z(i));
    } else {
        dz = -2.0 * ys * (1.0 - ys * z).max(0.0);
    }
    dz /= static_cast<double>(n);
    Vector grad(d + 1);
    grad.head(d) = Phi.transpose() * dz.matrix() + w / c;
    grad(d) = dz.sum();
    return grad;
}

Matrix LinearModel::transform(const Matrix& X) const {
    if (!use_rff) return X;
    if (X.cols() != omega.cols()) throw DataError("linear predict: feature count mismatch");
    const auto m = omega.rows();
    Matrix Z = X * omega.transpose();
    Z.rowwise() += phase.transpose();
    return std::sqrt(2.0 / static_cast<double>(m)) * Z.array().cos().matrix();
}

Array LinearModel::predict(const Matrix& X) const {
    const Matrix Phi = transform(X);
    if (Phi.cols() != w.size()) throw DataError("linear predict: feature count mismatch");
    return sigmoid(((Phi * w).array() + b).eval());
}

LinearModel fit_linear(const Matrix& X, const Array& y, const LinearParams& params) {
    if (params.l2_c <= 0.0) throw ConfigError("fit_linear: C must be positive");
    if (params.iters < 0 || params.lr < 0.0) throw ConfigError("fit_linear: invalid parameters");
    if (X.rows() == 0) throw FitError("fit_linear: empty train split");
    if (y.size() != X.rows()) throw ConfigError("fit_linear: label count mismatch");
    warn_if_unstandardized(X);

    LinearModel model;
    model.kind = params.kind;
    model.use_rff = params.use_rff;
    if (params.use_rff) {
        if (params.n_components <= 0 || params.gamma <= 0.0)
            throw ConfigError("fit_linear: invalid RFF parameters");
        std::mt19937_64 rng(params.seed);
        std::normal_distribution<double> normal(0.0, std::sqrt(2.0 * params.gamma));
        std::uniform_real_distribution<double> uniform(0.0, 2.0 * M_PI);
        model.omega.resize(params.n_components, X.cols());
        for (Eigen::Index i = 0; i < model.omega.rows(); ++i) {
            for (Eigen::Index j = 0; j < model.omega.cols(); ++j) model.omega(i, j) = normal(rng);
        }
        model.phase.resize(params.n_components);
        for (Eigen::Index i = 0; i < model.phase.size(); ++i) model.phase(i) = uniform(rng);
    }

    const Matrix Phi = model.transform(X);
    Vector theta = Vector::Zero(Phi.cols() + 1);
    for (int it = 0; it < params.iters; ++it) {
        const Vector grad = linear_gradient(theta, Phi, y, params.kind, params.l2_c);
        if (grad.norm() < params.tol) break;
        theta -= params.lr * grad;
    }
    if (!theta.allFinite()) throw FitError("fit_linear: diverged to non-finite parameters");
    model.w = theta.head(Phi.cols());
    model.b = theta(Phi.cols());
    return model;
}

}  // namespace tabbench::linear
