#include "tabbench/mlp.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "tabbench/metrics.hpp"

namespace tabbench::mlp {

namespace {

// Hidden activations per layer for a batch; rows are examples.
struct ForwardPass {
    std::vector<Matrix> h;  // h[0] = input, h[l] = relu output of layer l
    Array z;                // final pre-sigmoid scores
    Array p;                // sigmoid scores
};

ForwardPass forward(const MlpModel& model, const Matrix& X) {
    ForwardPass fp;
    fp.h.reserve(model.W.size());
    fp.h.push_back(X);
    const std::size_t n_hidden = model.W.size() - 1;
    for (std::size_t l = 0; l < n_hidden; ++l) {
        Matrix a = fp.h.back() * model.W[l].transpose();
        a.rowwise() += model.b[l].transpose();
        fp.h.push_back(a.cwiseMax(0.0));
    }
    const auto& Wout = model.W.back();
    fp.z = (fp.h.back() * Wout.transpose()).col(0).array() + model.b.back()(0);
    fp.p = sigmoid(fp.z);
    return fp;
}

}  // namespace

Array MlpModel::raw_scores(const Matrix& X) const {
    if (X.cols() != W.front().cols()) throw DataError("mlp predict: feature count mismatch");
    return forward(*this, X).z;
}

Array MlpModel::predict(const Matrix& X) const {
    // Clamp away from exact 0/1, which sigmoid can hit once the pre-image
    // exceeds the double exponent range.
    return sigmoid(raw_scores(X)).unaryExpr([](double p) { return clamp_prob(p); });
}

Eigen::Index MlpModel::n_parameters() const {
    Eigen::Index total = 0;
    for (std::size_t l = 0; l < W.size(); ++l) total += W[l].size() + b[l].size();
    return total;
}

MlpModel init_mlp(Eigen::Index d, const MlpParams& params) {
    if (params.num_layers < 1 || params.hidden_units < 1)
        throw ConfigError("mlp: need at least one hidden layer and unit");
    MlpModel model;
    std::mt19937_64 rng(params.seed);
    std::vector<Eigen::Index> sizes;
    sizes.push_back(d);
    for (int l = 0; l < params.num_layers; ++l) sizes.push_back(params.hidden_units);
    sizes.push_back(1);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const auto fan_in = sizes[l], fan_out = sizes[l + 1];
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> u(-bound, bound);
        Matrix Wl(fan_out, fan_in);
        for (Eigen::Index i = 0; i < fan_out; ++i) {
            for (Eigen::Index j = 0; j < fan_in; ++j) Wl(i, j) = u(rng);
        }
        model.W.push_back(std::move(Wl));
        model.b.push_back(Vector::Zero(fan_out));
    }
    return model;
}

double mlp_weighted_loss(const MlpModel& model, const Matrix& X, const Array& y, const Array& q) {
    const ForwardPass fp = forward(model, X);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double p = clamp_prob(fp.p(i));
        loss += q(i) * -(y(i) * std::log(p) + (1.0 - y(i)) * std::log(1.0 - p));
    }
    return loss;
}

MlpGrads mlp_backprop(const MlpModel& model, const Matrix& X, const Array& y, const Array& q) {
    const ForwardPass fp = forward(model, X);
    const std::size_t L = model.W.size();
    MlpGrads g;
    g.dW.resize(L);
    g.db.resize(L);

    // d loss / d z for weighted BCE through the sigmoid.
    Matrix delta = (q * (fp.p - y)).matrix();

    for (std::size_t l = L; l-- > 0;) {
        g.dW[l] = delta.transpose() * fp.h[l];
        g.db[l] = delta.colwise().sum().transpose();
        if (l > 0) {
            Matrix back = delta * model.W[l];
            delta = back.cwiseProduct((fp.h[l].array() > 0.0).cast<double>().matrix());
        }
    }
    return g;
}

MlpModel fit_mlp(const Matrix& X_train, const Array& y_train, const IntVector& g_train,
                 const Matrix& X_val, const Array& y_val, const IntVector& g_val,
                 const MlpParams& params, const robust::Objective& objective) {
    if (X_train.rows() == 0) throw FitError("fit_mlp: empty train split");
    if (X_val.rows() == 0) throw FitError("fit_mlp: empty validation split");
    if (params.lr < 0.0 || params.epochs < 0 || params.batch_size < 1)
        throw ConfigError("fit_mlp: invalid parameters");
    objective.validate();

    MlpModel model = init_mlp(X_train.cols(), params);
    MlpGrads velocity;
    velocity.dW.resize(model.W.size());
    velocity.db.resize(model.b.size());
    for (std::size_t l = 0; l < model.W.size(); ++l) {
        velocity.dW[l] = Matrix::Zero(model.W[l].rows(), model.W[l].cols());
        velocity.db[l] = Vector::Zero(model.b[l].size());
    }

    robust::GroupWeights dro_state;
    dro_state.eta = objective.eta;

    std::mt19937_64 shuffle_rng(mix_seed(params.seed, 0xb5297a4d5c1fULL));
    const auto n = X_train.rows();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});

    MlpModel best = model;
    double best_val = std::numeric_limits<double>::infinity();
    {
        const Array val_losses = metrics::bce_losses(model.predict(X_val), y_val);
        best_val = robust::validation_objective(objective, val_losses, g_val);
    }

    Matrix Xb;
    Array yb;
    IntVector gb;
    for (int epoch = 0; epoch < params.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        for (Eigen::Index start = 0; start < n; start += params.batch_size) {
            const auto bsz = std::min<Eigen::Index>(params.batch_size, n - start);
            Xb.resize(bsz, X_train.cols());
            yb.resize(bsz);
            gb.resize(bsz);
            for (Eigen::Index i = 0; i < bsz; ++i) {
                const auto src = order[static_cast<std::size_t>(start + i)];
                Xb.row(i) = X_train.row(src);
                yb(i) = y_train(src);
                gb(i) = g_train(src);
            }

            const Array batch_losses = metrics::bce_losses(sigmoid(model.raw_scores(Xb)), yb);
            if (!batch_losses.allFinite()) throw FitError("fit_mlp: non-finite batch loss");
            robust::BatchLoss bl;
            try {
                bl = robust::batch_loss(objective, batch_losses, gb,
                                        objective.variant == robust::Variant::GroupDRO
                                            ? &dro_state
                                            : nullptr);
            } catch (const robust::ObjectiveError&) {
                continue;  // batch skipped; the objective excluded everything
            }
            if (!std::isfinite(bl.loss)) throw FitError("fit_mlp: non-finite batch loss");

            const MlpGrads grads = mlp_backprop(model, Xb, yb, bl.weights);
            for (std::size_t l = 0; l < model.W.size(); ++l) {
                velocity.dW[l] = params.momentum * velocity.dW[l] - params.lr * grads.dW[l];
                velocity.db[l] = params.momentum * velocity.db[l] - params.lr * grads.db[l];
                model.W[l] += velocity.dW[l];
                model.b[l] += velocity.db[l];
                if (params.weight_decay > 0.0) {
                    model.W[l] -= params.lr * params.weight_decay * model.W[l];
                    model.b[l] -= params.lr * params.weight_decay * model.b[l];
                }
                if (!model.W[l].allFinite() || !model.b[l].allFinite())
                    throw FitError("fit_mlp: parameters diverged");
            }
        }

        const Array val_losses = metrics::bce_losses(model.predict(X_val), y_val);
        const double val = robust::validation_objective(objective, val_losses, g_val);
        if (!std::isfinite(val)) throw FitError("fit_mlp: non-finite validation loss");
        if (val < best_val) {
            best_val = val;
            best = model;
        }
    }
    return best;
}

}  // namespace tabbench::mlp
