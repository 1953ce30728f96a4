#pragma once

#include <vector>

#include "tabbench/common.hpp"
#include "tabbench/robust.hpp"

namespace tabbench::mlp {

struct MlpParams {
    int num_layers = 1;  // hidden layers, each hidden_units wide, ReLU
    int hidden_units = 64;
    double lr = 0.01;
    double weight_decay = 0.0;
    double momentum = 0.0;
    int epochs = 50;
    Eigen::Index batch_size = 128;
    std::uint64_t seed = 0;
};

struct MlpModel {
    std::vector<Matrix> W;  // layer l maps fan_in -> fan_out, stored fan_out x fan_in
    std::vector<Vector> b;

    Array raw_scores(const Matrix& X) const;  // pre-sigmoid output
    Array predict(const Matrix& X) const;     // sigmoid scores in (0,1)
    Eigen::Index n_parameters() const;
};

struct MlpGrads {
    std::vector<Matrix> dW;
    std::vector<Vector> db;
};

// Uniform(+-sqrt(6/(fan_in+fan_out))) weights, zero biases, seeded.
MlpModel init_mlp(Eigen::Index d, const MlpParams& params);

// Weighted binary cross-entropy sum(q_i * bce_i) and its exact gradient
// with q held constant; exposed for finite-difference checks.
double mlp_weighted_loss(const MlpModel& model, const Matrix& X, const Array& y, const Array& q);
MlpGrads mlp_backprop(const MlpModel& model, const Matrix& X, const Array& y, const Array& q);

// Mini-batch SGD with classical momentum, decoupled weight decay, and
// per-epoch best-checkpoint selection on the objective's validation loss.
MlpModel fit_mlp(const Matrix& X_train, const Array& y_train, const IntVector& g_train,
                 const Matrix& X_val, const Array& y_val, const IntVector& g_val,
                 const MlpParams& params, const robust::Objective& objective);

}  // namespace tabbench::mlp
