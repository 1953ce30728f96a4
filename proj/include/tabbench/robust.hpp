#pragma once

#include <string>

#include "tabbench/common.hpp"

namespace tabbench::robust {

// Raised when a batch objective cannot be evaluated (e.g. the DORO cut
// excludes every example); the trainer records it and skips the batch.
class ObjectiveError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Variant { ERM, CVaR, Chi2, CVaRDoro, Chi2Doro, GroupDRO, MWLD };

struct Objective {
    Variant variant = Variant::ERM;
    double alpha = 1.0;    // CVaR / chi-square uncertainty set size
    double epsilon = 0.0;  // DORO outlier fraction
    double eta = 0.01;     // Group DRO group-weights step size
    double lambda = 0.0;   // MWLD loss-variance penalty

    void validate() const;
    // Radius at which the chi-square ball contains the alpha-tail reweighting.
    double chi2_rho() const { return 0.5 * std::pow(1.0 / alpha - 1.0, 2.0); }
    std::string variant_name() const;
};

struct GroupWeights {
    Eigen::Vector4d w = Eigen::Vector4d::Constant(0.25);
    double eta = 0.01;
};

struct BatchLoss {
    double loss = 0.0;
    Array weights;  // per-example q; the trainer treats these as constants
};

// Robust batch loss as the weighted sum of per-example losses under the
// variant's maximizing weights. Group DRO reads and advances `state`.
BatchLoss batch_loss(const Objective& objective, const Array& losses, const IntVector& group_ids,
                     GroupWeights* state);

// Exponentiated-gradient ascent on the group simplex; returns the batch
// loss under the updated weights. Groups absent from the batch carry
// mean loss 0 and keep their weight.
double group_dro_update(GroupWeights& state, const Eigen::Vector4d& group_mean_losses);

// The same functional applied to the full validation loss vector, used
// for best-epoch checkpointing. Group DRO evaluates the worst group mean.
double validation_objective(const Objective& objective, const Array& losses,
                            const IntVector& group_ids);

}  // namespace tabbench::robust
