#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "fairkit/net.hpp"

namespace fairkit {

enum class OptKind : std::uint8_t { SgdNesterov, Adam, AdamW };

// Reduce-on-plateau: lr *= factor after `patience` epochs without the watched
// loss improving.
struct PlateauScheduler {
    double factor = 0.1;
    int patience = 10;
    double best = std::numeric_limits<double>::infinity();
    int stale_epochs = 0;
};

struct OptimizerState {
    OptKind kind = OptKind::SgdNesterov;
    double learning_rate = 0.001;
    double momentum = 0.9;                     // sgd_nesterov
    double beta1 = 0.9, beta2 = 0.999;         // adam/adamw
    double eps = 1e-8;
    double weight_decay = 0.0;                 // adamw (decoupled)
    std::uint64_t step_count = 0;
    std::vector<LayerGrads> moment1;           // sgd velocity / adam m
    std::vector<LayerGrads> moment2;           // adam v
    std::optional<PlateauScheduler> plateau;

    static OptimizerState sgd_nesterov(double lr, double momentum = 0.9);
    static OptimizerState adam(double lr);
    static OptimizerState adamw(double lr, double weight_decay = 0.01);
};

// In-place parameter update; bumps net.revision. Throws NumericError when the
// gradients contain NaN/inf (training must abort rather than corrupt weights).
void apply_step(DenseNet& net, const Gradients& grads, OptimizerState& opt);

// Feed once per epoch with the watched loss; no-op when no scheduler is set.
void plateau_update(OptimizerState& opt, double epoch_loss);

}  // namespace fairkit
