#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairkit/dataset.hpp"
#include "fairkit/metrics.hpp"
#include "fairkit/net.hpp"
#include "fairkit/optimizer.hpp"

namespace fairkit {

enum class TapPoint { Logits, PreLogits };

const char* tap_point_name(TapPoint tap);

// Classifier shape: optional embedding front-end, then linear+leaky blocks,
// then linear(outputs)+softmax.
struct ArchSpec {
    std::vector<int> embedding_categories;  // empty = no embedding layer
    int embed_dim = 8;
    std::vector<std::size_t> hidden;
    std::size_t outputs = 2;
};

DenseNet build_classifier(const ArchSpec& arch, std::size_t input_width, std::mt19937_64& rng);

struct OptConfig {
    OptimizerState optimizer = OptimizerState::adam(1e-3);
    bool plateau_scheduler = true;  // factor 0.1, patience 10, watches train loss
};

struct AdvConfig {
    double beta = 0.0;
    TapPoint tap = TapPoint::Logits;
    bool adversary_sees_label = true;  // equality-of-odds adversary; false = ADDP
    bool freeze_alternation = false;   // alternate whole-network epochs instead of per-batch steps
    double noise_sigma = 0.0;          // >0 with beta==0: noise-regularization baseline
    bool filter_synthetic_from_adversary = false;
    bool filter_synthetic_from_validation = false;
    int adversary_pretrain_epochs = 100;
    int max_epochs = 100;
    int early_stop_patience = 10;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    OptConfig predictor;
    OptConfig adversary{OptimizerState::adamw(5e-3), false};

    // Exactly one method family: beta>0 (AD), noise_sigma>0 (Noise) or neither
    // (plain baseline). Both positive is rejected.
    void validate() const;
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0;
    double val_loss = 0;
    double adversary_loss = 0;
    double adversary_acc = 0;
    double predictor_lr = 0;
};

struct TrainedPair {
    DenseNet predictor;
    DenseNet adversary;  // zero layers when no adversary was trained
    std::vector<EpochStats> history;
    int best_epoch = -1;
    int tap_layer = kNoTap;
    std::size_t n_classes = 2;
    std::size_t n_groups = 2;
    bool has_adversary = false;
};

// Alternating min-max training of predictor F and adversary A on
// H(Y;F(X)) - beta*H(S;A(R,Y)) with the adversary gradient flowing into F
// through the tap activation R. Validation-loss checkpoint selection with
// early stopping; all variants (ADDP, noise, freeze, synthetic filtering,
// adversary pre-training) are AdvConfig switches.
TrainedPair train(const LabeledDataset& train_data, const LabeledDataset& val_data,
                  const ArchSpec& f_arch, const ArchSpec& a_arch, const AdvConfig& cfg);

// Plain classifier training; bit-identical to train() with beta=0, sigma=0 on
// the same seed because RNG streams are split per network.
TrainedPair train_classifier(const LabeledDataset& train_data, const LabeledDataset& val_data,
                             const ArchSpec& f_arch, const AdvConfig& cfg);

// Classifier fit on raw tensors (used for C1/C2 and probes); carves a seeded
// validation split out of x for checkpoint selection.
DenseNet fit_classifier(const Tensor2& x, const std::vector<int>& labels, const ArchSpec& arch,
                        const AdvConfig& cfg);

struct Prediction {
    Tensor2 scores;              // softmax rows
    std::vector<int> labels;     // argmax
    Tensor2 representation;      // tap activation R
};

// Deterministic evaluation-mode forward pass (noise layers inert).
Prediction predict(const TrainedPair& pair, const Tensor2& x);

PredictionDump make_dump(const TrainedPair& pair, const LabeledDataset& data);

struct ProbeResult {
    double probe_accuracy = 0;
    double majority_baseline = 0;
};

// Residual-leakage measure: trains a fresh adversary on the frozen R of one
// half of `heldout` (seeded split) and reports its accuracy on S over the
// other half next to the majority-class baseline.
ProbeResult adversary_probe(const TrainedPair& pair, const LabeledDataset& heldout,
                            std::uint64_t seed = 0);

// Objective of the min-max game evaluated in closed form; the finite-difference
// oracle in the tests differentiates exactly this function.
double adversarial_objective(const DenseNet& predictor, const DenseNet& adversary, int tap_layer,
                             bool adversary_sees_label, const Tensor2& x,
                             const std::vector<int>& y, const std::vector<int>& s, double beta);

struct ObjectiveGrads {
    Gradients predictor;
    Gradients adversary;
};

// Analytic gradients of adversarial_objective w.r.t. both parameter sets,
// computed exactly the way a training step computes them (classification term
// plus the adversary term re-entering through the tap).
ObjectiveGrads adversarial_gradients(const DenseNet& predictor, const DenseNet& adversary,
                                     int tap_layer, bool adversary_sees_label, const Tensor2& x,
                                     const std::vector<int>& y, const std::vector<int>& s,
                                     double beta);

// One-hot label columns appended to R for the odds adversary.
Tensor2 adversary_input(const Tensor2& representation, const std::vector<int>& y,
                        std::size_t n_classes, bool sees_label);

int resolve_tap_layer(const DenseNet& net, TapPoint tap);

}  // namespace fairkit
