#pragma once

#include <cstdint>
#include <vector>

#include "fairkit/adversarial.hpp"
#include "fairkit/generator.hpp"

namespace fairkit {

// Distillation of the latent classifier missed the agreement floor.
class DistillationError : public std::runtime_error {
public:
    DistillationError(const std::string& msg, double agreement_value)
        : std::runtime_error(msg), agreement(agreement_value) {}
    double agreement = 0;
};

// Observation-space classifier C1 for one attribute.
DenseNet train_c1(const Tensor2& observations, const std::vector<int>& labels,
                  std::uint64_t seed);

// C1 argmax labels for generated pairs.
std::vector<int> label_pairs(const DenseNet& c1, const std::vector<GeneratedPair>& pairs);

// Latent classifier C2 over concatenated {w_i}, distilled from C1 labels.
// Agreement is measured on a held-out tail of `pairs`; below the floor a
// DistillationError carrying the achieved agreement is thrown.
DenseNet train_c2(const std::vector<GeneratedPair>& pairs, const std::vector<int>& c1_labels,
                  std::uint64_t seed, double agreement_floor = 0.9);

struct AugmentConfig {
    double gamma = 0.1;  // ascent step size
    int steps = 100;     // N
    enum class TargetKind { LabelY, AttributeS } target = TargetKind::AttributeS;
    double desired_confidence = 0.9;  // in (0.5, 1]
    std::vector<int> scale_mask;      // scales eligible for updates

    void validate(std::size_t num_scales) const;
};

struct TransformResult {
    StyleLatent latent;
    std::vector<double> trajectory;  // confidence after each step, [0] = initial
    bool reached = false;            // desired confidence hit within N steps
};

// Gradient ascent on log P(target_class | w) through C2, restricted to the
// masked scales, with overshoot halving on the step size. gamma=0 or N=0
// returns the latent unchanged.
TransformResult transform(const StyleLatent& latent, const DenseNet& c2, int target_class,
                          const AugmentConfig& cfg);

struct SynthesisConfig {
    int target_y = 1;
    int target_s = 1;
    double gamma = 0.1;
    int steps = 100;
    double desired_confidence = 0.9;
    std::vector<int> mask_y;  // scales that move the Y attribute
    std::vector<int> mask_s;  // scales that move the S attribute
    std::uint64_t seed = 0;
    std::size_t c2_train_pairs = 2000;
    double c2_agreement_floor = 0.9;
};

struct SyntheticBatch {
    Tensor2 x;
    std::vector<int> y, s;
    std::size_t requested = 0;
    std::size_t attempted = 0;
    std::size_t accepted = 0;
    std::vector<std::vector<double>> trajectories;
};

// Fig.-style pipeline: sample pairs, distill C2 classifiers for Y and S,
// push sampled latents toward the missing (y*, s*) cell, decode, and keep
// only rows where both C1 classifiers agree with the target at the desired
// confidence. Yield below 10% of the request raises DataError.
SyntheticBatch synthesize_missing(const ToyGenerator& gen, const DenseNet& c1_y,
                                  const DenseNet& c1_s, const SynthesisConfig& cfg,
                                  std::size_t n);

// Per-scale sensitivity diagnostic: |d log P(target) / d w_i| aggregated over
// sampled latents, a guide for choosing the update mask.
std::vector<double> scale_sensitivity(const ToyGenerator& gen, const DenseNet& c2,
                                      int target_class, std::size_t samples, std::uint64_t seed);

Tensor2 observations_tensor(const std::vector<GeneratedPair>& pairs);
Tensor2 latents_tensor(const std::vector<GeneratedPair>& pairs);

}  // namespace fairkit
