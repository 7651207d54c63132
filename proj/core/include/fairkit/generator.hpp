#pragma once

#include <cstdint>
#include <vector>

#include "fairkit/errors.hpp"
#include "fairkit/tensor.hpp"

namespace fairkit {

// Per-scale latent vectors plus the set of scales a transform may touch.
struct StyleLatent {
    std::vector<std::vector<double>> scales;
    std::vector<int> update_mask;

    std::size_t total_width() const;
    std::vector<double> concat() const;
    static StyleLatent from_concat(const std::vector<double>& flat, std::size_t num_scales,
                                   std::size_t scale_width);
};

// Desk-scale stand-in for a multi-scale GAN generator: a fixed, seeded,
// differentiable decoder mapping {w_i} to a flat observation vector, built so
// that one designated scale dominantly controls the S-like attribute and
// another the Y-like attribute. Each scale writes mostly into its own pixel
// block with a small crosstalk term into the rest, which is the knob for
// residual entanglement.
class ToyGenerator {
public:
    static ToyGenerator make(std::size_t num_scales, std::size_t scale_width, std::size_t side,
                             std::uint64_t seed, double crosstalk = 0.05);

    std::size_t num_scales() const { return num_scales_; }
    std::size_t scale_width() const { return scale_width_; }
    std::size_t observation_dim() const { return obs_dim_; }
    int s_scale() const { return s_scale_; }
    int y_scale() const { return y_scale_; }

    std::vector<double> decode(const StyleLatent& latent) const;

    // Ground-truth attribute routing: sign of the first coordinate of the
    // controlling scale.
    int true_s(const StyleLatent& latent) const;
    int true_y(const StyleLatent& latent) const;

private:
    std::size_t num_scales_ = 0;
    std::size_t scale_width_ = 0;
    std::size_t obs_dim_ = 0;
    std::size_t hidden_ = 8;
    int s_scale_ = 0;
    int y_scale_ = 1;
    // Per scale: hidden map (W1: hidden x width, b1) and block writer
    // (W2: block x hidden, direct: block x width), plus crosstalk into the
    // full observation (C: obs x width, scaled).
    struct ScaleParams {
        Tensor2 w1;
        std::vector<double> b1;
        Tensor2 w2;
        Tensor2 direct;
        Tensor2 crosstalk;
        std::size_t block_begin = 0, block_end = 0;
    };
    std::vector<ScaleParams> params_;
    std::vector<double> bias_;
};

struct GeneratedPair {
    std::vector<double> observation;
    StyleLatent latent;
};

// Standard-normal latents per scale, deterministic per seed.
std::vector<GeneratedPair> sample_pairs(const ToyGenerator& gen, std::size_t n,
                                        std::uint64_t seed);

}  // namespace fairkit
