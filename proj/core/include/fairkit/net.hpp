#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "fairkit/tensor.hpp"

namespace fairkit {

enum class LayerKind : std::uint32_t {
    Embedding = 0,
    Linear = 1,
    LeakyRelu = 2,
    Softmax = 3,
    GaussianNoise = 4,
};

const char* layer_kind_name(LayerKind kind);

// One layer of a DenseNet.
//
// Linear: weights is (in x out), biases sized out, y = x W + b.
// Embedding: `categories[f]` declares the category count of input feature f;
//   a feature with categories[f] == 0 is numeric and passes through unchanged.
//   Each categorical feature owns (categories[f] + 1) rows of the stacked
//   weight table; the extra row is the unknown-category bucket used for codes
//   outside [0, categories[f]) at inference.
// LeakyRelu: slope applies for negative inputs, default 0.01.
// Softmax: row-wise; only valid as the final layer.
// GaussianNoise: adds N(0, sigma^2) per element in training mode, identity in
//   evaluation mode.
struct Layer {
    LayerKind kind = LayerKind::Linear;
    Tensor2 weights;
    std::vector<double> biases;
    std::vector<int> categories;
    int embed_dim = 0;
    double slope = 0.01;
    double sigma = 0.0;
    std::size_t in_width = 0;
    std::size_t out_width = 0;

    std::size_t parameter_count() const { return weights.values.size() + biases.size(); }
};

struct DenseNet {
    std::size_t input_width = 0;
    std::vector<Layer> layers;
    // Bumped by apply_step so stale forward caches can be rejected.
    std::uint64_t revision = 0;

    std::size_t output_width() const { return layers.empty() ? input_width : layers.back().out_width; }
    std::size_t parameter_count() const;
};

// Fluent construction with uniform [-a, a] init, a = sqrt(6 / (fan_in + fan_out)).
class NetBuilder {
public:
    explicit NetBuilder(std::size_t input_width);

    NetBuilder& embedding(std::vector<int> categories_per_feature, int dim);
    NetBuilder& linear(std::size_t out_width);
    NetBuilder& leaky_relu(double slope = 0.01);
    NetBuilder& softmax();
    NetBuilder& gaussian_noise(double sigma);

    DenseNet build(std::mt19937_64& rng) const;

private:
    std::size_t width_;
    std::vector<Layer> layers_;
};

enum class RunMode { Train, Eval };

inline constexpr int kNoTap = -1;

struct ForwardCache {
    // inputs[i] is the input tensor of layer i; inputs[L] is the final output.
    std::vector<Tensor2> inputs;
    const DenseNet* net = nullptr;
    std::uint64_t revision = 0;
    RunMode mode = RunMode::Eval;
    // Noise actually added by GaussianNoise layers (train mode), keyed by layer.
    std::vector<Tensor2> noise;
};

struct ForwardResult {
    Tensor2 output;
    std::optional<Tensor2> tap;  // activation after layer tap_layer
    ForwardCache cache;
};

// tap_layer selects the output of that layer index as R; kNoTap disables it.
// noise_rng is only consumed by GaussianNoise layers in Train mode.
ForwardResult forward(const DenseNet& net, const Tensor2& x, int tap_layer = kNoTap,
                      RunMode mode = RunMode::Eval, std::mt19937_64* noise_rng = nullptr);

struct LayerGrads {
    Tensor2 weights;
    std::vector<double> biases;
};

struct Gradients {
    std::vector<LayerGrads> layers;
    Tensor2 input;  // dLoss/dx (zero for rows consumed by embeddings)

    bool all_finite() const;
};

// Reverse pass over the cached activations. output_grad is dLoss/d(output);
// when tap_grad is given it is added to the gradient flowing out of layer
// tap_layer, which is how an adversary's gradient re-enters the predictor
// through R.
Gradients backward(const DenseNet& net, const ForwardCache& cache, const Tensor2& output_grad,
                   int tap_layer = kNoTap, const Tensor2* tap_grad = nullptr);

// Mean of -log p(label) over rows; p clamped at 1e-12 before the log.
double cross_entropy(const Tensor2& predicted_probs, const std::vector<int>& labels);

// dLoss/dprobs for cross_entropy, same clamping.
Tensor2 cross_entropy_grad(const Tensor2& predicted_probs, const std::vector<int>& labels);

std::vector<int> argmax_rows(const Tensor2& t);

}  // namespace fairkit
