#include "fairkit/net.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fairkit {

const char* layer_kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::Embedding: return "embedding";
        case LayerKind::Linear: return "linear";
        case LayerKind::LeakyRelu: return "leaky_relu";
        case LayerKind::Softmax: return "softmax";
        case LayerKind::GaussianNoise: return "gaussian_noise";
    }
    return "?";
}

std::size_t DenseNet::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.parameter_count();
    return n;
}

NetBuilder::NetBuilder(std::size_t input_width) : width_(input_width) {}

NetBuilder& NetBuilder::embedding(std::vector<int> categories_per_feature, int dim) {
    if (!layers_.empty()) throw ConfigError("embedding layer must be the first layer");
    if (dim <= 0) throw ConfigError("embedding dim must be positive");
    if (categories_per_feature.size() != width_)
        throw ShapeError("embedding: one category count per input feature required");
    Layer l;
    l.kind = LayerKind::Embedding;
    l.categories = std::move(categories_per_feature);
    l.embed_dim = dim;
    l.in_width = width_;
    std::size_t table_rows = 0;
    std::size_t out = 0;
    for (int c : l.categories) {
        if (c < 0) throw ConfigError("negative category count");
        if (c > 0) {
            table_rows += static_cast<std::size_t>(c) + 1;  // +1 unknown bucket
            out += static_cast<std::size_t>(dim);
        } else {
            out += 1;  // numeric pass-through
        }
    }
    l.weights = Tensor2(table_rows, static_cast<std::size_t>(dim));
    l.out_width = out;
    width_ = out;
    layers_.push_back(std::move(l));
    return *this;
}

NetBuilder& NetBuilder::linear(std::size_t out_width) {
    Layer l;
    l.kind = LayerKind::Linear;
    l.in_width = width_;
    l.out_width = out_width;
    l.weights = Tensor2(width_, out_width);
    l.biases.assign(out_width, 0.0);
    width_ = out_width;
    layers_.push_back(std::move(l));
    return *this;
}

NetBuilder& NetBuilder::leaky_relu(double slope) {
    Layer l;
    l.kind = LayerKind::LeakyRelu;
    l.slope = slope;
    l.in_width = l.out_width = width_;
    layers_.push_back(std::move(l));
    return *this;
}

NetBuilder& NetBuilder::softmax() {
    Layer l;
    l.kind = LayerKind::Softmax;
    l.in_width = l.out_width = width_;
    layers_.push_back(std::move(l));
    return *this;
}

NetBuilder& NetBuilder::gaussian_noise(double sigma) {
    if (sigma < 0) throw ConfigError("noise sigma must be >= 0");
    Layer l;
    l.kind = LayerKind::GaussianNoise;
    l.sigma = sigma;
    l.in_width = l.out_width = width_;
    layers_.push_back(std::move(l));
    return *this;
}

DenseNet NetBuilder::build(std::mt19937_64& rng) const {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        if (layers_[i].kind == LayerKind::Softmax && i + 1 != layers_.size())
            throw ConfigError("softmax must be the final layer");
    }
    DenseNet net;
    net.input_width = layers_.empty() ? width_ : layers_.front().in_width;
    net.layers = layers_;
    for (auto& l : net.layers) {
        if (l.weights.values.empty()) continue;
        double fan_in = 0, fan_out = 0;
        if (l.kind == LayerKind::Linear) {
            fan_in = static_cast<double>(l.in_width);
            fan_out = static_cast<double>(l.out_width);
        } else {  // embedding table
            fan_in = static_cast<double>(l.weights.rows);
            fan_out = static_cast<double>(l.embed_dim);
        }
        const double a = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-a, a);
        for (double& w : l.weights.values) w = dist(rng);
    }
    return net;
}

namespace {

void embedding_forward(const Layer& l, const Tensor2& x, Tensor2& y) {
    y = Tensor2(x.rows, l.out_width);
    const std::size_t dim = static_cast<std::size_t>(l.embed_dim);
    for (std::size_t r = 0; r < x.rows; ++r) {
        std::size_t out_col = 0;
        std::size_t table_base = 0;
        for (std::size_t f = 0; f < l.categories.size(); ++f) {
            const int cats = l.categories[f];
            const double v = x.at(r, f);
            if (cats == 0) {
                y.at(r, out_col++) = v;
                continue;
            }
            long code = std::lround(v);
            std::size_t row = table_base;
            row += (code >= 0 && code < cats) ? static_cast<std::size_t>(code)
                                              : static_cast<std::size_t>(cats);  // unknown
            for (std::size_t d = 0; d < dim; ++d) y.at(r, out_col + d) = l.weights.at(row, d);
            out_col += dim;
            table_base += static_cast<std::size_t>(cats) + 1;
        }
    }
}

void embedding_backward(const Layer& l, const Tensor2& x, const Tensor2& gy, LayerGrads& g) {
    g.weights = Tensor2(l.weights.rows, l.weights.cols);
    const std::size_t dim = static_cast<std::size_t>(l.embed_dim);
    for (std::size_t r = 0; r < x.rows; ++r) {
        std::size_t out_col = 0;
        std::size_t table_base = 0;
        for (std::size_t f = 0; f < l.categories.size(); ++f) {
            const int cats = l.categories[f];
            if (cats == 0) {
                ++out_col;  // numeric pass-through: no parameters
                continue;
            }
            long code = std::lround(x.at(r, f));
            std::size_t row = table_base;
            row += (code >= 0 && code < cats) ? static_cast<std::size_t>(code)
                                              : static_cast<std::size_t>(cats);
            for (std::size_t d = 0; d < dim; ++d) g.weights.at(row, d) += gy.at(r, out_col + d);
            out_col += dim;
            table_base += static_cast<std::size_t>(cats) + 1;
        }
    }
}

void linear_forward(const Layer& l, const Tensor2& x, Tensor2& y) {
    y = Tensor2(x.rows, l.out_width);
    for (std::size_t r = 0; r < x.rows; ++r) {
        const double* xr = x.row(r);
        double* yr = y.row(r);
        for (std::size_t j = 0; j < l.out_width; ++j) yr[j] = l.biases[j];
        for (std::size_t i = 0; i < l.in_width; ++i) {
            const double xi = xr[i];
            if (xi == 0.0) continue;
            const double* wrow = l.weights.row(i);
            for (std::size_t j = 0; j < l.out_width; ++j) yr[j] += xi * wrow[j];
        }
    }
}

void softmax_forward(const Tensor2& x, Tensor2& y) {
    y = Tensor2(x.rows, x.cols);
    for (std::size_t r = 0; r < x.rows; ++r) {
        const double* xr = x.row(r);
        double* yr = y.row(r);
        double mx = xr[0];
        for (std::size_t j = 1; j < x.cols; ++j) mx = std::max(mx, xr[j]);
        double sum = 0;
        for (std::size_t j = 0; j < x.cols; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            sum += yr[j];
        }
        for (std::size_t j = 0; j < x.cols; ++j) yr[j] /= sum;
    }
}

}  // namespace

ForwardResult forward(const DenseNet& net, const Tensor2& x, int tap_layer, RunMode mode,
                      std::mt19937_64* noise_rng) {
    if (x.cols != net.input_width)
        throw ShapeError("forward: input has " + std::to_string(x.cols) + " cols, net expects " +
                         std::to_string(net.input_width));
    if (tap_layer != kNoTap &&
        (tap_layer < 0 || static_cast<std::size_t>(tap_layer) >= net.layers.size()))
        throw ShapeError("forward: tap_layer out of range");

    ForwardResult res;
    res.cache.net = &net;
    res.cache.revision = net.revision;
    res.cache.mode = mode;
    res.cache.noise.resize(net.layers.size());
    res.cache.inputs.reserve(net.layers.size() + 1);
    res.cache.inputs.push_back(x);

    Tensor2 cur = x;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const Layer& l = net.layers[i];
        Tensor2 next;
        switch (l.kind) {
            case LayerKind::Embedding:
                embedding_forward(l, cur, next);
                break;
            case LayerKind::Linear:
                if (cur.cols != l.in_width) throw ShapeError("forward: linear width mismatch");
                linear_forward(l, cur, next);
                break;
            case LayerKind::LeakyRelu:
                next = cur;
                for (double& v : next.values)
                    if (v < 0) v *= l.slope;
                break;
            case LayerKind::Softmax:
                softmax_forward(cur, next);
                break;
            case LayerKind::GaussianNoise:
                next = cur;
                if (mode == RunMode::Train && l.sigma > 0) {
                    if (!noise_rng)
                        throw ContractError("forward: train-mode gaussian_noise needs an RNG");
                    std::normal_distribution<double> dist(0.0, l.sigma);
                    Tensor2 eps(cur.rows, cur.cols);
                    for (std::size_t k = 0; k < eps.values.size(); ++k) {
                        eps.values[k] = dist(*noise_rng);
                        next.values[k] += eps.values[k];
                    }
                    res.cache.noise[i] = std::move(eps);
                }
                break;
        }
        cur = std::move(next);
        res.cache.inputs.push_back(cur);
        if (tap_layer == static_cast<int>(i)) res.tap = cur;
    }
    res.output = cur;
    return res;
}

bool Gradients::all_finite() const {
    for (const auto& lg : layers) {
        if (!lg.weights.all_finite()) return false;
        for (double b : lg.biases)
            if (!std::isfinite(b)) return false;
    }
    return true;
}

Gradients backward(const DenseNet& net, const ForwardCache& cache, const Tensor2& output_grad,
                   int tap_layer, const Tensor2* tap_grad) {
    if (cache.net != &net || cache.revision != net.revision)
        throw ContractError("backward: cache is stale or from a different net");
    if (cache.inputs.size() != net.layers.size() + 1)
        throw ContractError("backward: malformed cache");
    if (!output_grad.same_shape(cache.inputs.back()))
        throw ShapeError("backward: output_grad shape mismatch");
    if (tap_grad && (tap_layer == kNoTap || !tap_grad->same_shape(cache.inputs[tap_layer + 1])))
        throw ShapeError("backward: tap_grad shape mismatch");

    Gradients grads;
    grads.layers.resize(net.layers.size());

    Tensor2 g = output_grad;
    for (std::size_t ii = net.layers.size(); ii-- > 0;) {
        const Layer& l = net.layers[ii];
        const Tensor2& in = cache.inputs[ii];
        const Tensor2& out = cache.inputs[ii + 1];
        if (tap_grad && tap_layer == static_cast<int>(ii)) {
            for (std::size_t k = 0; k < g.values.size(); ++k) g.values[k] += tap_grad->values[k];
        }
        LayerGrads& lg = grads.layers[ii];
        Tensor2 gin;
        switch (l.kind) {
            case LayerKind::Embedding:
                embedding_backward(l, in, g, lg);
                gin = Tensor2(in.rows, in.cols);  // categorical input: no input grad
                break;
            case LayerKind::Linear: {
                lg.weights = Tensor2(l.in_width, l.out_width);
                lg.biases.assign(l.out_width, 0.0);
                gin = Tensor2(in.rows, l.in_width);
                for (std::size_t r = 0; r < in.rows; ++r) {
                    const double* xr = in.row(r);
                    const double* gr = g.row(r);
                    for (std::size_t j = 0; j < l.out_width; ++j) lg.biases[j] += gr[j];
                    for (std::size_t i = 0; i < l.in_width; ++i) {
                        double* wg = lg.weights.row(i);
                        const double xi = xr[i];
                        double acc = 0;
                        const double* wrow = l.weights.row(i);
                        for (std::size_t j = 0; j < l.out_width; ++j) {
                            wg[j] += xi * gr[j];
                            acc += wrow[j] * gr[j];
                        }
                        gin.at(r, i) = acc;
                    }
                }
                break;
            }
            case LayerKind::LeakyRelu:
                gin = g;
                for (std::size_t k = 0; k < gin.values.size(); ++k)
                    if (in.values[k] < 0) gin.values[k] *= l.slope;
                break;
            case LayerKind::Softmax: {
                gin = Tensor2(g.rows, g.cols);
                for (std::size_t r = 0; r < g.rows; ++r) {
                    const double* p = out.row(r);
                    const double* gr = g.row(r);
                    double dot = 0;
                    for (std::size_t j = 0; j < g.cols; ++j) dot += gr[j] * p[j];
                    for (std::size_t j = 0; j < g.cols; ++j) gin.at(r, j) = p[j] * (gr[j] - dot);
                }
                break;
            }
            case LayerKind::GaussianNoise:
                gin = g;  // additive noise: identity Jacobian
                break;
        }
        g = std::move(gin);
    }
    grads.input = std::move(g);
    return grads;
}

double cross_entropy(const Tensor2& predicted_probs, const std::vector<int>& labels) {
    if (predicted_probs.rows == 0) throw DomainError("cross_entropy: empty batch");
    if (predicted_probs.rows != labels.size())
        throw ShapeError("cross_entropy: rows/labels mismatch");
    for (std::size_t r = 0; r < predicted_probs.rows; ++r) {
        double sum = 0;
        for (std::size_t c = 0; c < predicted_probs.cols; ++c) sum += predicted_probs.at(r, c);
        if (std::abs(sum - 1.0) > 1e-6)
            throw DomainError("cross_entropy: row " + std::to_string(r) + " does not sum to 1");
    }
    double total = 0;
    for (std::size_t r = 0; r < predicted_probs.rows; ++r) {
        const int y = labels[r];
        if (y < 0 || static_cast<std::size_t>(y) >= predicted_probs.cols)
            throw DomainError("cross_entropy: label out of range");
        total += -std::log(std::max(predicted_probs.at(r, y), 1e-12));
    }
    return total / static_cast<double>(predicted_probs.rows);
}

Tensor2 cross_entropy_grad(const Tensor2& predicted_probs, const std::vector<int>& labels) {
    if (predicted_probs.rows == 0) throw DomainError("cross_entropy_grad: empty batch");
    if (predicted_probs.rows != labels.size())
        throw ShapeError("cross_entropy_grad: rows/labels mismatch");
    Tensor2 g(predicted_probs.rows, predicted_probs.cols);
    const double n = static_cast<double>(predicted_probs.rows);
    for (std::size_t r = 0; r < predicted_probs.rows; ++r) {
        const int y = labels[r];
        g.at(r, y) = -1.0 / (n * std::max(predicted_probs.at(r, y), 1e-12));
    }
    return g;
}

std::vector<int> argmax_rows(const Tensor2& t) {
    std::vector<int> out(t.rows, 0);
    for (std::size_t r = 0; r < t.rows; ++r) {
        const double* row = t.row(r);
        int best = 0;
        for (std::size_t c = 1; c < t.cols; ++c)
            if (row[c] > row[best]) best = static_cast<int>(c);
        out[r] = best;
    }
    return out;
}

}  // namespace fairkit
