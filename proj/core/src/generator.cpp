#include "fairkit/generator.hpp"

#include <cmath>
#include <random>

#include "fairkit/rng.hpp"

namespace fairkit {

std::size_t StyleLatent::total_width() const {
    std::size_t n = 0;
    for (const auto& s : scales) n += s.size();
    return n;
}

std::vector<double> StyleLatent::concat() const {
    std::vector<double> flat;
    flat.reserve(total_width());
    for (const auto& s : scales) flat.insert(flat.end(), s.begin(), s.end());
    return flat;
}

StyleLatent StyleLatent::from_concat(const std::vector<double>& flat, std::size_t num_scales,
                                     std::size_t scale_width) {
    if (flat.size() != num_scales * scale_width)
        throw ShapeError("StyleLatent::from_concat: size mismatch");
    StyleLatent l;
    l.scales.resize(num_scales);
    for (std::size_t i = 0; i < num_scales; ++i)
        l.scales[i].assign(flat.begin() + i * scale_width, flat.begin() + (i + 1) * scale_width);
    return l;
}

ToyGenerator ToyGenerator::make(std::size_t num_scales, std::size_t scale_width, std::size_t side,
                                std::uint64_t seed, double crosstalk) {
    if (num_scales < 2) throw ConfigError("ToyGenerator: needs at least two scales");
    if (scale_width == 0 || side == 0) throw ConfigError("ToyGenerator: zero dimension");
    ToyGenerator g;
    g.num_scales_ = num_scales;
    g.scale_width_ = scale_width;
    g.obs_dim_ = side * side;
    g.s_scale_ = 0;
    g.y_scale_ = 1;

    auto rng = make_rng(seed, stream::kGeneratorDecoder);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto fill = [&](Tensor2& t, double scale) {
        for (double& v : t.values) v = scale * normal(rng);
    };

    const std::size_t block = g.obs_dim_ / num_scales;
    g.params_.resize(num_scales);
    for (std::size_t i = 0; i < num_scales; ++i) {
        auto& p = g.params_[i];
        p.block_begin = i * block;
        p.block_end = (i + 1 == num_scales) ? g.obs_dim_ : (i + 1) * block;
        const std::size_t bsize = p.block_end - p.block_begin;
        p.w1 = Tensor2(g.hidden_, scale_width);
        fill(p.w1, 1.0 / std::sqrt(static_cast<double>(scale_width)));
        p.b1.assign(g.hidden_, 0.0);
        for (auto& b : p.b1) b = 0.2 * normal(rng);
        p.w2 = Tensor2(bsize, g.hidden_);
        fill(p.w2, 0.6 / std::sqrt(static_cast<double>(g.hidden_)));
        // Strong direct linear path keeps the controlling coordinate visible
        // to observation-space classifiers.
        p.direct = Tensor2(bsize, scale_width);
        fill(p.direct, 0.35 / std::sqrt(static_cast<double>(scale_width)));
        for (std::size_t r = 0; r < bsize; ++r)
            p.direct.at(r, 0) = 0.9 * ((r % 2 == 0) ? 1.0 : -1.0) + 0.1 * normal(rng);
        p.crosstalk = Tensor2(g.obs_dim_, scale_width);
        fill(p.crosstalk, crosstalk / std::sqrt(static_cast<double>(scale_width)));
    }
    g.bias_.assign(g.obs_dim_, 0.0);
    for (auto& b : g.bias_) b = 0.1 * normal(rng);
    return g;
}

std::vector<double> ToyGenerator::decode(const StyleLatent& latent) const {
    if (latent.scales.size() != num_scales_)
        throw ShapeError("decode: scale count mismatch");
    std::vector<double> raw = bias_;
    for (std::size_t i = 0; i < num_scales_; ++i) {
        const auto& w = latent.scales[i];
        if (w.size() != scale_width_) throw ShapeError("decode: scale width mismatch");
        const auto& p = params_[i];
        std::vector<double> h(hidden_, 0.0);
        for (std::size_t r = 0; r < hidden_; ++r) {
            double acc = p.b1[r];
            for (std::size_t c = 0; c < scale_width_; ++c) acc += p.w1.at(r, c) * w[c];
            h[r] = std::tanh(acc);
        }
        for (std::size_t r = p.block_begin; r < p.block_end; ++r) {
            double acc = 0;
            const std::size_t rr = r - p.block_begin;
            for (std::size_t c = 0; c < hidden_; ++c) acc += p.w2.at(rr, c) * h[c];
            for (std::size_t c = 0; c < scale_width_; ++c) acc += p.direct.at(rr, c) * w[c];
            raw[r] += acc;
        }
        for (std::size_t r = 0; r < obs_dim_; ++r) {
            double acc = 0;
            for (std::size_t c = 0; c < scale_width_; ++c) acc += p.crosstalk.at(r, c) * w[c];
            raw[r] += acc;
        }
    }
    for (double& v : raw) v = std::tanh(0.7 * v);
    return raw;
}

int ToyGenerator::true_s(const StyleLatent& latent) const {
    return latent.scales[static_cast<std::size_t>(s_scale_)][0] > 0 ? 1 : 0;
}

int ToyGenerator::true_y(const StyleLatent& latent) const {
    return latent.scales[static_cast<std::size_t>(y_scale_)][0] > 0 ? 1 : 0;
}

std::vector<GeneratedPair> sample_pairs(const ToyGenerator& gen, std::size_t n,
                                        std::uint64_t seed) {
    auto rng = make_rng(seed, stream::kGeneratorSample);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<GeneratedPair> pairs;
    pairs.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        StyleLatent l;
        l.scales.resize(gen.num_scales());
        for (auto& s : l.scales) {
            s.resize(gen.scale_width());
            for (double& v : s) v = normal(rng);
        }
        GeneratedPair p;
        p.observation = gen.decode(l);
        p.latent = std::move(l);
        pairs.push_back(std::move(p));
    }
    return pairs;
}

}  // namespace fairkit
