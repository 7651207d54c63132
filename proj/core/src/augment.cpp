#include "fairkit/augment.hpp"

#include <algorithm>
#include <cmath>

#include "fairkit/rng.hpp"

namespace fairkit {

Tensor2 observations_tensor(const std::vector<GeneratedPair>& pairs) {
    if (pairs.empty()) return {};
    Tensor2 t(pairs.size(), pairs[0].observation.size());
    for (std::size_t r = 0; r < pairs.size(); ++r)
        for (std::size_t c = 0; c < pairs[r].observation.size(); ++c)
            t.at(r, c) = pairs[r].observation[c];
    return t;
}

Tensor2 latents_tensor(const std::vector<GeneratedPair>& pairs) {
    if (pairs.empty()) return {};
    const auto first = pairs[0].latent.concat();
    Tensor2 t(pairs.size(), first.size());
    for (std::size_t r = 0; r < pairs.size(); ++r) {
        const auto flat = pairs[r].latent.concat();
        for (std::size_t c = 0; c < flat.size(); ++c) t.at(r, c) = flat[c];
    }
    return t;
}

DenseNet train_c1(const Tensor2& observations, const std::vector<int>& labels,
                  std::uint64_t seed) {
    std::size_t pos = 0;
    for (int v : labels) pos += (v == 1);
    if (pos == 0 || pos == labels.size())
        throw DataError("train_c1: labels are single-class");
    ArchSpec arch;
    arch.hidden = {32};
    arch.outputs = 2;
    AdvConfig cfg;
    cfg.seed = seed;
    cfg.max_epochs = 60;
    cfg.early_stop_patience = 8;
    cfg.batch_size = 64;
    cfg.predictor.optimizer = OptimizerState::adam(2e-3);
    return fit_classifier(observations, labels, arch, cfg);
}

std::vector<int> label_pairs(const DenseNet& c1, const std::vector<GeneratedPair>& pairs) {
    if (pairs.empty()) return {};
    auto fwd = forward(c1, observations_tensor(pairs));
    return argmax_rows(fwd.output);
}

DenseNet train_c2(const std::vector<GeneratedPair>& pairs, const std::vector<int>& c1_labels,
                  std::uint64_t seed, double agreement_floor) {
    if (pairs.size() != c1_labels.size()) throw ShapeError("train_c2: pairs/labels mismatch");
    if (pairs.size() < 20) throw DataError("train_c2: too few pairs");
    std::size_t pos = 0;
    for (int v : c1_labels) pos += (v == 1);
    if (pos == 0 || pos == c1_labels.size())
        throw DataError("train_c2: labels are single-class");

    const std::size_t holdout = std::max<std::size_t>(10, pairs.size() / 5);
    const std::size_t fit_n = pairs.size() - holdout;
    Tensor2 lat = latents_tensor(pairs);
    Tensor2 fit_x(fit_n, lat.cols);
    std::vector<int> fit_y(c1_labels.begin(), c1_labels.begin() + fit_n);
    for (std::size_t r = 0; r < fit_n; ++r)
        for (std::size_t c = 0; c < lat.cols; ++c) fit_x.at(r, c) = lat.at(r, c);

    ArchSpec arch;
    arch.hidden = {16};
    arch.outputs = 2;
    AdvConfig cfg;
    cfg.seed = seed ^ 0x5a17;
    cfg.max_epochs = 80;
    cfg.early_stop_patience = 10;
    cfg.batch_size = 64;
    cfg.predictor.optimizer = OptimizerState::adam(3e-3);
    DenseNet c2 = fit_classifier(fit_x, fit_y, arch, cfg);

    Tensor2 hold_x(holdout, lat.cols);
    for (std::size_t r = 0; r < holdout; ++r)
        for (std::size_t c = 0; c < lat.cols; ++c) hold_x.at(r, c) = lat.at(fit_n + r, c);
    auto fwd = forward(c2, hold_x);
    const auto pred = argmax_rows(fwd.output);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < holdout; ++r) hits += (pred[r] == c1_labels[fit_n + r]);
    const double agreement = static_cast<double>(hits) / static_cast<double>(holdout);
    if (agreement < agreement_floor)
        throw DistillationError("train_c2: held-out agreement " + std::to_string(agreement) +
                                    " below floor " + std::to_string(agreement_floor),
                                agreement);
    return c2;
}

void AugmentConfig::validate(std::size_t num_scales) const {
    if (gamma < 0) throw DomainError("AugmentConfig: gamma must be >= 0");
    if (steps < 0) throw DomainError("AugmentConfig: steps must be >= 0");
    if (!(desired_confidence > 0.5 && desired_confidence <= 1.0))
        throw DomainError("AugmentConfig: desired_confidence must lie in (0.5, 1]");
    for (int i : scale_mask)
        if (i < 0 || static_cast<std::size_t>(i) >= num_scales)
            throw DomainError("AugmentConfig: scale mask index out of range");
}

namespace {

double target_probability(const DenseNet& c2, const std::vector<double>& flat, int target_class) {
    Tensor2 x(1, flat.size());
    x.values = flat;
    auto fwd = forward(c2, x);
    return fwd.output.at(0, target_class);
}

}  // namespace

TransformResult transform(const StyleLatent& latent, const DenseNet& c2, int target_class,
                          const AugmentConfig& cfg) {
    cfg.validate(latent.scales.size());
    const std::size_t num_scales = latent.scales.size();
    const std::size_t width = latent.scales.empty() ? 0 : latent.scales[0].size();
    for (const auto& s : latent.scales)
        if (s.size() != width) throw ShapeError("transform: ragged scales unsupported");

    std::vector<bool> movable(num_scales, false);
    for (int i : cfg.scale_mask) movable[static_cast<std::size_t>(i)] = true;

    std::vector<double> w = latent.concat();
    TransformResult res;
    res.trajectory.push_back(target_probability(c2, w, target_class));
    if (res.trajectory.front() >= cfg.desired_confidence) {
        res.reached = true;
        res.latent = latent;
        res.latent.update_mask = cfg.scale_mask;
        return res;
    }

    double gamma = cfg.gamma;
    for (int j = 0; j < cfg.steps && gamma > 0; ++j) {
        Tensor2 x(1, w.size());
        x.values = w;
        auto fwd = forward(c2, x);
        const double p = fwd.output.at(0, target_class);
        Tensor2 og(1, fwd.output.cols);
        og.at(0, target_class) = 1.0 / std::max(p, 1e-12);  // d log p / d probs
        auto grads = backward(c2, fwd.cache, og);

        const double cur_log = std::log(std::max(p, 1e-12));
        bool stepped = false;
        for (int halving = 0; halving < 60; ++halving) {
            std::vector<double> trial = w;
            for (std::size_t i = 0; i < num_scales; ++i) {
                if (!movable[i]) continue;
                for (std::size_t k = 0; k < width; ++k)
                    trial[i * width + k] += gamma * grads.input.at(0, i * width + k);
            }
            const double p_trial = target_probability(c2, trial, target_class);
            if (std::log(std::max(p_trial, 1e-12)) >= cur_log - 1e-12) {
                w = std::move(trial);
                res.trajectory.push_back(p_trial);
                stepped = true;
                break;
            }
            gamma *= 0.5;  // overshoot: halve and retry
        }
        if (!stepped) break;
        if (res.trajectory.back() >= cfg.desired_confidence) {
            res.reached = true;
            break;
        }
    }
    if (cfg.steps == 0 || cfg.gamma == 0) res.reached = res.trajectory.front() >= cfg.desired_confidence;

    res.latent = StyleLatent::from_concat(w, num_scales, width);
    res.latent.update_mask = cfg.scale_mask;
    return res;
}

std::vector<double> scale_sensitivity(const ToyGenerator& gen, const DenseNet& c2,
                                      int target_class, std::size_t samples,
                                      std::uint64_t seed) {
    auto pairs = sample_pairs(gen, samples, seed);
    std::vector<double> sens(gen.num_scales(), 0.0);
    for (const auto& pr : pairs) {
        auto flat = pr.latent.concat();
        Tensor2 x(1, flat.size());
        x.values = flat;
        auto fwd = forward(c2, x);
        const double p = fwd.output.at(0, target_class);
        Tensor2 og(1, fwd.output.cols);
        og.at(0, target_class) = 1.0 / std::max(p, 1e-12);
        auto grads = backward(c2, fwd.cache, og);
        for (std::size_t i = 0; i < gen.num_scales(); ++i) {
            double norm = 0;
            for (std::size_t k = 0; k < gen.scale_width(); ++k) {
                const double g = grads.input.at(0, i * gen.scale_width() + k);
                norm += g * g;
            }
            sens[i] += std::sqrt(norm);
        }
    }
    for (double& v : sens) v /= static_cast<double>(std::max<std::size_t>(1, samples));
    return sens;
}

SyntheticBatch synthesize_missing(const ToyGenerator& gen, const DenseNet& c1_y,
                                  const DenseNet& c1_s, const SynthesisConfig& cfg,
                                  std::size_t n) {
    SyntheticBatch out;
    out.requested = n;
    out.x = Tensor2(0, gen.observation_dim());
    if (n == 0) return out;

    // Distill latent classifiers for both attributes from C1-labeled samples.
    auto pool = sample_pairs(gen, cfg.c2_train_pairs, derive_seed(cfg.seed, stream::kAugment));
    const auto labels_y = label_pairs(c1_y, pool);
    const auto labels_s = label_pairs(c1_s, pool);
    const DenseNet c2_y = train_c2(pool, labels_y, cfg.seed ^ 0x11, cfg.c2_agreement_floor);
    const DenseNet c2_s = train_c2(pool, labels_s, cfg.seed ^ 0x22, cfg.c2_agreement_floor);

    AugmentConfig tf_y;
    tf_y.gamma = cfg.gamma;
    tf_y.steps = cfg.steps;
    tf_y.desired_confidence = cfg.desired_confidence;
    tf_y.scale_mask = cfg.mask_y;
    tf_y.target = AugmentConfig::TargetKind::LabelY;
    AugmentConfig tf_s = tf_y;
    tf_s.scale_mask = cfg.mask_s;
    tf_s.target = AugmentConfig::TargetKind::AttributeS;

    std::vector<double> accepted_rows;
    const std::size_t max_attempts = std::max<std::size_t>(20 * n, 200);
    std::uint64_t round_seed = derive_seed(cfg.seed, 0xfeed);
    while (out.accepted < n && out.attempted < max_attempts) {
        const std::size_t batch = std::min<std::size_t>(std::max<std::size_t>(2 * n, 32),
                                                        max_attempts - out.attempted);
        auto cands = sample_pairs(gen, batch, round_seed++);
        for (auto& cand : cands) {
            if (out.accepted >= n || out.attempted >= max_attempts) break;
            ++out.attempted;
            StyleLatent w = cand.latent;
            std::vector<double> traj;
            {
                auto ry = transform(w, c2_y, cfg.target_y, tf_y);
                w = ry.latent;
                traj.insert(traj.end(), ry.trajectory.begin(), ry.trajectory.end());
            }
            {
                auto rs = transform(w, c2_s, cfg.target_s, tf_s);
                w = rs.latent;
                traj.insert(traj.end(), rs.trajectory.begin(), rs.trajectory.end());
            }
            const auto obs = gen.decode(w);
            Tensor2 xt(1, obs.size());
            xt.values = obs;
            const double py = forward(c1_y, xt).output.at(0, cfg.target_y);
            const double ps = forward(c1_s, xt).output.at(0, cfg.target_s);
            if (py >= cfg.desired_confidence && ps >= cfg.desired_confidence) {
                accepted_rows.insert(accepted_rows.end(), obs.begin(), obs.end());
                out.y.push_back(cfg.target_y);
                out.s.push_back(cfg.target_s);
                out.trajectories.push_back(std::move(traj));
                ++out.accepted;
            }
        }
    }

    if (out.accepted * 10 < n)
        throw DataError("synthesize_missing: yield " + std::to_string(out.accepted) + "/" +
                        std::to_string(n) + " after " + std::to_string(out.attempted) +
                        " attempts (below the 10% floor)");

    out.x = Tensor2(out.accepted, gen.observation_dim());
    out.x.values = std::move(accepted_rows);
    return out;
}

}  // namespace fairkit
