#include "fairkit/adversarial.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "fairkit/metrics.hpp"
#include "fairkit/rng.hpp"

namespace fairkit {

const char* tap_point_name(TapPoint tap) {
    return tap == TapPoint::Logits ? "logits" : "pre_logits";
}

DenseNet build_classifier(const ArchSpec& arch, std::size_t input_width, std::mt19937_64& rng) {
    NetBuilder b(input_width);
    if (!arch.embedding_categories.empty()) b.embedding(arch.embedding_categories, arch.embed_dim);
    for (std::size_t h : arch.hidden) {
        b.linear(h);
        b.leaky_relu();
    }
    b.linear(arch.outputs);
    b.softmax();
    return b.build(rng);
}

void AdvConfig::validate() const {
    if (beta < 0) throw ConfigError("AdvConfig: beta must be >= 0");
    if (noise_sigma < 0) throw ConfigError("AdvConfig: noise_sigma must be >= 0");
    if (beta > 0 && noise_sigma > 0)
        throw ConfigError("AdvConfig: beta>0 and noise_sigma>0 select conflicting method families");
    if (max_epochs <= 0) throw ConfigError("AdvConfig: max_epochs must be positive");
    if (batch_size == 0) throw ConfigError("AdvConfig: batch_size must be positive");
}

int resolve_tap_layer(const DenseNet& net, TapPoint tap) {
    int last_linear = -1;
    for (std::size_t i = 0; i < net.layers.size(); ++i)
        if (net.layers[i].kind == LayerKind::Linear) last_linear = static_cast<int>(i);
    if (last_linear < 0) throw ConfigError("resolve_tap_layer: net has no linear layer");
    if (tap == TapPoint::Logits) return last_linear;
    if (last_linear == 0) throw ConfigError("resolve_tap_layer: no layer before the logits layer");
    return last_linear - 1;
}

Tensor2 adversary_input(const Tensor2& representation, const std::vector<int>& y,
                        std::size_t n_classes, bool sees_label) {
    if (!sees_label) return representation;
    if (y.size() != representation.rows)
        throw ShapeError("adversary_input: label count mismatch");
    Tensor2 out(representation.rows, representation.cols + n_classes);
    for (std::size_t r = 0; r < representation.rows; ++r) {
        for (std::size_t c = 0; c < representation.cols; ++c)
            out.at(r, c) = representation.at(r, c);
        out.at(r, representation.cols + static_cast<std::size_t>(y[r])) = 1.0;
    }
    return out;
}

double adversarial_objective(const DenseNet& predictor, const DenseNet& adversary, int tap_layer,
                             bool adversary_sees_label, const Tensor2& x,
                             const std::vector<int>& y, const std::vector<int>& s, double beta) {
    auto fwd = forward(predictor, x, tap_layer, RunMode::Eval);
    double j = cross_entropy(fwd.output, y);
    if (beta != 0.0) {
        const Tensor2 ain =
            adversary_input(*fwd.tap, y, predictor.output_width(), adversary_sees_label);
        auto afwd = forward(adversary, ain, kNoTap, RunMode::Eval);
        j -= beta * cross_entropy(afwd.output, s);
    }
    return j;
}

ObjectiveGrads adversarial_gradients(const DenseNet& predictor, const DenseNet& adversary,
                                     int tap_layer, bool adversary_sees_label, const Tensor2& x,
                                     const std::vector<int>& y, const std::vector<int>& s,
                                     double beta) {
    auto fwd = forward(predictor, x, tap_layer, RunMode::Eval);
    Tensor2 out_grad = cross_entropy_grad(fwd.output, y);

    ObjectiveGrads grads;
    Tensor2 tap_grad;
    bool have_tap = false;
    if (beta != 0.0) {
        const Tensor2 ain =
            adversary_input(*fwd.tap, y, predictor.output_width(), adversary_sees_label);
        auto afwd = forward(adversary, ain);
        Gradients a_ce = backward(adversary, afwd.cache, cross_entropy_grad(afwd.output, s));
        // Objective carries -beta * H(S; A(R,Y)).
        grads.adversary = a_ce;
        for (auto& lg : grads.adversary.layers) {
            for (double& v : lg.weights.values) v *= -beta;
            for (double& v : lg.biases) v *= -beta;
        }
        tap_grad = Tensor2(x.rows, fwd.tap->cols);
        for (std::size_t r = 0; r < x.rows; ++r)
            for (std::size_t c = 0; c < fwd.tap->cols; ++c)
                tap_grad.at(r, c) = -beta * a_ce.input.at(r, c);
        have_tap = true;
    }
    grads.predictor =
        backward(predictor, fwd.cache, out_grad, tap_layer, have_tap ? &tap_grad : nullptr);
    return grads;
}

namespace {

struct Batch {
    Tensor2 x;
    std::vector<int> y;
    std::vector<int> s;
    std::vector<bool> synthetic;
};

Batch gather(const LabeledDataset& data, const std::vector<std::size_t>& order, std::size_t begin,
             std::size_t end) {
    Batch b;
    std::vector<std::size_t> rows(order.begin() + begin, order.begin() + end);
    b.x = data.features_tensor(rows);
    for (std::size_t i : rows) {
        b.y.push_back(data.y[i]);
        b.s.push_back(data.s[i]);
        b.synthetic.push_back(data.synthetic[i]);
    }
    return b;
}

std::size_t infer_classes(const std::vector<int>& v) {
    int mx = 0;
    for (int c : v) mx = std::max(mx, c);
    return static_cast<std::size_t>(mx) + 1;
}

DenseNet build_predictor(const ArchSpec& f_arch, std::size_t input_width, double noise_sigma,
                         std::mt19937_64& rng) {
    NetBuilder b(input_width);
    if (!f_arch.embedding_categories.empty())
        b.embedding(f_arch.embedding_categories, f_arch.embed_dim);
    for (std::size_t h : f_arch.hidden) {
        b.linear(h);
        b.leaky_relu();
    }
    b.linear(f_arch.outputs);
    if (noise_sigma > 0) b.gaussian_noise(noise_sigma);
    b.softmax();
    return b.build(rng);
}

OptimizerState make_opt(const OptConfig& cfg) {
    OptimizerState opt = cfg.optimizer;
    if (cfg.plateau_scheduler && !opt.plateau) opt.plateau = PlateauScheduler{};
    return opt;
}

// Validation cross-entropy in eval mode; rows with the skip flag are excluded
// from model selection (the TARA+F validation filter).
double validation_loss(const DenseNet& net, const LabeledDataset& val, bool skip_synthetic) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < val.size(); ++i)
        if (!skip_synthetic || !val.synthetic[i]) rows.push_back(i);
    if (rows.empty()) throw DataError("train: validation set is empty after filtering");
    const Tensor2 x = val.features_tensor(rows);
    std::vector<int> y;
    for (std::size_t i : rows) y.push_back(val.y[i]);
    auto fwd = forward(net, x, kNoTap, RunMode::Eval);
    return cross_entropy(fwd.output, y);
}

}  // namespace

TrainedPair train(const LabeledDataset& train_data, const LabeledDataset& val_data,
                  const ArchSpec& f_arch, const ArchSpec& a_arch, const AdvConfig& cfg) {
    cfg.validate();
    if (train_data.size() == 0 || val_data.size() == 0)
        throw DataError("train: empty train or validation split");
    if (cfg.beta > 0) {
        for (std::size_t i = 0; i < train_data.size(); ++i)
            if (train_data.s[i] < 0)
                throw ConfigError("train: beta>0 requires the sensitive attribute on every row");
    }

    const std::size_t n_classes =
        std::max(infer_classes(train_data.y), infer_classes(val_data.y));
    const std::size_t n_groups = std::max(infer_classes(train_data.s), infer_classes(val_data.s));

    auto f_rng = make_rng(cfg.seed, stream::kPredictorInit);
    auto a_rng = make_rng(cfg.seed, stream::kAdversaryInit);
    auto data_rng = make_rng(cfg.seed, stream::kDataShuffle);
    auto noise_rng = make_rng(cfg.seed, stream::kNoise);
    auto pre_rng = make_rng(cfg.seed, stream::kAdversaryPretrain);

    TrainedPair pair;
    pair.n_classes = n_classes;
    pair.n_groups = n_groups;

    ArchSpec f_arch_sized = f_arch;
    f_arch_sized.outputs = n_classes;
    DenseNet F = build_predictor(f_arch_sized, train_data.feature_count(), cfg.noise_sigma, f_rng);
    const int tap_layer = resolve_tap_layer(F, cfg.tap);
    const std::size_t tap_width = F.layers[tap_layer].out_width;
    pair.tap_layer = tap_layer;

    const bool use_adversary = cfg.beta > 0;
    DenseNet A;
    if (use_adversary) {
        ArchSpec a_sized = a_arch;
        a_sized.outputs = n_groups;
        const std::size_t a_in = tap_width + (cfg.adversary_sees_label ? n_classes : 0);
        A = build_classifier(a_sized, a_in, a_rng);
    }

    OptimizerState f_opt = make_opt(cfg.predictor);
    OptimizerState a_opt = make_opt(cfg.adversary);

    std::vector<std::size_t> order(train_data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    auto adversary_rows = [&](const Batch& b) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < b.y.size(); ++i)
            if (!cfg.filter_synthetic_from_adversary || !b.synthetic[i]) rows.push_back(i);
        return rows;
    };

    // Adversary pre-training on the frozen initial predictor.
    if (use_adversary && cfg.adversary_pretrain_epochs > 0) {
        for (int e = 0; e < cfg.adversary_pretrain_epochs; ++e) {
            std::shuffle(order.begin(), order.end(), pre_rng);
            for (std::size_t at = 0; at < order.size(); at += cfg.batch_size) {
                const std::size_t end = std::min(order.size(), at + cfg.batch_size);
                Batch b = gather(train_data, order, at, end);
                const auto rows = adversary_rows(b);
                if (rows.empty()) continue;
                auto fwd = forward(F, b.x, tap_layer, RunMode::Eval);
                Tensor2 r(rows.size(), tap_width);
                std::vector<int> ya, sa;
                for (std::size_t k = 0; k < rows.size(); ++k) {
                    for (std::size_t c = 0; c < tap_width; ++c)
                        r.at(k, c) = fwd.tap->at(rows[k], c);
                    ya.push_back(b.y[rows[k]]);
                    sa.push_back(b.s[rows[k]]);
                }
                const Tensor2 ain = adversary_input(r, ya, n_classes, cfg.adversary_sees_label);
                auto afwd = forward(A, ain);
                auto agrads = backward(A, afwd.cache, cross_entropy_grad(afwd.output, sa));
                apply_step(A, agrads, a_opt);
            }
        }
    }

    DenseNet best_f = F, best_a = A;
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = -1;
    int stale = 0;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const bool update_f = !cfg.freeze_alternation || (epoch % 2 == 0);
        const bool update_a = use_adversary && (!cfg.freeze_alternation || (epoch % 2 == 1));

        std::shuffle(order.begin(), order.end(), data_rng);
        double loss_sum = 0;
        std::size_t loss_rows = 0;

        for (std::size_t at = 0; at < order.size(); at += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), at + cfg.batch_size);
            Batch b = gather(train_data, order, at, end);

            auto fwd = forward(F, b.x, tap_layer, RunMode::Train, &noise_rng);
            const double batch_loss = cross_entropy(fwd.output, b.y);
            loss_sum += batch_loss * static_cast<double>(b.y.size());
            loss_rows += b.y.size();
            Tensor2 out_grad = cross_entropy_grad(fwd.output, b.y);

            Tensor2 tap_grad;
            bool have_tap_grad = false;
            Gradients a_grads;
            bool have_a_grads = false;

            if (use_adversary) {
                const auto rows = adversary_rows(b);
                if (!rows.empty()) {
                    Tensor2 r(rows.size(), tap_width);
                    std::vector<int> ya, sa;
                    for (std::size_t k = 0; k < rows.size(); ++k) {
                        for (std::size_t c = 0; c < tap_width; ++c)
                            r.at(k, c) = fwd.tap->at(rows[k], c);
                        ya.push_back(b.y[rows[k]]);
                        sa.push_back(b.s[rows[k]]);
                    }
                    const Tensor2 ain = adversary_input(r, ya, n_classes, cfg.adversary_sees_label);
                    auto afwd = forward(A, ain);
                    a_grads = backward(A, afwd.cache, cross_entropy_grad(afwd.output, sa));
                    have_a_grads = true;
                    if (update_f) {
                        tap_grad = Tensor2(b.x.rows, tap_width);
                        for (std::size_t k = 0; k < rows.size(); ++k)
                            for (std::size_t c = 0; c < tap_width; ++c)
                                tap_grad.at(rows[k], c) = -cfg.beta * a_grads.input.at(k, c);
                        have_tap_grad = true;
                    }
                }
            }

            if (update_f) {
                auto f_grads = backward(F, fwd.cache, out_grad, tap_layer,
                                        have_tap_grad ? &tap_grad : nullptr);
                try {
                    apply_step(F, f_grads, f_opt);
                } catch (const NumericError& e) {
                    throw NumericError(std::string(e.what()) + " (predictor, epoch " +
                                       std::to_string(epoch) + ")");
                }
            }
            if (update_a && have_a_grads) {
                try {
                    apply_step(A, a_grads, a_opt);
                } catch (const NumericError& e) {
                    throw NumericError(std::string(e.what()) + " (adversary, epoch " +
                                       std::to_string(epoch) + ")");
                }
            }
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_sum / static_cast<double>(loss_rows);
        stats.val_loss = validation_loss(F, val_data, cfg.filter_synthetic_from_validation);
        stats.predictor_lr = f_opt.learning_rate;

        if (use_adversary) {
            std::vector<std::size_t> rows;
            for (std::size_t i = 0; i < val_data.size(); ++i)
                if (!cfg.filter_synthetic_from_adversary || !val_data.synthetic[i])
                    rows.push_back(i);
            if (!rows.empty()) {
                const Tensor2 xv = val_data.features_tensor(rows);
                std::vector<int> yv, sv;
                for (std::size_t i : rows) {
                    yv.push_back(val_data.y[i]);
                    sv.push_back(val_data.s[i]);
                }
                auto fwd = forward(F, xv, tap_layer, RunMode::Eval);
                const Tensor2 ain =
                    adversary_input(*fwd.tap, yv, n_classes, cfg.adversary_sees_label);
                auto afwd = forward(A, ain);
                stats.adversary_loss = cross_entropy(afwd.output, sv);
                const auto pred = argmax_rows(afwd.output);
                std::size_t hits = 0;
                for (std::size_t i = 0; i < pred.size(); ++i) hits += (pred[i] == sv[i]);
                stats.adversary_acc = static_cast<double>(hits) / static_cast<double>(pred.size());
            }
        }
        pair.history.push_back(stats);

        if (cfg.predictor.plateau_scheduler) plateau_update(f_opt, stats.train_loss);
        if (use_adversary && cfg.adversary.plateau_scheduler)
            plateau_update(a_opt, stats.adversary_loss);

        if (stats.val_loss < best_val - 1e-12) {
            best_val = stats.val_loss;
            best_epoch = epoch;
            best_f = F;
            best_a = A;
            stale = 0;
        } else if (++stale >= cfg.early_stop_patience) {
            break;
        }
    }

    pair.predictor = std::move(best_f);
    pair.adversary = std::move(best_a);
    pair.best_epoch = best_epoch;
    pair.has_adversary = use_adversary;
    return pair;
}

TrainedPair train_classifier(const LabeledDataset& train_data, const LabeledDataset& val_data,
                             const ArchSpec& f_arch, const AdvConfig& cfg) {
    cfg.validate();
    if (cfg.beta > 0) throw ConfigError("train_classifier: use train() for adversarial runs");
    if (train_data.size() == 0 || val_data.size() == 0)
        throw DataError("train_classifier: empty split");

    const std::size_t n_classes =
        std::max(infer_classes(train_data.y), infer_classes(val_data.y));
    auto f_rng = make_rng(cfg.seed, stream::kPredictorInit);
    auto data_rng = make_rng(cfg.seed, stream::kDataShuffle);
    auto noise_rng = make_rng(cfg.seed, stream::kNoise);

    ArchSpec sized = f_arch;
    sized.outputs = n_classes;
    DenseNet F = build_predictor(sized, train_data.feature_count(), cfg.noise_sigma, f_rng);
    OptimizerState f_opt = make_opt(cfg.predictor);

    TrainedPair pair;
    pair.n_classes = n_classes;
    pair.n_groups = std::max(infer_classes(train_data.s), infer_classes(val_data.s));
    pair.tap_layer = resolve_tap_layer(F, cfg.tap);

    std::vector<std::size_t> order(train_data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    DenseNet best_f = F;
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = -1;
    int stale = 0;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), data_rng);
        double loss_sum = 0;
        std::size_t loss_rows = 0;
        for (std::size_t at = 0; at < order.size(); at += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), at + cfg.batch_size);
            Batch b = gather(train_data, order, at, end);
            auto fwd = forward(F, b.x, kNoTap, RunMode::Train, &noise_rng);
            loss_sum += cross_entropy(fwd.output, b.y) * static_cast<double>(b.y.size());
            loss_rows += b.y.size();
            auto grads = backward(F, fwd.cache, cross_entropy_grad(fwd.output, b.y));
            apply_step(F, grads, f_opt);
        }
        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_sum / static_cast<double>(loss_rows);
        stats.val_loss = validation_loss(F, val_data, cfg.filter_synthetic_from_validation);
        stats.predictor_lr = f_opt.learning_rate;
        pair.history.push_back(stats);
        if (cfg.predictor.plateau_scheduler) plateau_update(f_opt, stats.train_loss);
        if (stats.val_loss < best_val - 1e-12) {
            best_val = stats.val_loss;
            best_epoch = epoch;
            best_f = F;
            stale = 0;
        } else if (++stale >= cfg.early_stop_patience) {
            break;
        }
    }
    pair.predictor = std::move(best_f);
    pair.best_epoch = best_epoch;
    pair.has_adversary = false;
    return pair;
}

DenseNet fit_classifier(const Tensor2& x, const std::vector<int>& labels, const ArchSpec& arch,
                        const AdvConfig& cfg) {
    if (x.rows != labels.size()) throw ShapeError("fit_classifier: rows/labels mismatch");
    if (x.rows < 4) throw DataError("fit_classifier: too few rows");
    // In-memory dataset with an internal 85/15 train/val carve.
    LabeledDataset all;
    all.schema.target_column = "y";
    all.schema.sensitive_column = "s";
    for (std::size_t c = 0; c < x.cols; ++c)
        all.schema.features.push_back(ColumnSpec::numeric("f" + std::to_string(c)));
    all.feature_encodings.resize(x.cols);
    for (std::size_t r = 0; r < x.rows; ++r) {
        std::vector<double> row(x.cols);
        for (std::size_t c = 0; c < x.cols; ++c) row[c] = x.at(r, c);
        all.x.push_back(std::move(row));
        all.y.push_back(labels[r]);
        all.s.push_back(0);
        all.synthetic.push_back(false);
    }
    std::vector<std::size_t> order(all.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto rng = make_rng(cfg.seed, stream::kPartition);
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t n_val = std::max<std::size_t>(1, order.size() * 15 / 100);
    std::vector<std::size_t> val_idx(order.begin(), order.begin() + n_val);
    std::vector<std::size_t> train_idx(order.begin() + n_val, order.end());
    TrainedPair fit = train_classifier(all.subset(train_idx), all.subset(val_idx), arch, cfg);
    return std::move(fit.predictor);
}

Prediction predict(const TrainedPair& pair, const Tensor2& x) {
    if (x.cols != pair.predictor.input_width)
        throw ShapeError("predict: input width " + std::to_string(x.cols) + " != net input " +
                         std::to_string(pair.predictor.input_width));
    auto fwd = forward(pair.predictor, x, pair.tap_layer, RunMode::Eval);
    Prediction p;
    p.scores = fwd.output;
    p.labels = argmax_rows(fwd.output);
    p.representation = *fwd.tap;
    return p;
}

PredictionDump make_dump(const TrainedPair& pair, const LabeledDataset& data) {
    const Tensor2 x = data.features_tensor();
    Prediction p = predict(pair, x);
    PredictionDump dump;
    dump.rows.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        PredictionRow r;
        r.score = p.scores.cols > 1 ? p.scores.at(i, 1) : p.scores.at(i, 0);
        r.pred = p.labels[i];
        r.label = data.y[i];
        r.group = data.s[i];
        r.synthetic = data.synthetic[i];
        dump.rows.push_back(r);
    }
    for (const auto& [name, code] : data.sensitive_encoding) {
        if (dump.group_names.size() <= static_cast<std::size_t>(code))
            dump.group_names.resize(code + 1);
        dump.group_names[code] = name;
    }
    return dump;
}

ProbeResult adversary_probe(const TrainedPair& pair, const LabeledDataset& heldout,
                            std::uint64_t seed) {
    if (heldout.size() < 20) throw DataError("adversary_probe: heldout set too small");
    const std::size_t n_groups = infer_classes(heldout.s);
    std::set<int> distinct(heldout.s.begin(), heldout.s.end());
    if (distinct.size() < 2)
        throw DataError("adversary_probe: sensitive attribute has a single class");

    const Tensor2 x = heldout.features_tensor();
    Prediction p = predict(pair, x);

    std::vector<std::size_t> order(heldout.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto rng = make_rng(seed ^ 0x9e42, stream::kProbe);
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t half = order.size() / 2;

    Tensor2 train_x(half, p.representation.cols);
    std::vector<int> train_s;
    for (std::size_t i = 0; i < half; ++i) {
        for (std::size_t c = 0; c < p.representation.cols; ++c)
            train_x.at(i, c) = p.representation.at(order[i], c);
        train_s.push_back(heldout.s[order[i]]);
    }
    if (infer_classes(train_s) < 2)
        throw DataError("adversary_probe: probe training half has a single class");

    ArchSpec probe_arch;
    probe_arch.hidden = {32};
    probe_arch.outputs = n_groups;
    AdvConfig probe_cfg;
    probe_cfg.seed = derive_seed(seed, stream::kProbe);
    probe_cfg.max_epochs = 200;
    probe_cfg.early_stop_patience = 15;
    probe_cfg.batch_size = 64;
    probe_cfg.predictor.optimizer = OptimizerState::adam(3e-3);
    DenseNet probe = fit_classifier(train_x, train_s, probe_arch, probe_cfg);

    std::size_t hits = 0;
    std::vector<std::size_t> class_counts(n_groups, 0);
    const std::size_t n_eval = order.size() - half;
    Tensor2 eval_x(n_eval, p.representation.cols);
    std::vector<int> eval_s;
    for (std::size_t i = 0; i < n_eval; ++i) {
        for (std::size_t c = 0; c < p.representation.cols; ++c)
            eval_x.at(i, c) = p.representation.at(order[half + i], c);
        eval_s.push_back(heldout.s[order[half + i]]);
    }
    auto scores = forward(probe, eval_x);
    const auto preds = argmax_rows(scores.output);
    for (std::size_t i = 0; i < n_eval; ++i) {
        hits += (preds[i] == eval_s[i]);
        class_counts[static_cast<std::size_t>(eval_s[i])] += 1;
    }
    ProbeResult res;
    res.probe_accuracy = static_cast<double>(hits) / static_cast<double>(n_eval);
    res.majority_baseline =
        static_cast<double>(*std::max_element(class_counts.begin(), class_counts.end())) /
        static_cast<double>(n_eval);
    return res;
}

}  // namespace fairkit
