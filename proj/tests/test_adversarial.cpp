#include <doctest.h>

#include <cmath>
#include <random>

#include "fairkit/adversarial.hpp"
#include "fairkit/dataset.hpp"
#include "fairkit/metrics.hpp"
#include "fairkit/rng.hpp"
#include "test_util.hpp"

using namespace fairkit;

namespace {

// Y = feature1 xor-noise; S carried by the continuous feature2 with
// correlation ~0.9 (x2 = (2S-1) + 0.4843*N(0,1)); the (Y=1,S=1) cell is
// excluded downstream so the confound becomes predictive at train time.
LabeledDataset xor_noise_data(std::size_t n, std::uint64_t seed) {
    LabeledDataset d;
    d.schema.features = {ColumnSpec::categorical("x1"), ColumnSpec::numeric("x2")};
    d.schema.target_column = "y";
    d.schema.sensitive_column = "s";
    d.feature_encodings.resize(2);
    auto rng = make_rng(seed, stream::kSynthData);
    std::bernoulli_distribution coin(0.5);
    std::bernoulli_distribution flip(0.1);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        const int x1 = coin(rng) ? 1 : 0;
        const int y = flip(rng) ? 1 - x1 : x1;
        const int s = coin(rng) ? 1 : 0;
        const double x2 = (2 * s - 1) + 0.4843 * normal(rng);
        d.x.push_back({static_cast<double>(x1), x2});
        d.y.push_back(y);
        d.s.push_back(s);
        d.synthetic.push_back(false);
    }
    return d;
}

ArchSpec tabular_arch(const LabeledDataset& d) {
    ArchSpec arch;
    arch.embedding_categories = d.categories_per_feature();
    arch.embed_dim = 8;
    arch.hidden = {16};
    return arch;
}

bool nets_identical(const DenseNet& a, const DenseNet& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        if (a.layers[l].weights.values != b.layers[l].weights.values) return false;
        if (a.layers[l].biases != b.layers[l].biases) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("config validation: conflicting method families rejected") {
    AdvConfig cfg;
    cfg.beta = 1.0;
    cfg.noise_sigma = 0.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.noise_sigma = 0;
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("beta=0 adversarial trainer is bit-identical to the plain classifier trainer") {
    SynthSpec spec;
    spec.n = 600;
    spec.seed = 31;
    auto data = synth_tabular(spec);
    PartitionSpec pspec;
    pspec.seed = 31;
    auto parts = partition(data, pspec);
    const ArchSpec arch = tabular_arch(data);

    AdvConfig cfg;
    cfg.seed = 77;
    cfg.max_epochs = 8;
    cfg.early_stop_patience = 8;
    auto plain = train_classifier(parts.train, parts.val, arch, cfg);
    auto degenerate = train(parts.train, parts.val, arch, ArchSpec{}, cfg);

    CHECK(nets_identical(plain.predictor, degenerate.predictor));
    CHECK(!degenerate.has_adversary);  // adversary untouched
    CHECK(degenerate.adversary.layers.empty());
    REQUIRE(plain.history.size() == degenerate.history.size());
    for (std::size_t e = 0; e < plain.history.size(); ++e) {
        CHECK(plain.history[e].train_loss == degenerate.history[e].train_loss);
        CHECK(plain.history[e].val_loss == degenerate.history[e].val_loss);
    }
}

TEST_CASE("beta>0 with missing sensitive attribute is a config error") {
    SynthSpec spec;
    spec.n = 100;
    spec.seed = 3;
    auto data = synth_tabular(spec);
    data.s[5] = -1;
    PartitionSpec pspec;
    pspec.seed = 3;
    auto parts = partition(data, pspec);
    parts.train.s[0] = -1;
    AdvConfig cfg;
    cfg.beta = 1.0;
    cfg.max_epochs = 2;
    cfg.adversary_pretrain_epochs = 0;
    CHECK_THROWS_AS(train(parts.train, parts.val, tabular_arch(data), ArchSpec{}, cfg),
                    ConfigError);
}

TEST_CASE("predict: deterministic, normalized, tap width matches config") {
    SynthSpec spec;
    spec.n = 400;
    spec.seed = 5;
    auto data = synth_tabular(spec);
    PartitionSpec pspec;
    pspec.seed = 5;
    auto parts = partition(data, pspec);
    AdvConfig cfg;
    cfg.seed = 5;
    cfg.max_epochs = 4;
    cfg.noise_sigma = 0.3;  // noise layer must be inert at evaluation
    auto pair = train(parts.train, parts.val, tabular_arch(data), ArchSpec{}, cfg);

    const Tensor2 x = parts.test.features_tensor();
    auto a = predict(pair, x);
    auto b = predict(pair, x);
    CHECK(a.scores.values == b.scores.values);
    CHECK(a.representation.values == b.representation.values);
    for (std::size_t r = 0; r < a.scores.rows; ++r) {
        double sum = 0;
        for (std::size_t c = 0; c < a.scores.cols; ++c) sum += a.scores.at(r, c);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
    // Logits tap: width equals the class count.
    CHECK(a.representation.cols == pair.n_classes);

    Tensor2 bad(2, x.cols + 1);
    CHECK_THROWS_AS(predict(pair, bad), ShapeError);
}

TEST_CASE("full min-max objective gradients match finite differences") {
    // 2-layer predictor, 1-layer adversary, 16-row batch.
    auto f_rng = make_rng(11, stream::kPredictorInit);
    NetBuilder fb(3);
    fb.linear(6).leaky_relu().linear(2).softmax();
    DenseNet F = fb.build(f_rng);
    const int tap = 2;  // logits

    auto a_rng = make_rng(12, stream::kAdversaryInit);
    NetBuilder ab(2 + 2);  // logits + one-hot label
    ab.linear(2).softmax();
    DenseNet A = ab.build(a_rng);

    std::mt19937_64 xr(99);
    std::normal_distribution<double> normal(0.0, 1.0);
    Tensor2 x(16, 3);
    for (double& v : x.values) v = normal(xr);
    std::vector<int> y, s;
    for (int i = 0; i < 16; ++i) {
        y.push_back(static_cast<int>(xr() % 2));
        s.push_back(static_cast<int>(xr() % 2));
    }
    const double beta = 0.8;

    auto grads = adversarial_gradients(F, A, tap, true, x, y, s, beta);
    auto objective = [&]() { return adversarial_objective(F, A, tap, true, x, y, s, beta); };

    double max_err = 0;
    testutil::for_each_param(F, [&](std::size_t l, double& value, bool w, std::size_t k) {
        const double fd = testutil::central_diff(objective, value);
        const double an =
            w ? grads.predictor.layers[l].weights.values[k] : grads.predictor.layers[l].biases[k];
        max_err = std::max(max_err, testutil::rel_err(fd, an));
    });
    testutil::for_each_param(A, [&](std::size_t l, double& value, bool w, std::size_t k) {
        const double fd = testutil::central_diff(objective, value);
        const double an =
            w ? grads.adversary.layers[l].weights.values[k] : grads.adversary.layers[l].biases[k];
        max_err = std::max(max_err, testutil::rel_err(fd, an));
    });
    CHECK(max_err < 1e-4);
}

TEST_CASE("adversarial term scales linearly in beta and never flips direction") {
    auto f_rng = make_rng(21, stream::kPredictorInit);
    NetBuilder fb(2);
    fb.linear(4).leaky_relu().linear(2).softmax();
    DenseNet F = fb.build(f_rng);
    auto a_rng = make_rng(22, stream::kAdversaryInit);
    NetBuilder ab(4);
    ab.linear(2).softmax();
    DenseNet A = ab.build(a_rng);

    Tensor2 x = Tensor2::from_rows({{0.4, -1.2}, {1.1, 0.3}, {-0.6, 0.8}, {0.2, 0.1}});
    std::vector<int> y = {0, 1, 1, 0};
    std::vector<int> s = {1, 0, 1, 0};

    auto flatten = [](const Gradients& g) {
        std::vector<double> flat;
        for (const auto& lg : g.layers) {
            flat.insert(flat.end(), lg.weights.values.begin(), lg.weights.values.end());
            flat.insert(flat.end(), lg.biases.begin(), lg.biases.end());
        }
        return flat;
    };
    const auto g0 = flatten(adversarial_gradients(F, A, 2, true, x, y, s, 0.0).predictor);
    const auto g1 = flatten(adversarial_gradients(F, A, 2, true, x, y, s, 1.0).predictor);
    const auto g2 = flatten(adversarial_gradients(F, A, 2, true, x, y, s, 2.0).predictor);

    double dot = 0;
    for (std::size_t k = 0; k < g0.size(); ++k) {
        const double adv1 = g1[k] - g0[k];
        const double adv2 = g2[k] - g0[k];
        CHECK(adv2 == doctest::Approx(2 * adv1).epsilon(1e-9));
        dot += adv1 * adv2;
    }
    CHECK(dot >= 0);  // doubling beta never shrinks the adversarial component
}

TEST_CASE("checkpoint selection returns the argmin-validation epoch, not the last") {
    // Tiny train set + long run: validation loss rises after the optimum.
    SynthSpec spec;
    spec.n = 260;
    spec.seed = 17;
    auto data = synth_tabular(spec);
    PartitionSpec pspec;
    pspec.seed = 17;
    pspec.train_frac = 0.3;
    pspec.val_frac = 0.5;
    pspec.test_frac = 0.2;
    auto parts = partition(data, pspec);
    AdvConfig cfg;
    cfg.seed = 17;
    cfg.max_epochs = 60;
    cfg.early_stop_patience = 60;  // no early stop: force full history
    cfg.predictor.optimizer = OptimizerState::adam(2e-2);
    cfg.predictor.plateau_scheduler = false;
    auto pair = train_classifier(parts.train, parts.val, tabular_arch(data), cfg);

    REQUIRE(pair.best_epoch >= 0);
    double best = 1e300;
    int best_epoch = -1;
    for (const auto& h : pair.history)
        if (h.val_loss < best - 1e-12) {
            best = h.val_loss;
            best_epoch = h.epoch;
        }
    CHECK(pair.best_epoch == best_epoch);
    CHECK(pair.best_epoch < static_cast<int>(pair.history.size()) - 1);

    // The returned parameters realize exactly the best validation loss.
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < parts.val.size(); ++i) rows.push_back(i);
    auto fwd = forward(pair.predictor, parts.val.features_tensor(rows));
    CHECK(cross_entropy(fwd.output, parts.val.y) == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("history is recorded per epoch in order") {
    SynthSpec spec;
    spec.n = 200;
    spec.seed = 8;
    auto data = synth_tabular(spec);
    PartitionSpec pspec;
    pspec.seed = 8;
    auto parts = partition(data, pspec);
    AdvConfig cfg;
    cfg.seed = 8;
    cfg.max_epochs = 5;
    auto pair = train_classifier(parts.train, parts.val, tabular_arch(data), cfg);
    for (std::size_t e = 0; e < pair.history.size(); ++e)
        CHECK(pair.history[e].epoch == static_cast<int>(e));
}

TEST_CASE("adversary_probe: constant representation scores at the majority baseline") {
    SynthSpec spec;
    spec.n = 2000;
    spec.seed = 9;
    auto data = synth_tabular(spec);
    // Predictor with zeroed final linear layer: logits constant across inputs.
    AdvConfig cfg;
    cfg.seed = 9;
    cfg.max_epochs = 1;
    PartitionSpec pspec;
    pspec.seed = 9;
    auto parts = partition(data, pspec);
    auto pair = train_classifier(parts.train, parts.val, tabular_arch(data), cfg);
    for (auto& l : pair.predictor.layers)
        if (l.kind == LayerKind::Linear) {
            for (double& v : l.weights.values) v = 0;
            for (double& v : l.biases) v = 0;
        }
    auto res = adversary_probe(pair, parts.test, 9);
    CHECK(res.probe_accuracy == doctest::Approx(res.majority_baseline).epsilon(0.05));
}

TEST_CASE("adversary_probe: representation equal to one-hot S is fully recoverable") {
    // Identity net: R = input = one-hot of S.
    NetBuilder b(2);
    b.linear(2).softmax();
    auto rng = make_rng(1, stream::kPredictorInit);
    TrainedPair pair;
    pair.predictor = b.build(rng);
    pair.predictor.layers[0].weights = Tensor2::from_rows({{1, 0}, {0, 1}});
    pair.predictor.layers[0].biases = {0, 0};
    pair.tap_layer = 0;

    LabeledDataset d;
    d.schema.features = {ColumnSpec::numeric("a"), ColumnSpec::numeric("b")};
    d.schema.target_column = "y";
    d.schema.sensitive_column = "s";
    d.feature_encodings.resize(2);
    auto drng = make_rng(2, stream::kSynthData);
    for (int i = 0; i < 300; ++i) {
        const int s = static_cast<int>(drng() % 2);
        d.x.push_back({s ? 0.0 : 1.0, s ? 1.0 : 0.0});
        d.y.push_back(static_cast<int>(drng() % 2));
        d.s.push_back(s);
        d.synthetic.push_back(false);
    }
    auto res = adversary_probe(pair, d, 3);
    CHECK(res.probe_accuracy > 0.98);

    for (auto& s : d.s) s = 1;
    CHECK_THROWS_AS(adversary_probe(pair, d, 3), DataError);
}

TEST_CASE("xor-noise benchmark: AD suppresses the confound the baseline leaks") {
    auto data = xor_noise_data(4000, 41);
    PartitionSpec pspec;
    pspec.excluded_y = 1;
    pspec.excluded_s = 1;
    pspec.seed = 41;
    auto parts = partition(data, pspec);
    const ArchSpec f_arch = tabular_arch(data);
    ArchSpec a_arch;
    a_arch.hidden = {64};

    AdvConfig cfg;
    cfg.seed = 41;
    cfg.max_epochs = 40;
    cfg.early_stop_patience = 8;
    auto baseline = train_classifier(parts.train, parts.val, f_arch, cfg);
    auto base_probe = adversary_probe(baseline, parts.test, 41);
    CHECK(base_probe.probe_accuracy >= 0.80);

    AdvConfig ad_cfg = cfg;
    ad_cfg.beta = 1.0;
    auto ad = train(parts.train, parts.val, f_arch, a_arch, ad_cfg);
    auto ad_probe = adversary_probe(ad, parts.test, 41);
    CHECK(ad_probe.probe_accuracy <= 0.60);
    CHECK(ad_probe.probe_accuracy <= base_probe.probe_accuracy);
}

TEST_CASE("ADDP variant lowers the parity deviation below the baseline") {
    auto data = xor_noise_data(4000, 43);
    PartitionSpec pspec;
    pspec.excluded_y = 1;
    pspec.excluded_s = 1;
    pspec.seed = 43;
    auto parts = partition(data, pspec);
    const ArchSpec f_arch = tabular_arch(data);
    ArchSpec a_arch;
    a_arch.hidden = {64};

    AdvConfig cfg;
    cfg.seed = 43;
    cfg.max_epochs = 40;
    cfg.early_stop_patience = 8;
    auto baseline = train_classifier(parts.train, parts.val, f_arch, cfg);
    const double base_parity =
        fairness_check(make_dump(baseline, parts.test), FairnessCriterion::DemographicParity)
            .max_deviation;

    AdvConfig addp_cfg = cfg;
    addp_cfg.beta = 1.0;
    addp_cfg.adversary_sees_label = false;  // ADDP: adversary sees logits only
    auto addp = train(parts.train, parts.val, f_arch, a_arch, addp_cfg);
    const double addp_parity =
        fairness_check(make_dump(addp, parts.test), FairnessCriterion::DemographicParity)
            .max_deviation;
    CHECK(addp_parity < base_parity);
}

TEST_CASE("freeze alternation trains and only touches one network per epoch") {
    SynthSpec spec;
    spec.n = 500;
    spec.seed = 51;
    auto data = synth_tabular(spec);
    PartitionSpec pspec;
    pspec.seed = 51;
    auto parts = partition(data, pspec);
    AdvConfig cfg;
    cfg.seed = 51;
    cfg.beta = 0.5;
    cfg.freeze_alternation = true;
    cfg.max_epochs = 6;
    cfg.adversary_pretrain_epochs = 2;
    ArchSpec a_arch;
    a_arch.hidden = {16};
    auto pair = train(parts.train, parts.val, tabular_arch(data), a_arch, cfg);
    CHECK(pair.has_adversary);
    CHECK(pair.history.size() >= 2);
}

TEST_CASE("synthetic filtering keeps synthetic rows out of adversary batches") {
    // Synthetic rows carry an S value opposite to every real row; if filtering
    // works, the adversary sees a single S class and its val accuracy on the
    // filtered set stays pinned at 1 (majority of one class).
    SynthSpec spec;
    spec.n = 400;
    spec.seed = 60;
    auto data = synth_tabular(spec);
    for (auto& s : data.s) s = 0;
    PartitionSpec pspec;
    pspec.seed = 60;
    auto parts = partition(data, pspec);
    // Append synthetic rows with s=1 to the train set.
    LabeledDataset synth;
    synth.schema = parts.train.schema;
    synth.feature_encodings = parts.train.feature_encodings;
    for (int i = 0; i < 50; ++i) {
        synth.x.push_back(parts.train.x[i]);
        synth.y.push_back(parts.train.y[i]);
        synth.s.push_back(1);
        synth.synthetic.push_back(true);
    }
    auto merged = merge_synthetic(parts.train, synth);

    AdvConfig cfg;
    cfg.seed = 60;
    cfg.beta = 0.5;
    cfg.max_epochs = 3;
    cfg.adversary_pretrain_epochs = 0;
    cfg.filter_synthetic_from_adversary = true;
    ArchSpec a_arch;
    a_arch.hidden = {8};
    // With filtering the adversary's world is single-class; training must not
    // blow up, and its accuracy on the (filtered, all-s=0) val rows is 1.
    auto pair = train(merged, parts.val, tabular_arch(data), a_arch, cfg);
    CHECK(pair.history.back().adversary_acc == doctest::Approx(1.0));

    // Without filtering the mixed-class adversary cannot be pinned at 1.
    cfg.filter_synthetic_from_adversary = false;
    LabeledDataset val_mixed = parts.val;
    val_mixed.x.push_back(parts.val.x[0]);
    val_mixed.y.push_back(parts.val.y[0]);
    val_mixed.s.push_back(1);
    val_mixed.synthetic.push_back(true);
    auto pair2 = train(merged, val_mixed, tabular_arch(data), a_arch, cfg);
    CHECK(pair2.history.back().adversary_acc < 1.0);
}

TEST_CASE("validation filtering changes model selection input") {
    SynthSpec spec;
    spec.n = 300;
    spec.seed = 61;
    auto data = synth_tabular(spec);
    PartitionSpec pspec;
    pspec.seed = 61;
    auto parts = partition(data, pspec);
    // Mark half the validation rows synthetic with scrambled labels; filtered
    // validation must differ from unfiltered.
    LabeledDataset val = parts.val;
    for (std::size_t i = 0; i < val.size() / 2; ++i) {
        val.synthetic[i] = true;
        val.y[i] = 1 - val.y[i];
    }
    AdvConfig cfg;
    cfg.seed = 61;
    cfg.max_epochs = 4;
    cfg.filter_synthetic_from_validation = false;
    auto unfiltered = train_classifier(parts.train, val, tabular_arch(data), cfg);
    cfg.filter_synthetic_from_validation = true;
    auto filtered = train_classifier(parts.train, val, tabular_arch(data), cfg);
    CHECK(unfiltered.history[0].val_loss != filtered.history[0].val_loss);
}
