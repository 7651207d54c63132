#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "fairkit/checkpoint.hpp"
#include "fairkit/net.hpp"
#include "fairkit/optimizer.hpp"
#include "fairkit/rng.hpp"
#include "test_util.hpp"

using namespace fairkit;

TEST_CASE("forward: identity linear layer passes input through") {
    NetBuilder b(2);
    b.linear(2);
    auto rng = make_rng(1, stream::kPredictorInit);
    DenseNet net = b.build(rng);
    net.layers[0].weights = Tensor2::from_rows({{1, 0}, {0, 1}});
    net.layers[0].biases = {0, 0};
    auto res = forward(net, Tensor2::from_rows({{1, 2}}));
    CHECK(res.output.at(0, 0) == doctest::Approx(1.0));
    CHECK(res.output.at(0, 1) == doctest::Approx(2.0));
}

TEST_CASE("forward: softmax of equal logits splits evenly") {
    NetBuilder b(2);
    b.softmax();
    auto rng = make_rng(1, stream::kPredictorInit);
    DenseNet net = b.build(rng);
    auto res = forward(net, Tensor2::from_rows({{0, 0}}));
    CHECK(res.output.at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(res.output.at(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("forward: 2-layer net matches a straight-line re-implementation") {
    auto rng = make_rng(7, stream::kPredictorInit);
    NetBuilder b(2);
    b.linear(3).leaky_relu().linear(2).softmax();
    DenseNet net = b.build(rng);
    const Tensor2 x = Tensor2::from_rows({{1, 0}});
    auto res = forward(net, x);

    // Independent scalar evaluation of the same arithmetic.
    const auto& l0 = net.layers[0];
    double h[3];
    for (int j = 0; j < 3; ++j) {
        h[j] = l0.biases[j] + 1.0 * l0.weights.at(0, j) + 0.0 * l0.weights.at(1, j);
        if (h[j] < 0) h[j] *= 0.01;
    }
    const auto& l2 = net.layers[2];
    double z[2];
    for (int j = 0; j < 2; ++j) {
        z[j] = l2.biases[j];
        for (int i = 0; i < 3; ++i) z[j] += h[i] * l2.weights.at(i, j);
    }
    const double m = std::max(z[0], z[1]);
    const double e0 = std::exp(z[0] - m), e1 = std::exp(z[1] - m);
    CHECK(res.output.at(0, 0) == doctest::Approx(e0 / (e0 + e1)).epsilon(1e-14));
    CHECK(res.output.at(0, 1) == doctest::Approx(e1 / (e0 + e1)).epsilon(1e-14));
}

TEST_CASE("forward: dimension mismatch raises a shape error") {
    NetBuilder b(3);
    b.linear(2).softmax();
    auto rng = make_rng(2, stream::kPredictorInit);
    DenseNet net = b.build(rng);
    CHECK_THROWS_AS(forward(net, Tensor2::from_rows({{1, 2}})), ShapeError);
    CHECK_THROWS_AS(forward(net, Tensor2::from_rows({{1, 2, 3}}), 5), ShapeError);
}

TEST_CASE("cross_entropy basics") {
    CHECK(cross_entropy(Tensor2::from_rows({{1, 0}}), {0}) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(cross_entropy(Tensor2::from_rows({{0.5, 0.5}}), {1}) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK_THROWS_AS(cross_entropy(Tensor2(0, 2), {}), DomainError);
    // Rows must sum to one.
    CHECK_THROWS_AS(cross_entropy(Tensor2::from_rows({{0.7, 0.7}}), {0}), DomainError);
}

TEST_CASE("cross_entropy matches a scalar loop on a random batch") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unit(0.05, 1.0);
    Tensor2 probs(5, 3);
    std::vector<int> labels;
    for (std::size_t r = 0; r < 5; ++r) {
        double sum = 0;
        for (std::size_t c = 0; c < 3; ++c) {
            probs.at(r, c) = unit(rng);
            sum += probs.at(r, c);
        }
        for (std::size_t c = 0; c < 3; ++c) probs.at(r, c) /= sum;
        labels.push_back(static_cast<int>(rng() % 3));
    }
    double expected = 0;
    for (std::size_t r = 0; r < 5; ++r) expected += -std::log(probs.at(r, labels[r]));
    expected /= 5;
    CHECK(cross_entropy(probs, labels) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("backward: zero output grad gives zero parameter grads") {
    auto rng = make_rng(11, stream::kPredictorInit);
    NetBuilder b(3);
    b.linear(4).leaky_relu().linear(2).softmax();
    DenseNet net = b.build(rng);
    const Tensor2 x = Tensor2::from_rows({{0.3, -0.2, 1.0}, {0.1, 0.9, -0.4}});
    auto fwd = forward(net, x);
    auto grads = backward(net, fwd.cache, Tensor2(2, 2));
    testutil::for_each_param(net, [&](std::size_t l, double&, bool w, std::size_t k) {
        const double g = w ? grads.layers[l].weights.values[k] : grads.layers[l].biases[k];
        CHECK(g == 0.0);
    });
}

TEST_CASE("backward: softmax-cross-entropy gradient at equal logits") {
    NetBuilder b(2);
    b.softmax();
    auto rng = make_rng(1, stream::kPredictorInit);
    DenseNet net = b.build(rng);
    const Tensor2 x = Tensor2::from_rows({{0, 0}});
    auto fwd = forward(net, x);
    auto grads = backward(net, fwd.cache, cross_entropy_grad(fwd.output, {0}));
    CHECK(grads.input.at(0, 0) == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(grads.input.at(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("backward: stale cache is rejected") {
    auto rng = make_rng(4, stream::kPredictorInit);
    NetBuilder b(2);
    b.linear(2).softmax();
    DenseNet net = b.build(rng);
    const Tensor2 x = Tensor2::from_rows({{1, 2}});
    auto fwd = forward(net, x);
    Gradients g = backward(net, fwd.cache, cross_entropy_grad(fwd.output, {0}));
    OptimizerState opt = OptimizerState::sgd_nesterov(0.1, 0.0);
    apply_step(net, g, opt);
    CHECK_THROWS_AS(backward(net, fwd.cache, cross_entropy_grad(fwd.output, {0})), ContractError);
}

namespace {

// Cross-entropy loss of a net on a fixed batch, used as the FD target.
double net_loss(DenseNet& net, const Tensor2& x, const std::vector<int>& labels) {
    auto fwd = forward(net, x);
    return cross_entropy(fwd.output, labels);
}

void check_grads_fd(DenseNet& net, const Tensor2& x, const std::vector<int>& labels) {
    auto fwd = forward(net, x);
    auto grads = backward(net, fwd.cache, cross_entropy_grad(fwd.output, labels));
    double max_err = 0;
    testutil::for_each_param(net, [&](std::size_t l, double& value, bool w, std::size_t k) {
        const double fd =
            testutil::central_diff([&]() { return net_loss(net, x, labels); }, value);
        const double an = w ? grads.layers[l].weights.values[k] : grads.layers[l].biases[k];
        max_err = std::max(max_err, testutil::rel_err(fd, an));
    });
    CHECK(max_err < 1e-4);
}

}  // namespace

TEST_CASE("backward: finite-difference check on random small nets") {
    std::mt19937_64 data_rng(123);
    std::normal_distribution<double> normal(0.0, 1.0);

    for (std::uint64_t seed : {21u, 22u, 23u}) {
        auto rng = make_rng(seed, stream::kPredictorInit);
        NetBuilder b(5);
        b.linear(16).leaky_relu().linear(3).softmax();
        DenseNet net = b.build(rng);
        Tensor2 x(4, 5);
        for (double& v : x.values) v = normal(data_rng);
        std::vector<int> labels = {0, 2, 1, 2};
        check_grads_fd(net, x, labels);
    }
}

TEST_CASE("backward: finite-difference check with an embedding front-end") {
    auto rng = make_rng(31, stream::kPredictorInit);
    NetBuilder b(3);
    b.embedding({3, 4, 0}, 4).linear(8).leaky_relu().linear(2).softmax();
    DenseNet net = b.build(rng);
    Tensor2 x = Tensor2::from_rows({{0, 1, 0.4}, {2, 3, -1.2}, {1, 0, 0.7}});
    std::vector<int> labels = {0, 1, 1};
    check_grads_fd(net, x, labels);
}

TEST_CASE("backward: tap-layer gradient injection equals summed objectives") {
    // d/dw [ CE(out) + <tap, G> ] must equal backward with tap_grad = G.
    auto rng = make_rng(41, stream::kPredictorInit);
    NetBuilder b(3);
    b.linear(4).leaky_relu().linear(2).softmax();
    DenseNet net = b.build(rng);
    Tensor2 x = Tensor2::from_rows({{0.5, -1.0, 0.25}, {1.5, 0.2, -0.3}});
    std::vector<int> labels = {1, 0};
    const int tap = 1;  // leaky_relu output
    Tensor2 tap_grad(2, 4);
    std::mt19937_64 grng(7);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : tap_grad.values) v = normal(grng);

    auto fwd = forward(net, x, tap);
    auto grads = backward(net, fwd.cache, cross_entropy_grad(fwd.output, labels), tap, &tap_grad);

    auto objective = [&]() {
        auto f = forward(net, x, tap);
        double obj = cross_entropy(f.output, labels);
        for (std::size_t k = 0; k < tap_grad.values.size(); ++k)
            obj += tap_grad.values[k] * f.tap->values[k];
        return obj;
    };
    double max_err = 0;
    testutil::for_each_param(net, [&](std::size_t l, double& value, bool w, std::size_t k) {
        const double fd = testutil::central_diff(objective, value);
        const double an = w ? grads.layers[l].weights.values[k] : grads.layers[l].biases[k];
        max_err = std::max(max_err, testutil::rel_err(fd, an));
    });
    CHECK(max_err < 1e-4);
}

TEST_CASE("apply_step: plain sgd moves against the gradient") {
    NetBuilder b(1);
    b.linear(1);
    auto rng = make_rng(1, stream::kPredictorInit);
    DenseNet net = b.build(rng);
    net.layers[0].weights.at(0, 0) = 0.0;
    net.layers[0].biases[0] = 0.0;
    Gradients g;
    g.layers.resize(1);
    g.layers[0].weights = Tensor2(1, 1);
    g.layers[0].weights.at(0, 0) = 1.0;
    g.layers[0].biases = {0.0};
    OptimizerState opt = OptimizerState::sgd_nesterov(0.1, 0.0);
    apply_step(net, g, opt);
    CHECK(net.layers[0].weights.at(0, 0) == doctest::Approx(-0.1).epsilon(1e-15));
}

TEST_CASE("apply_step: zero grads leave parameters unchanged under sgd") {
    auto rng = make_rng(6, stream::kPredictorInit);
    NetBuilder b(2);
    b.linear(3);
    DenseNet net = b.build(rng);
    const auto before = net.layers[0].weights.values;
    Gradients g;
    g.layers.resize(1);
    g.layers[0].weights = Tensor2(2, 3);
    g.layers[0].biases.assign(3, 0.0);
    OptimizerState opt = OptimizerState::sgd_nesterov(0.5, 0.0);
    apply_step(net, g, opt);
    CHECK(net.layers[0].weights.values == before);
}

TEST_CASE("apply_step: adam first step matches the scalar re-derivation") {
    NetBuilder b(1);
    b.linear(1);
    auto rng = make_rng(1, stream::kPredictorInit);
    DenseNet net = b.build(rng);
    net.layers[0].weights.at(0, 0) = 0.7;
    net.layers[0].biases[0] = 0.0;
    const double g0 = 0.3;
    Gradients g;
    g.layers.resize(1);
    g.layers[0].weights = Tensor2(1, 1);
    g.layers[0].weights.at(0, 0) = g0;
    g.layers[0].biases = {0.0};
    OptimizerState opt = OptimizerState::adam(0.01);
    apply_step(net, g, opt);
    // Step 1: mhat = g, vhat = g^2, update = lr * g / (|g| + eps).
    const double expected = 0.7 - 0.01 * g0 / (std::sqrt(g0 * g0) + 1e-8);
    CHECK(net.layers[0].weights.at(0, 0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("apply_step: NaN gradients abort") {
    NetBuilder b(1);
    b.linear(1);
    auto rng = make_rng(1, stream::kPredictorInit);
    DenseNet net = b.build(rng);
    Gradients g;
    g.layers.resize(1);
    g.layers[0].weights = Tensor2(1, 1);
    g.layers[0].weights.at(0, 0) = std::nan("");
    g.layers[0].biases = {0.0};
    OptimizerState opt = OptimizerState::adam(0.01);
    CHECK_THROWS_AS(apply_step(net, g, opt), NumericError);
}

TEST_CASE("softmax rows sum to one and stay in (0,1)") {
    auto rng = make_rng(9, stream::kPredictorInit);
    NetBuilder b(4);
    b.linear(6).leaky_relu().linear(4).softmax();
    DenseNet net = b.build(rng);
    std::mt19937_64 xr(5);
    std::normal_distribution<double> normal(0.0, 3.0);
    Tensor2 x(32, 4);
    for (double& v : x.values) v = normal(xr);
    auto res = forward(net, x);
    for (std::size_t r = 0; r < res.output.rows; ++r) {
        double sum = 0;
        for (std::size_t c = 0; c < res.output.cols; ++c) {
            const double p = res.output.at(r, c);
            CHECK(p > 0.0);
            CHECK(p < 1.0);
            sum += p;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("gaussian_noise: identity in eval mode, calibrated variance in train mode") {
    const double sigma = 0.4;
    NetBuilder b(1);
    b.gaussian_noise(sigma);
    auto rng = make_rng(2, stream::kPredictorInit);
    DenseNet net = b.build(rng);

    Tensor2 x(10000, 1, 1.5);
    auto eval_res = forward(net, x, kNoTap, RunMode::Eval);
    CHECK(eval_res.output.values == x.values);

    auto noise_rng = make_rng(3, stream::kNoise);
    auto train_res = forward(net, x, kNoTap, RunMode::Train, &noise_rng);
    double mean = 0;
    for (std::size_t i = 0; i < x.values.size(); ++i)
        mean += train_res.output.values[i] - x.values[i];
    mean /= static_cast<double>(x.values.size());
    double var = 0;
    for (std::size_t i = 0; i < x.values.size(); ++i) {
        const double d = train_res.output.values[i] - x.values[i] - mean;
        var += d * d;
    }
    var /= static_cast<double>(x.values.size() - 1);
    CHECK(var > sigma * sigma * 0.8);
    CHECK(var < sigma * sigma * 1.2);
}

TEST_CASE("embedding: unseen category routes to the unknown row") {
    auto rng = make_rng(13, stream::kPredictorInit);
    NetBuilder b(1);
    b.embedding({3}, 2);
    DenseNet net = b.build(rng);
    auto known = forward(net, Tensor2::from_rows({{1}}));
    auto unseen = forward(net, Tensor2::from_rows({{7}}));
    auto negative = forward(net, Tensor2::from_rows({{-2}}));
    // Unknown bucket is table row 3 (categories=3, rows 0..2 are real codes).
    CHECK(unseen.output.at(0, 0) == net.layers[0].weights.at(3, 0));
    CHECK(unseen.output.at(0, 1) == net.layers[0].weights.at(3, 1));
    CHECK(negative.output.values == unseen.output.values);
    CHECK(known.output.at(0, 0) == net.layers[0].weights.at(1, 0));
}

TEST_CASE("deterministic rebuild: same seed gives bit-identical nets") {
    auto make = [](std::uint64_t seed) {
        auto rng = make_rng(seed, stream::kPredictorInit);
        NetBuilder b(4);
        b.linear(8).leaky_relu().linear(2).softmax();
        return b.build(rng);
    };
    DenseNet a = make(99), c = make(99);
    for (std::size_t l = 0; l < a.layers.size(); ++l)
        CHECK(a.layers[l].weights.values == c.layers[l].weights.values);
}

TEST_CASE("checkpoint: save/load round-trips bit-exactly") {
    auto rng = make_rng(17, stream::kPredictorInit);
    NetBuilder b(3);
    b.embedding({2, 0, 5}, 3).linear(7).leaky_relu(0.02).linear(2).gaussian_noise(0.3).softmax();
    DenseNet net = b.build(rng);
    const std::string path =
        (std::filesystem::temp_directory_path() / "fairkit_ckpt_test.fknt").string();
    save_net(net, path);
    DenseNet back = load_net(path);
    REQUIRE(back.layers.size() == net.layers.size());
    CHECK(back.input_width == net.input_width);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        CHECK(back.layers[l].kind == net.layers[l].kind);
        CHECK(back.layers[l].weights.values == net.layers[l].weights.values);
        CHECK(back.layers[l].biases == net.layers[l].biases);
        CHECK(back.layers[l].categories == net.layers[l].categories);
        CHECK(back.layers[l].slope == net.layers[l].slope);
        CHECK(back.layers[l].sigma == net.layers[l].sigma);
    }
    std::filesystem::remove(path);
}

TEST_CASE("plateau scheduler reduces the rate after stale epochs") {
    OptimizerState opt = OptimizerState::adam(0.01);
    opt.plateau = PlateauScheduler{0.1, 3};
    plateau_update(opt, 1.0);
    plateau_update(opt, 0.9);
    CHECK(opt.learning_rate == doctest::Approx(0.01));
    plateau_update(opt, 0.95);
    plateau_update(opt, 0.95);
    plateau_update(opt, 0.95);
    CHECK(opt.learning_rate == doctest::Approx(0.001));
}

TEST_CASE("parameter_count sums weights and biases") {
    auto rng = make_rng(1, stream::kPredictorInit);
    NetBuilder b(3);
    b.linear(4).leaky_relu().linear(2).softmax();
    DenseNet net = b.build(rng);
    CHECK(net.parameter_count() == (3 * 4 + 4) + (4 * 2 + 2));
}
