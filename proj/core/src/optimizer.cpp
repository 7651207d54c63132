#include "fairkit/optimizer.hpp"

#include <cmath>

namespace fairkit {

OptimizerState OptimizerState::sgd_nesterov(double lr, double momentum) {
    OptimizerState s;
    s.kind = OptKind::SgdNesterov;
    s.learning_rate = lr;
    s.momentum = momentum;
    return s;
}

OptimizerState OptimizerState::adam(double lr) {
    OptimizerState s;
    s.kind = OptKind::Adam;
    s.learning_rate = lr;
    return s;
}

OptimizerState OptimizerState::adamw(double lr, double weight_decay) {
    OptimizerState s;
    s.kind = OptKind::AdamW;
    s.learning_rate = lr;
    s.weight_decay = weight_decay;
    return s;
}

namespace {

void ensure_buffers(std::vector<LayerGrads>& buf, const DenseNet& net) {
    if (!buf.empty()) return;
    buf.resize(net.layers.size());
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        buf[i].weights = Tensor2(net.layers[i].weights.rows, net.layers[i].weights.cols);
        buf[i].biases.assign(net.layers[i].biases.size(), 0.0);
    }
}

}  // namespace

void apply_step(DenseNet& net, const Gradients& grads, OptimizerState& opt) {
    if (opt.learning_rate <= 0) throw ConfigError("apply_step: learning_rate must be > 0");
    if (grads.layers.size() != net.layers.size())
        throw ShapeError("apply_step: gradient/net layer count mismatch");
    if (!grads.all_finite()) throw NumericError("apply_step: NaN or inf in gradients");

    ensure_buffers(opt.moment1, net);
    if (opt.kind != OptKind::SgdNesterov) ensure_buffers(opt.moment2, net);
    opt.step_count += 1;

    const double lr = opt.learning_rate;
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step_count));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step_count));

    auto update = [&](double& w, double g, double& m1, double& m2, bool decay) {
        switch (opt.kind) {
            case OptKind::SgdNesterov: {
                m1 = opt.momentum * m1 + g;
                const double d = (opt.momentum != 0.0) ? g + opt.momentum * m1 : g;
                w -= lr * d;
                break;
            }
            case OptKind::Adam:
            case OptKind::AdamW: {
                m1 = opt.beta1 * m1 + (1 - opt.beta1) * g;
                m2 = opt.beta2 * m2 + (1 - opt.beta2) * g * g;
                const double mhat = m1 / bc1;
                const double vhat = m2 / bc2;
                double step = mhat / (std::sqrt(vhat) + opt.eps);
                if (opt.kind == OptKind::AdamW && decay) step += opt.weight_decay * w;
                w -= lr * step;
                break;
            }
        }
    };

    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        Layer& l = net.layers[i];
        const LayerGrads& g = grads.layers[i];
        if (!l.weights.values.empty()) {
            if (!g.weights.same_shape(l.weights))
                throw ShapeError("apply_step: weight grad shape mismatch");
            double* m2base = opt.moment2.empty() ? nullptr : opt.moment2[i].weights.values.data();
            for (std::size_t k = 0; k < l.weights.values.size(); ++k) {
                double dummy = 0;
                update(l.weights.values[k], g.weights.values[k], opt.moment1[i].weights.values[k],
                       m2base ? m2base[k] : dummy, /*decay=*/true);
            }
        }
        if (!l.biases.empty()) {
            if (g.biases.size() != l.biases.size())
                throw ShapeError("apply_step: bias grad shape mismatch");
            for (std::size_t k = 0; k < l.biases.size(); ++k) {
                double dummy = 0;
                update(l.biases[k], g.biases[k], opt.moment1[i].biases[k],
                       opt.moment2.empty() ? dummy : opt.moment2[i].biases[k],
                       /*decay=*/false);
            }
        }
    }
    net.revision += 1;
}

void plateau_update(OptimizerState& opt, double epoch_loss) {
    if (!opt.plateau) return;
    PlateauScheduler& s = *opt.plateau;
    if (epoch_loss < s.best - 1e-12) {
        s.best = epoch_loss;
        s.stale_epochs = 0;
        return;
    }
    if (++s.stale_epochs >= s.patience) {
        opt.learning_rate *= s.factor;
        s.stale_epochs = 0;
    }
}

}  // namespace fairkit
