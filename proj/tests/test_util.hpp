#pragma once

#include <functional>
#include <vector>

#include "fairkit/net.hpp"

namespace fairkit::testutil {

inline double central_diff(const std::function<double()>& f, double& param, double h = 1e-4) {
    const double orig = param;
    param = orig + h;
    const double up = f();
    param = orig - h;
    const double down = f();
    param = orig;
    return (up - down) / (2 * h);
}

inline double rel_err(double a, double b) {
    const double scale = std::max({1.0, std::abs(a), std::abs(b)});
    return std::abs(a - b) / scale;
}

// Runs fn over every parameter of the net (weights then biases per layer).
inline void for_each_param(DenseNet& net,
                           const std::function<void(std::size_t layer, double& value,
                                                    bool is_weight, std::size_t index)>& fn) {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        auto& layer = net.layers[l];
        for (std::size_t k = 0; k < layer.weights.values.size(); ++k)
            fn(l, layer.weights.values[k], true, k);
        for (std::size_t k = 0; k < layer.biases.size(); ++k)
            fn(l, layer.biases[k], false, k);
    }
}

}  // namespace fairkit::testutil
