#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <vector>

#include "fairkit/errors.hpp"

namespace fairkit {

// Dense row-major matrix of doubles. All math in this library is f64.
struct Tensor2 {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    Tensor2() = default;
    Tensor2(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), values(r * c, fill) {}

    static Tensor2 from_rows(std::initializer_list<std::initializer_list<double>> data) {
        Tensor2 t;
        t.rows = data.size();
        t.cols = data.size() ? data.begin()->size() : 0;
        t.values.reserve(t.rows * t.cols);
        for (const auto& row : data) {
            if (row.size() != t.cols) throw ShapeError("from_rows: ragged initializer");
            t.values.insert(t.values.end(), row.begin(), row.end());
        }
        return t;
    }

    double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

    double* row(std::size_t r) { return values.data() + r * cols; }
    const double* row(std::size_t r) const { return values.data() + r * cols; }

    bool same_shape(const Tensor2& o) const { return rows == o.rows && cols == o.cols; }

    bool all_finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

}  // namespace fairkit
