#pragma once

#include <vector>

#include "fairkit/metrics.hpp"

namespace fairkit {

struct RocCurvePoint {
    double threshold = 0;  // predict positive when score >= threshold
    double fpr = 0;
    double tpr = 0;
};

// Empirical ROC staircase for one scored population, ascending fpr; first
// point is (0,0) at threshold +inf.
std::vector<RocCurvePoint> roc_points(const std::vector<double>& scores,
                                      const std::vector<int>& labels);

}  // namespace fairkit
