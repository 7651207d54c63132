#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fairkit/metrics.hpp"

namespace fairkit {

// Decision rule for one group: use threshold t_lo with probability p, else
// t_hi (predict positive when score >= threshold). Deterministic rules have
// t_lo == t_hi.
struct GroupThreshold {
    int group = 0;
    double t_lo = 0.5, t_hi = 0.5;
    double p = 1.0;
    double tpr = 0, fpr = 0;  // achieved on the fit split
};

struct GroupThresholds {
    std::vector<GroupThreshold> per_group;
    double target_fpr = 0, target_tpr = 0;
    // Max over group pairs of |dTPR| + |dFPR| after realization.
    double residual = 0;
};

// Tunes per-group decision thresholds on a validation dump so TPR/FPR match
// across subpopulations: picks the accuracy-maximizing operating point inside
// the intersection of the groups' randomized ROC hulls, then realizes it per
// group with a threshold or a two-threshold mixture. Ties break toward higher
// TPR, then lower FPR.
GroupThresholds fit_group_thresholds(const PredictionDump& validation);

// Relabels the dump with the fitted rules; scores are left untouched so
// AUC-family metrics are invariant. Mixtures resolve by a seeded draw.
PredictionDump apply_group_thresholds(const GroupThresholds& thresholds,
                                      const PredictionDump& dump, std::uint64_t seed = 0);

// CSV `group,t_lo,t_hi,p`.
void save_thresholds_csv(const GroupThresholds& thresholds, const std::string& path);
GroupThresholds load_thresholds_csv(const std::string& path);

}  // namespace fairkit
