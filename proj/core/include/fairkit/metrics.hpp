#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fairkit/errors.hpp"

namespace fairkit {

// One scored example: score is the positive-class probability, pred/label are
// class indices, group indexes the sensitive subpopulation.
struct PredictionRow {
    double score = 0;
    int pred = 0;
    int label = 0;
    int group = 0;
    bool synthetic = false;
};

struct PredictionDump {
    std::vector<PredictionRow> rows;
    // Optional display names indexed by group id; "g<id>" when absent.
    std::vector<std::string> group_names;

    std::vector<int> group_ids() const;
    std::string group_name(int g) const;
};

// CSV with header `score,pred,label,group,synthetic`.
PredictionDump load_dump_csv(const std::string& path);
void save_dump_csv(const PredictionDump& dump, const std::string& path);

struct GroupStats {
    int group = 0;
    std::string name;
    std::size_t n = 0;
    double acc = 0;   // fraction
    double auc = 0;   // fraction
    double tpr = 0, fpr = 0;
    std::optional<double> acc_ci;  // 95% half-widths
    std::optional<double> auc_ci;
};

// Accuracy-family values are fractions here; the report renderer converts the
// acc family to percent to mirror the paper's tables, AUC stays fractional.
// cai/cauci maps (alpha -> value) are filled against a baseline report and are
// already on the rendered scale (percent for cai, fraction for cauci).
struct EvalReport {
    std::vector<GroupStats> groups;
    double overall_acc = 0;
    double overall_auc = 0;
    std::optional<double> overall_acc_ci, overall_auc_ci;
    double acc_gap = 0, auc_gap = 0;
    double acc_min = 0, auc_min = 0;
    std::string acc_min_group, auc_min_group;
    bool has_auc = false;
    std::map<double, double> cai;
    std::map<double, double> cauci;
    // CI provenance, recorded because the paper does not state its method.
    std::string ci_method_acc = "normal-approx-95";
    std::string ci_method_auc = "stratified-bootstrap-1000-95";
    std::uint64_t bootstrap_seed = 0;
};

// Per-group and overall accuracy, gap (max-min) and minimum. Throws DataError
// when fewer than two groups are present or any group is empty.
EvalReport accuracy_metrics(const PredictionDump& dump);

// Rank-statistic AUC with midrank tie handling: equals
// P(score+ > score-) + 0.5 P(tie) exactly. Throws DataError unless both
// classes are present.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Per-group and overall AUC, gap and minimum.
EvalReport auc_metrics(const PredictionDump& dump);

struct MetricPair {
    double value = 0;  // acc or auc
    double gap = 0;
};

// Conjunctive improvement: alpha*(gap_b - gap_d) + (1-alpha)*(value_d - value_b).
// Caller keeps units consistent (percent or fraction on both sides).
double cai(const MetricPair& baseline, const MetricPair& debiased, double alpha);
double cauci(const MetricPair& baseline, const MetricPair& debiased, double alpha);

enum class MetricKind { Accuracy, Auc };

// 95% half-width. Accuracy: normal approximation 1.96*sqrt(p(1-p)/n).
// AUC: seeded stratified percentile bootstrap, 1000 resamples.
// Returns nullopt when n < 10.
std::optional<double> confidence_interval(MetricKind kind, const std::vector<PredictionRow>& slice,
                                          std::uint64_t seed = 17);

enum class FairnessCriterion { DemographicParity, EqualizedOdds, EqualityOfOpportunity };

struct FairnessCell {
    int pred = 0;
    int group = 0;
    int condition_label = -1;  // -1 = unconditioned (parity)
    double group_rate = 0;
    double overall_rate = 0;
    double deviation = 0;
};

struct FairnessGapReport {
    FairnessCriterion criterion = FairnessCriterion::DemographicParity;
    double max_deviation = 0;
    std::vector<FairnessCell> cells;
    // (group, condition_label) combinations with no examples: flagged and
    // excluded from the max rather than silently treated as zero.
    std::vector<FairnessCell> empty_cells;
};

// Empirical checker for Eqs.-style fairness definitions: max over conditions
// of |P(pred|group, cond) - P(pred|cond)|.
FairnessGapReport fairness_check(const PredictionDump& dump, FairnessCriterion criterion,
                                 std::optional<int> opportunity_label = std::nullopt);

struct EvalOptions {
    bool with_auc = true;
    bool with_ci = true;
    std::uint64_t bootstrap_seed = 17;
    std::vector<std::string> group_names;
};

// Full report: accuracy + AUC families plus confidence intervals.
EvalReport evaluate(const PredictionDump& dump, const EvalOptions& opts = {});

}  // namespace fairkit
