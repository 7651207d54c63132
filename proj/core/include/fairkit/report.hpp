#pragma once

#include <cstdint>
#include <string>

#include "fairkit/metrics.hpp"

namespace fairkit {

struct ReportMeta {
    std::string run_id;
    std::string method;
    std::uint64_t seed = 0;
    std::uint64_t manifest_hash = 0;
    bool extra_information = false;  // the asterisk convention for Best Thre.
    std::string baseline_run_id;
    std::string beta_note;  // e.g. "beta=1.0 (best overall accuracy of {0.5,1})"
};

struct Report {
    ReportMeta meta;
    EvalReport eval;
};

// Paper-style aligned table: metric rows acc, acc_gap, acc_min, CAI_a...,
// AUC, AUC_gap, AUC_min, CAUCI_a...; accuracy family rendered in percent.
std::string render_report_text(const Report& report);

// Machine-readable mirror: '#' metadata lines, then `metric,value` rows.
std::string render_report_csv(const Report& report);

Report parse_report_csv(const std::string& path);

}  // namespace fairkit
