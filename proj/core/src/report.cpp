#include "fairkit/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fairkit {

namespace {

std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), pattern, v);
    return buf;
}

std::string alpha_key(const char* prefix, double alpha) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%.2f", prefix, alpha);
    return buf;
}

}  // namespace

std::string render_report_text(const Report& report) {
    const EvalReport& e = report.eval;
    std::ostringstream os;
    os << "run " << report.meta.run_id << "  method " << report.meta.method;
    if (report.meta.extra_information) os << "*";
    os << "  seed " << report.meta.seed << "\n";
    if (!report.meta.beta_note.empty()) os << report.meta.beta_note << "\n";
    os << "----------------------------------------------\n";
    auto line = [&](const std::string& name, const std::string& value) {
        os << name;
        for (std::size_t i = name.size(); i < 18; ++i) os << ' ';
        os << value << "\n";
    };
    auto ci = [&](const std::optional<double>& w, double scale) {
        return w ? " (" + fmt("%.2f", *w * scale) + ")" : std::string{};
    };
    line("acc (%)", fmt("%.2f", e.overall_acc * 100) + ci(e.overall_acc_ci, 100));
    line("acc_gap (%)", fmt("%.2f", e.acc_gap * 100));
    line("acc_min (%)", fmt("%.2f", e.acc_min * 100) + " (" + e.acc_min_group + ")");
    for (const auto& [alpha, value] : e.cai)
        line(alpha_key("CAI", alpha) + " (%)", fmt("%.2f", value));
    if (e.has_auc) {
        line("AUC", fmt("%.4f", e.overall_auc) + ci(e.overall_auc_ci, 1));
        line("AUC_gap", fmt("%.4f", e.auc_gap));
        line("AUC_min", fmt("%.4f", e.auc_min) + " (" + e.auc_min_group + ")");
        for (const auto& [alpha, value] : e.cauci)
            line(alpha_key("CAUCI", alpha), fmt("%.4f", value));
    }
    os << "----------------------------------------------\n";
    os << "group            n      acc%     auc     tpr     fpr\n";
    for (const auto& g : e.groups) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-12s %6zu   %6.2f  %6.4f  %6.4f  %6.4f\n",
                      g.name.c_str(), g.n, g.acc * 100, g.auc, g.tpr, g.fpr);
        os << buf;
    }
    os << "ci: acc " << e.ci_method_acc << ", auc " << e.ci_method_auc << " seed "
       << e.bootstrap_seed << "\n";
    return os.str();
}

std::string render_report_csv(const Report& report) {
    const EvalReport& e = report.eval;
    std::ostringstream os;
    os << "# fairkit-report-v1\n";
    os << "# run_id=" << report.meta.run_id << "\n";
    os << "# method=" << report.meta.method << "\n";
    os << "# seed=" << report.meta.seed << "\n";
    os << "# manifest_hash=" << report.meta.manifest_hash << "\n";
    os << "# extra_information=" << (report.meta.extra_information ? 1 : 0) << "\n";
    if (!report.meta.baseline_run_id.empty())
        os << "# baseline_run_id=" << report.meta.baseline_run_id << "\n";
    if (!report.meta.beta_note.empty()) os << "# beta_note=" << report.meta.beta_note << "\n";
    os << "# ci_acc=" << e.ci_method_acc << "\n";
    os << "# ci_auc=" << e.ci_method_auc << "\n";
    os << "# bootstrap_seed=" << e.bootstrap_seed << "\n";
    os << "metric,value\n";
    auto row = [&](const std::string& k, const std::string& v) { os << k << ',' << v << '\n'; };
    row("acc", fmt("%.6f", e.overall_acc * 100));
    if (e.overall_acc_ci) row("acc_ci", fmt("%.6f", *e.overall_acc_ci * 100));
    row("acc_gap", fmt("%.6f", e.acc_gap * 100));
    row("acc_min", fmt("%.6f", e.acc_min * 100));
    row("acc_min_group", e.acc_min_group);
    for (const auto& [alpha, value] : e.cai) row(alpha_key("cai", alpha), fmt("%.6f", value));
    if (e.has_auc) {
        row("auc", fmt("%.6f", e.overall_auc));
        if (e.overall_auc_ci) row("auc_ci", fmt("%.6f", *e.overall_auc_ci));
        row("auc_gap", fmt("%.6f", e.auc_gap));
        row("auc_min", fmt("%.6f", e.auc_min));
        row("auc_min_group", e.auc_min_group);
        for (const auto& [alpha, value] : e.cauci)
            row(alpha_key("cauci", alpha), fmt("%.6f", value));
    }
    for (std::size_t i = 0; i < e.groups.size(); ++i) {
        const auto& g = e.groups[i];
        const std::string p = "group_" + std::to_string(i) + "_";
        row(p + "name", g.name);
        row(p + "n", std::to_string(g.n));
        row(p + "acc", fmt("%.6f", g.acc * 100));
        if (g.acc_ci) row(p + "acc_ci", fmt("%.6f", *g.acc_ci * 100));
        if (e.has_auc) {
            row(p + "auc", fmt("%.6f", g.auc));
            if (g.auc_ci) row(p + "auc_ci", fmt("%.6f", *g.auc_ci));
        }
        row(p + "tpr", fmt("%.6f", g.tpr));
        row(p + "fpr", fmt("%.6f", g.fpr));
    }
    return os.str();
}

Report parse_report_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("parse_report_csv: cannot open " + path);
    Report rep;
    EvalReport& e = rep.eval;
    std::string line;
    bool header_seen = false;
    auto group_of = [&](std::size_t idx) -> GroupStats& {
        while (e.groups.size() <= idx) e.groups.push_back({});
        return e.groups[idx];
    };
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            std::string key = line.substr(2, eq - 2);
            std::string value = line.substr(eq + 1);
            if (key == "run_id") rep.meta.run_id = value;
            else if (key == "method") rep.meta.method = value;
            else if (key == "seed") rep.meta.seed = std::stoull(value);
            else if (key == "manifest_hash") rep.meta.manifest_hash = std::stoull(value);
            else if (key == "extra_information") rep.meta.extra_information = (value == "1");
            else if (key == "baseline_run_id") rep.meta.baseline_run_id = value;
            else if (key == "beta_note") rep.meta.beta_note = value;
            else if (key == "ci_acc") e.ci_method_acc = value;
            else if (key == "ci_auc") e.ci_method_auc = value;
            else if (key == "bootstrap_seed") e.bootstrap_seed = std::stoull(value);
            continue;
        }
        if (!header_seen) {
            if (line != "metric,value") throw DataError("parse_report_csv: bad header in " + path);
            header_seen = true;
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw DataError("parse_report_csv: bad row: " + line);
        const std::string key = line.substr(0, comma);
        const std::string value = line.substr(comma + 1);
        auto num = [&]() { return std::stod(value); };
        if (key == "acc") e.overall_acc = num() / 100;
        else if (key == "acc_ci") e.overall_acc_ci = num() / 100;
        else if (key == "acc_gap") e.acc_gap = num() / 100;
        else if (key == "acc_min") e.acc_min = num() / 100;
        else if (key == "acc_min_group") e.acc_min_group = value;
        else if (key == "auc") { e.overall_auc = num(); e.has_auc = true; }
        else if (key == "auc_ci") e.overall_auc_ci = num();
        else if (key == "auc_gap") e.auc_gap = num();
        else if (key == "auc_min") e.auc_min = num();
        else if (key == "auc_min_group") e.auc_min_group = value;
        else if (key.rfind("cai_", 0) == 0) e.cai[std::stod(key.substr(4))] = num();
        else if (key.rfind("cauci_", 0) == 0) e.cauci[std::stod(key.substr(6))] = num();
        else if (key.rfind("group_", 0) == 0) {
            const auto second = key.find('_', 6);
            if (second == std::string::npos) continue;
            const std::size_t idx = std::stoul(key.substr(6, second - 6));
            const std::string field = key.substr(second + 1);
            GroupStats& g = group_of(idx);
            if (field == "name") g.name = value;
            else if (field == "n") g.n = std::stoul(value);
            else if (field == "acc") g.acc = num() / 100;
            else if (field == "acc_ci") g.acc_ci = num() / 100;
            else if (field == "auc") g.auc = num();
            else if (field == "auc_ci") g.auc_ci = num();
            else if (field == "tpr") g.tpr = num();
            else if (field == "fpr") g.fpr = num();
        }
    }
    if (!header_seen) throw DataError("parse_report_csv: no metric rows in " + path);
    return rep;
}

}  // namespace fairkit
