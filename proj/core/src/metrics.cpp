#include "fairkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "fairkit/rng.hpp"

namespace fairkit {

std::vector<int> PredictionDump::group_ids() const {
    std::set<int> ids;
    for (const auto& r : rows) ids.insert(r.group);
    return {ids.begin(), ids.end()};
}

std::string PredictionDump::group_name(int g) const {
    if (g >= 0 && static_cast<std::size_t>(g) < group_names.size() && !group_names[g].empty())
        return group_names[g];
    return "g" + std::to_string(g);
}

PredictionDump load_dump_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("dump: cannot open " + path);
    std::string line;
    if (!std::getline(is, line)) throw DataError("dump: empty file " + path);
    if (line.size() && line.back() == '\r') line.pop_back();
    if (line != "score,pred,label,group,synthetic")
        throw DataError("dump: unexpected header in " + path + ": " + line);
    PredictionDump dump;
    while (std::getline(is, line)) {
        if (line.size() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        PredictionRow row;
        try {
            std::getline(ss, cell, ',');
            row.score = std::stod(cell);
            std::getline(ss, cell, ',');
            row.pred = std::stoi(cell);
            std::getline(ss, cell, ',');
            row.label = std::stoi(cell);
            std::getline(ss, cell, ',');
            row.group = std::stoi(cell);
            std::getline(ss, cell, ',');
            row.synthetic = (std::stoi(cell) != 0);
        } catch (const std::exception&) {
            throw DataError("dump: malformed row in " + path + ": " + line);
        }
        if (!std::isfinite(row.score)) throw DataError("dump: non-finite score in " + path);
        dump.rows.push_back(row);
    }
    return dump;
}

void save_dump_csv(const PredictionDump& dump, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw DataError("dump: cannot open for write " + path);
    os << "score,pred,label,group,synthetic\n";
    char buf[128];
    for (const auto& r : dump.rows) {
        std::snprintf(buf, sizeof(buf), "%.17g,%d,%d,%d,%d\n", r.score, r.pred, r.label, r.group,
                      r.synthetic ? 1 : 0);
        os << buf;
    }
}

namespace {

std::map<int, std::vector<const PredictionRow*>> by_group(const PredictionDump& dump) {
    std::map<int, std::vector<const PredictionRow*>> g;
    for (const auto& r : dump.rows) g[r.group].push_back(&r);
    return g;
}

double accuracy_of(const std::vector<const PredictionRow*>& rows) {
    std::size_t correct = 0;
    for (auto* r : rows) correct += (r->pred == r->label);
    return static_cast<double>(correct) / static_cast<double>(rows.size());
}

void rates_of(const std::vector<const PredictionRow*>& rows, double& tpr, double& fpr) {
    std::size_t tp = 0, fn = 0, fp = 0, tn = 0;
    for (auto* r : rows) {
        if (r->label == 1)
            (r->pred == 1 ? tp : fn) += 1;
        else
            (r->pred == 1 ? fp : tn) += 1;
    }
    tpr = (tp + fn) ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    fpr = (fp + tn) ? static_cast<double>(fp) / static_cast<double>(fp + tn) : 0.0;
}

void finalize_minmax(EvalReport& rep, bool for_auc) {
    double mx = -1e300, mn = 1e300;
    std::string mn_name;
    for (const auto& g : rep.groups) {
        const double v = for_auc ? g.auc : g.acc;
        mx = std::max(mx, v);
        if (v < mn) {
            mn = v;
            mn_name = g.name;
        }
    }
    if (for_auc) {
        rep.auc_gap = mx - mn;
        rep.auc_min = mn;
        rep.auc_min_group = mn_name;
    } else {
        rep.acc_gap = mx - mn;
        rep.acc_min = mn;
        rep.acc_min_group = mn_name;
    }
}

}  // namespace

EvalReport accuracy_metrics(const PredictionDump& dump) {
    if (dump.rows.empty()) throw DataError("accuracy_metrics: empty dump");
    auto groups = by_group(dump);
    if (groups.size() < 2)
        throw DataError("accuracy_metrics: gap metrics need at least two groups, found " +
                        std::to_string(groups.size()));
    EvalReport rep;
    std::size_t correct = 0;
    for (auto& [gid, rows] : groups) {
        GroupStats gs;
        gs.group = gid;
        gs.name = dump.group_name(gid);
        gs.n = rows.size();
        gs.acc = accuracy_of(rows);
        rates_of(rows, gs.tpr, gs.fpr);
        for (auto* r : rows) correct += (r->pred == r->label);
        rep.groups.push_back(std::move(gs));
    }
    rep.overall_acc = static_cast<double>(correct) / static_cast<double>(dump.rows.size());
    finalize_minmax(rep, /*for_auc=*/false);
    return rep;
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw ShapeError("auc: scores/labels size mismatch");
    const std::size_t n = scores.size();
    std::size_t npos = 0;
    for (int y : labels) npos += (y == 1);
    const std::size_t nneg = n - npos;
    if (npos == 0 || nneg == 0)
        throw DataError("auc: population must contain both classes");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Midranks (1-based); ties share the average rank of their run.
    double pos_rank_sum = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k)
            if (labels[order[k]] == 1) pos_rank_sum += midrank;
        i = j + 1;
    }
    const double u = pos_rank_sum - 0.5 * static_cast<double>(npos) * static_cast<double>(npos + 1);
    return u / (static_cast<double>(npos) * static_cast<double>(nneg));
}

EvalReport auc_metrics(const PredictionDump& dump) {
    if (dump.rows.empty()) throw DataError("auc_metrics: empty dump");
    auto groups = by_group(dump);
    if (groups.size() < 2) throw DataError("auc_metrics: gap metrics need at least two groups");
    EvalReport rep;
    rep.has_auc = true;
    std::vector<double> all_scores;
    std::vector<int> all_labels;
    for (auto& [gid, rows] : groups) {
        GroupStats gs;
        gs.group = gid;
        gs.name = dump.group_name(gid);
        gs.n = rows.size();
        std::vector<double> s;
        std::vector<int> y;
        s.reserve(rows.size());
        y.reserve(rows.size());
        for (auto* r : rows) {
            s.push_back(r->score);
            y.push_back(r->label);
            all_scores.push_back(r->score);
            all_labels.push_back(r->label);
        }
        gs.auc = auc(s, y);
        rep.groups.push_back(std::move(gs));
    }
    rep.overall_auc = auc(all_scores, all_labels);
    finalize_minmax(rep, /*for_auc=*/true);
    return rep;
}

double cai(const MetricPair& baseline, const MetricPair& debiased, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("cai: alpha must lie in [0,1]");
    return alpha * (baseline.gap - debiased.gap) + (1.0 - alpha) * (debiased.value - baseline.value);
}

double cauci(const MetricPair& baseline, const MetricPair& debiased, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("cauci: alpha must lie in [0,1]");
    return alpha * (baseline.gap - debiased.gap) + (1.0 - alpha) * (debiased.value - baseline.value);
}

std::optional<double> confidence_interval(MetricKind kind, const std::vector<PredictionRow>& slice,
                                          std::uint64_t seed) {
    const std::size_t n = slice.size();
    if (n < 10) return std::nullopt;
    if (kind == MetricKind::Accuracy) {
        std::size_t correct = 0;
        for (const auto& r : slice) correct += (r.pred == r.label);
        const double p = static_cast<double>(correct) / static_cast<double>(n);
        return 1.96 * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
    }
    // Stratified percentile bootstrap keeps both classes in every resample.
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < n; ++i) (slice[i].label == 1 ? pos : neg).push_back(i);
    if (pos.empty() || neg.empty()) throw DataError("confidence_interval: single-class slice");
    auto rng = make_rng(seed, stream::kBootstrap);
    std::uniform_int_distribution<std::size_t> dpos(0, pos.size() - 1), dneg(0, neg.size() - 1);
    constexpr int kResamples = 1000;
    std::vector<double> stats;
    stats.reserve(kResamples);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (int b = 0; b < kResamples; ++b) {
        std::size_t k = 0;
        for (std::size_t i = 0; i < pos.size(); ++i, ++k) {
            const auto& r = slice[pos[dpos(rng)]];
            s[k] = r.score;
            y[k] = r.label;
        }
        for (std::size_t i = 0; i < neg.size(); ++i, ++k) {
            const auto& r = slice[neg[dneg(rng)]];
            s[k] = r.score;
            y[k] = r.label;
        }
        stats.push_back(auc(s, y));
    }
    std::sort(stats.begin(), stats.end());
    const auto q = [&](double p) {
        const double idx = p * static_cast<double>(stats.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(idx);
        const std::size_t hi = std::min(lo + 1, stats.size() - 1);
        const double frac = idx - static_cast<double>(lo);
        return stats[lo] * (1 - frac) + stats[hi] * frac;
    };
    return 0.5 * (q(0.975) - q(0.025));
}

FairnessGapReport fairness_check(const PredictionDump& dump, FairnessCriterion criterion,
                                 std::optional<int> opportunity_label) {
    if (dump.rows.empty()) throw DataError("fairness_check: empty dump");
    if (criterion == FairnessCriterion::EqualityOfOpportunity && !opportunity_label)
        throw DomainError("fairness_check: opportunity criterion needs a label");

    std::set<int> preds, labels, groups;
    for (const auto& r : dump.rows) {
        preds.insert(r.pred);
        labels.insert(r.label);
        groups.insert(r.group);
    }

    std::vector<int> conditions;  // -1 = no condition on Y
    switch (criterion) {
        case FairnessCriterion::DemographicParity: conditions = {-1}; break;
        case FairnessCriterion::EqualizedOdds: conditions.assign(labels.begin(), labels.end()); break;
        case FairnessCriterion::EqualityOfOpportunity: conditions = {*opportunity_label}; break;
    }

    FairnessGapReport rep;
    rep.criterion = criterion;
    for (int cond : conditions) {
        std::vector<const PredictionRow*> cond_rows;
        for (const auto& r : dump.rows)
            if (cond < 0 || r.label == cond) cond_rows.push_back(&r);
        if (cond_rows.empty()) {
            FairnessCell c;
            c.condition_label = cond;
            c.group = -1;
            rep.empty_cells.push_back(c);
            continue;
        }
        for (int pred : preds) {
            std::size_t overall_hits = 0;
            for (auto* r : cond_rows) overall_hits += (r->pred == pred);
            const double overall =
                static_cast<double>(overall_hits) / static_cast<double>(cond_rows.size());
            for (int g : groups) {
                std::size_t n = 0, hits = 0;
                for (auto* r : cond_rows)
                    if (r->group == g) {
                        ++n;
                        hits += (r->pred == pred);
                    }
                FairnessCell c;
                c.pred = pred;
                c.group = g;
                c.condition_label = cond;
                c.overall_rate = overall;
                if (n == 0) {
                    rep.empty_cells.push_back(c);
                    continue;
                }
                c.group_rate = static_cast<double>(hits) / static_cast<double>(n);
                c.deviation = std::abs(c.group_rate - overall);
                rep.max_deviation = std::max(rep.max_deviation, c.deviation);
                rep.cells.push_back(c);
            }
        }
    }
    return rep;
}

EvalReport evaluate(const PredictionDump& dump, const EvalOptions& opts) {
    PredictionDump named = dump;
    if (!opts.group_names.empty()) named.group_names = opts.group_names;
    EvalReport rep = accuracy_metrics(named);
    if (opts.with_auc) {
        EvalReport aucrep = auc_metrics(named);
        rep.has_auc = true;
        rep.overall_auc = aucrep.overall_auc;
        rep.auc_gap = aucrep.auc_gap;
        rep.auc_min = aucrep.auc_min;
        rep.auc_min_group = aucrep.auc_min_group;
        for (auto& g : rep.groups)
            for (const auto& ag : aucrep.groups)
                if (ag.group == g.group) g.auc = ag.auc;
    }
    if (opts.with_ci) {
        rep.bootstrap_seed = opts.bootstrap_seed;
        auto groups = by_group(named);
        for (auto& g : rep.groups) {
            std::vector<PredictionRow> slice;
            for (auto* r : groups[g.group]) slice.push_back(*r);
            g.acc_ci = confidence_interval(MetricKind::Accuracy, slice, opts.bootstrap_seed);
            if (opts.with_auc)
                g.auc_ci = confidence_interval(MetricKind::Auc, slice, opts.bootstrap_seed);
        }
        rep.overall_acc_ci =
            confidence_interval(MetricKind::Accuracy, named.rows, opts.bootstrap_seed);
        if (opts.with_auc)
            rep.overall_auc_ci = confidence_interval(MetricKind::Auc, named.rows, opts.bootstrap_seed);
    }
    return rep;
}

}  // namespace fairkit
