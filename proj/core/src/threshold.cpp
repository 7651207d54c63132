#include "fairkit/threshold.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "fairkit/rng.hpp"

namespace fairkit {

namespace {

struct RocPoint {
    double fpr = 0, tpr = 0;
    double threshold = 0;  // predict positive when score >= threshold
};

struct GroupRoc {
    int group = 0;
    std::size_t n_pos = 0, n_neg = 0;
    std::vector<RocPoint> points;  // staircase, ascending fpr
    std::vector<RocPoint> hull;    // upper concave envelope, ascending fpr
};

double cross(const RocPoint& o, const RocPoint& a, const RocPoint& b) {
    return (a.fpr - o.fpr) * (b.tpr - o.tpr) - (a.tpr - o.tpr) * (b.fpr - o.fpr);
}

GroupRoc build_roc(int group, const std::vector<const PredictionRow*>& rows) {
    GroupRoc roc;
    roc.group = group;
    std::vector<std::pair<double, int>> scored;
    for (auto* r : rows) {
        scored.emplace_back(r->score, r->label);
        (r->label == 1 ? roc.n_pos : roc.n_neg) += 1;
    }
    if (roc.n_pos == 0 || roc.n_neg == 0)
        throw DataError("fit_group_thresholds: validation cell (group " + std::to_string(group) +
                        ", class " + std::to_string(roc.n_pos == 0 ? 1 : 0) + ") is empty");
    std::sort(scored.begin(), scored.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    // Threshold +inf first (predict nothing), then each distinct score.
    roc.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < scored.size()) {
        const double s = scored[i].first;
        while (i < scored.size() && scored[i].first == s) {
            (scored[i].second == 1 ? tp : fp) += 1;
            ++i;
        }
        roc.points.push_back({static_cast<double>(fp) / static_cast<double>(roc.n_neg),
                              static_cast<double>(tp) / static_cast<double>(roc.n_pos), s});
    }

    // Upper concave envelope (monotone-chain upper hull) from (0,0) to (1,1).
    for (const auto& p : roc.points) {
        while (roc.hull.size() >= 2 &&
               cross(roc.hull[roc.hull.size() - 2], roc.hull.back(), p) >= 0)
            roc.hull.pop_back();
        roc.hull.push_back(p);
    }
    return roc;
}

double envelope_at(const GroupRoc& roc, double f) {
    const auto& hull = roc.hull;
    if (f <= hull.front().fpr) return hull.front().tpr;
    if (f >= hull.back().fpr) return hull.back().tpr;
    for (std::size_t i = 1; i < hull.size(); ++i) {
        if (f <= hull[i].fpr) {
            const auto& a = hull[i - 1];
            const auto& b = hull[i];
            if (b.fpr == a.fpr) return std::max(a.tpr, b.tpr);
            const double lam = (f - a.fpr) / (b.fpr - a.fpr);
            return a.tpr + lam * (b.tpr - a.tpr);
        }
    }
    return hull.back().tpr;
}

// Best two-point mixture of this group's staircase achieving fpr == f exactly,
// with tpr as close to t_target as possible.
GroupThreshold realize(const GroupRoc& roc, double f, double t_target) {
    GroupThreshold best;
    best.group = roc.group;
    double best_err = std::numeric_limits<double>::infinity();
    const auto& pts = roc.points;
    for (std::size_t a = 0; a < pts.size(); ++a) {
        if (pts[a].fpr > f + 1e-12) continue;
        for (std::size_t b = 0; b < pts.size(); ++b) {
            if (pts[b].fpr < f - 1e-12) continue;
            double lam;  // weight on point a (the higher threshold)
            if (pts[b].fpr == pts[a].fpr) {
                if (std::abs(pts[a].fpr - f) > 1e-12) continue;
                lam = 1.0;
            } else {
                lam = (pts[b].fpr - f) / (pts[b].fpr - pts[a].fpr);
            }
            const double tpr = lam * pts[a].tpr + (1 - lam) * pts[b].tpr;
            const double err = std::abs(tpr - t_target);
            if (err < best_err - 1e-15) {
                best_err = err;
                best.t_hi = pts[a].threshold;
                best.t_lo = pts[b].threshold;
                best.p = 1.0 - lam;  // probability of the low threshold
                best.tpr = tpr;
                best.fpr = f;
            }
        }
    }
    if (best.t_lo == best.t_hi) best.p = 1.0;
    if (best.p <= 1e-15) {  // degenerate mixture: single high threshold
        best.t_lo = best.t_hi;
        best.p = 1.0;
    } else if (best.p >= 1.0 - 1e-15) {
        best.t_hi = best.t_lo;
        best.p = 1.0;
    }
    return best;
}

}  // namespace

GroupThresholds fit_group_thresholds(const PredictionDump& validation) {
    std::map<int, std::vector<const PredictionRow*>> groups;
    for (const auto& r : validation.rows) groups[r.group].push_back(&r);
    if (groups.empty()) throw DataError("fit_group_thresholds: empty validation dump");

    std::vector<GroupRoc> rocs;
    for (auto& [gid, rows] : groups) rocs.push_back(build_roc(gid, rows));

    // Candidate operating fprs: every hull vertex plus pairwise envelope
    // segment crossings; the linear objective peaks at one of these.
    std::vector<double> candidates;
    for (const auto& roc : rocs)
        for (const auto& v : roc.hull) candidates.push_back(v.fpr);
    for (std::size_t i = 0; i < rocs.size(); ++i) {
        for (std::size_t j = i + 1; j < rocs.size(); ++j) {
            for (std::size_t a = 1; a < rocs[i].hull.size(); ++a) {
                for (std::size_t b = 1; b < rocs[j].hull.size(); ++b) {
                    const auto &p1 = rocs[i].hull[a - 1], &p2 = rocs[i].hull[a];
                    const auto &q1 = rocs[j].hull[b - 1], &q2 = rocs[j].hull[b];
                    if (p2.fpr == p1.fpr || q2.fpr == q1.fpr) continue;
                    const double s1 = (p2.tpr - p1.tpr) / (p2.fpr - p1.fpr);
                    const double s2 = (q2.tpr - q1.tpr) / (q2.fpr - q1.fpr);
                    if (s1 == s2) continue;
                    const double c1 = p1.tpr - s1 * p1.fpr;
                    const double c2 = q1.tpr - s2 * q1.fpr;
                    const double f = (c2 - c1) / (s1 - s2);
                    const double lo = std::max(p1.fpr, q1.fpr);
                    const double hi = std::min(p2.fpr, q2.fpr);
                    if (f >= lo - 1e-12 && f <= hi + 1e-12)
                        candidates.push_back(std::clamp(f, 0.0, 1.0));
                }
            }
        }
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    double total_pos = 0, total_neg = 0;
    for (const auto& roc : rocs) {
        total_pos += static_cast<double>(roc.n_pos);
        total_neg += static_cast<double>(roc.n_neg);
    }

    double best_utility = -1, best_f = 0, best_t = 0;
    for (double f : candidates) {
        double t = 1.0;
        for (const auto& roc : rocs) t = std::min(t, envelope_at(roc, f));
        const double utility = t * total_pos + (1 - f) * total_neg;
        const bool better = utility > best_utility + 1e-12 ||
                            (utility > best_utility - 1e-12 &&
                             (t > best_t + 1e-12 ||
                              (t > best_t - 1e-12 && f < best_f - 1e-12)));
        if (better) {
            best_utility = utility;
            best_f = f;
            best_t = t;
        }
    }

    GroupThresholds fit;
    fit.target_fpr = best_f;
    fit.target_tpr = best_t;
    for (const auto& roc : rocs) fit.per_group.push_back(realize(roc, best_f, best_t));

    for (std::size_t i = 0; i < fit.per_group.size(); ++i)
        for (std::size_t j = i + 1; j < fit.per_group.size(); ++j)
            fit.residual = std::max(
                fit.residual, std::abs(fit.per_group[i].tpr - fit.per_group[j].tpr) +
                                  std::abs(fit.per_group[i].fpr - fit.per_group[j].fpr));
    return fit;
}

PredictionDump apply_group_thresholds(const GroupThresholds& thresholds,
                                      const PredictionDump& dump, std::uint64_t seed) {
    std::map<int, const GroupThreshold*> rules;
    for (const auto& g : thresholds.per_group) rules[g.group] = &g;

    PredictionDump out = dump;
    auto rng = make_rng(seed, stream::kThresholdMix);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (auto& r : out.rows) {
        auto it = rules.find(r.group);
        if (it == rules.end())
            throw DataError("apply_group_thresholds: no rule for group " +
                            std::to_string(r.group));
        const GroupThreshold& rule = *it->second;
        double th = rule.t_lo;
        if (rule.t_lo != rule.t_hi) th = (unit(rng) < rule.p) ? rule.t_lo : rule.t_hi;
        r.pred = (r.score >= th) ? 1 : 0;
    }
    return out;
}

void save_thresholds_csv(const GroupThresholds& thresholds, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw DataError("save_thresholds_csv: cannot open " + path);
    os << "group,t_lo,t_hi,p\n";
    char buf[160];
    for (const auto& g : thresholds.per_group) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", g.group, g.t_lo, g.t_hi, g.p);
        os << buf;
    }
}

GroupThresholds load_thresholds_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("load_thresholds_csv: cannot open " + path);
    std::string line;
    if (!std::getline(is, line) || line.rfind("group,t_lo,t_hi,p", 0) != 0)
        throw DataError("load_thresholds_csv: bad header in " + path);
    GroupThresholds t;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        GroupThreshold g;
        std::getline(ss, cell, ',');
        g.group = std::stoi(cell);
        std::getline(ss, cell, ',');
        g.t_lo = std::stod(cell);
        std::getline(ss, cell, ',');
        g.t_hi = std::stod(cell);
        std::getline(ss, cell, ',');
        g.p = std::stod(cell);
        t.per_group.push_back(g);
    }
    return t;
}

}  // namespace fairkit
