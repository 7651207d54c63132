#include "fairkit/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "fairkit/rng.hpp"

namespace fairkit {

DatasetSchema osmi_schema(const std::string& sensitive) {
    DatasetSchema schema;
    schema.features = {
        ColumnSpec::numeric_cutoff("age", 40.0),
        ColumnSpec::categorical("gender"),
        ColumnSpec::categorical("benefits"),
        ColumnSpec::categorical("care_options"),
        ColumnSpec::categorical("anonymity"),
        ColumnSpec::categorical("work_interfere"),
        ColumnSpec::categorical("leave"),
        ColumnSpec::categorical("mental_health_consequence"),
    };
    schema.target_column = "treatment";
    if (sensitive != "gender" && sensitive != "age")
        throw ConfigError("osmi_schema: sensitive must be 'gender' or 'age'");
    schema.sensitive_column = sensitive;
    return schema;
}

std::vector<int> LabeledDataset::categories_per_feature() const {
    std::vector<int> cats(schema.features.size(), 0);
    for (std::size_t f = 0; f < schema.features.size(); ++f) {
        const auto& col = schema.features[f];
        if (col.type == ColumnSpec::Type::Categorical || col.has_cutoff) {
            int mx = 0;
            for (const auto& row : x) mx = std::max(mx, static_cast<int>(std::lround(row[f])));
            cats[f] = mx + 1;
            if (col.has_cutoff) cats[f] = std::max(cats[f], 2);
        }
    }
    return cats;
}

Tensor2 LabeledDataset::features_tensor() const {
    Tensor2 t(x.size(), feature_count());
    for (std::size_t r = 0; r < x.size(); ++r)
        for (std::size_t c = 0; c < feature_count(); ++c) t.at(r, c) = x[r][c];
    return t;
}

Tensor2 LabeledDataset::features_tensor(const std::vector<std::size_t>& rows) const {
    Tensor2 t(rows.size(), feature_count());
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < feature_count(); ++c) t.at(r, c) = x[rows[r]][c];
    return t;
}

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& rows) const {
    LabeledDataset out;
    out.schema = schema;
    out.feature_encodings = feature_encodings;
    out.target_encoding = target_encoding;
    out.sensitive_encoding = sensitive_encoding;
    out.provenance = provenance;
    out.x.reserve(rows.size());
    for (std::size_t i : rows) {
        out.x.push_back(x[i]);
        out.y.push_back(y[i]);
        out.s.push_back(s[i]);
        out.synthetic.push_back(synthetic[i]);
    }
    return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

bool parse_int_code(const std::string& s, int& out) {
    if (s.empty()) return false;
    std::size_t i = 0;
    for (; i < s.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    try {
        out = std::stoi(s);
    } catch (const std::exception&) {
        return false;
    }
    return true;
}

int encode_cell(const std::string& cell, std::map<std::string, int>& table) {
    int code;
    if (parse_int_code(cell, code)) return code;
    auto it = table.find(cell);
    if (it != table.end()) return it->second;
    // New categories get the next dense code past everything seen so far.
    int next = 0;
    for (const auto& [k, v] : table) next = std::max(next, v + 1);
    table.emplace(cell, next);
    return next;
}

}  // namespace

LabeledDataset ingest_csv(const std::string& path, const DatasetSchema& schema) {
    std::ifstream is(path);
    if (!is) throw DataError("ingest_csv: cannot open " + path);
    std::string line;
    if (!std::getline(is, line)) throw DataError("ingest_csv: empty file " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_csv_line(line);

    auto col_index = [&](const std::string& name) -> int {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        return -1;
    };

    std::vector<int> feature_cols;
    for (const auto& f : schema.features) {
        const int idx = col_index(f.name);
        if (idx < 0) throw DataError("ingest_csv: missing column '" + f.name + "' in " + path);
        feature_cols.push_back(idx);
    }
    const int target_col = col_index(schema.target_column);
    if (target_col < 0)
        throw DataError("ingest_csv: missing target column '" + schema.target_column + "'");
    const int sensitive_col = col_index(schema.sensitive_column);
    if (sensitive_col < 0)
        throw DataError("ingest_csv: missing sensitive column '" + schema.sensitive_column + "'");
    const int synthetic_col = col_index("synthetic");

    LabeledDataset data;
    data.schema = schema;
    data.feature_encodings.resize(schema.features.size());
    data.provenance = path;

    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() < header.size()) {
            ++data.dropped_rows;
            continue;
        }
        bool bad = false;
        std::vector<double> row(schema.features.size(), 0.0);
        for (std::size_t f = 0; f < schema.features.size() && !bad; ++f) {
            const std::string& cell = cells[feature_cols[f]];
            if (cell.empty()) {
                bad = true;
                break;
            }
            const auto& col = schema.features[f];
            if (col.type == ColumnSpec::Type::Numeric) {
                try {
                    const double v = std::stod(cell);
                    row[f] = col.has_cutoff ? (v <= col.cutoff ? 1.0 : 0.0) : v;
                } catch (const std::exception&) {
                    bad = true;
                }
            } else {
                row[f] = encode_cell(cell, data.feature_encodings[f]);
            }
        }
        const std::string& ycell = cells[target_col];
        const std::string& scell = cells[sensitive_col];
        if (bad || ycell.empty() || scell.empty()) {
            ++data.dropped_rows;
            continue;
        }
        int yv = encode_cell(ycell, data.target_encoding);
        int sv;
        // Binarized sensitive columns (e.g. age) reuse the feature cutoff rule.
        const auto sensitive_feature =
            std::find_if(schema.features.begin(), schema.features.end(),
                         [&](const ColumnSpec& c) { return c.name == schema.sensitive_column; });
        if (sensitive_feature != schema.features.end() && sensitive_feature->has_cutoff) {
            try {
                sv = std::stod(scell) <= sensitive_feature->cutoff ? 1 : 0;
            } catch (const std::exception&) {
                ++data.dropped_rows;
                continue;
            }
        } else {
            sv = encode_cell(scell, data.sensitive_encoding);
        }
        bool syn = false;
        if (synthetic_col >= 0) syn = (cells[synthetic_col] == "1");
        data.x.push_back(std::move(row));
        data.y.push_back(yv);
        data.s.push_back(sv);
        data.synthetic.push_back(syn);
    }
    return data;
}

void emit_csv(const LabeledDataset& data, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw DataError("emit_csv: cannot open for write " + path);
    for (std::size_t f = 0; f < data.schema.features.size(); ++f)
        os << data.schema.features[f].name << ',';
    os << data.schema.target_column;
    bool sensitive_is_feature = false;
    for (const auto& f : data.schema.features)
        if (f.name == data.schema.sensitive_column) sensitive_is_feature = true;
    // The sensitive column is re-emitted even when it aliases a feature so the
    // stored per-row s codes survive the round trip exactly.
    const std::string s_col = sensitive_is_feature ? "__s" : data.schema.sensitive_column;
    os << ',' << s_col << ",synthetic\n";
    char buf[64];
    for (std::size_t r = 0; r < data.size(); ++r) {
        for (std::size_t f = 0; f < data.feature_count(); ++f) {
            const auto& col = data.schema.features[f];
            const double v = data.x[r][f];
            if (col.type == ColumnSpec::Type::Categorical || col.has_cutoff) {
                os << static_cast<long>(std::lround(v)) << ',';
            } else {
                std::snprintf(buf, sizeof(buf), "%.17g", v);
                os << buf << ',';
            }
        }
        os << data.y[r] << ',' << data.s[r] << ',' << (data.synthetic[r] ? 1 : 0) << '\n';
    }
}

std::size_t CellCounts::total() const {
    std::size_t n = 0;
    for (const auto& [k, v] : cells) n += v;
    return n;
}

CellCounts count_cells(const LabeledDataset& data) {
    CellCounts c;
    for (std::size_t i = 0; i < data.size(); ++i) c.cells[{data.y[i], data.s[i]}] += 1;
    return c;
}

std::string DatasetManifest::render() const {
    std::ostringstream os;
    os << "cell (y,s)    train      val     test\n";
    std::map<std::pair<int, int>, bool> keys;
    for (const auto& [k, v] : train.cells) keys[k] = true;
    for (const auto& [k, v] : val.cells) keys[k] = true;
    for (const auto& [k, v] : test.cells) keys[k] = true;
    char buf[128];
    for (const auto& [k, unused] : keys) {
        auto get = [&](const CellCounts& c) {
            auto it = c.cells.find(k);
            return it == c.cells.end() ? std::size_t{0} : it->second;
        };
        std::snprintf(buf, sizeof(buf), "(%d,%d)    %8zu %8zu %8zu\n", k.first, k.second,
                      get(train), get(val), get(test));
        os << buf;
    }
    os << "discarded_test_rows " << discarded_test_rows << "\n";
    os << "dropped_rows " << dropped_rows << "\n";
    return os.str();
}

std::uint64_t DatasetManifest::content_hash() const {
    const std::string text = render();
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

PartitionResult partition(const LabeledDataset& data, const PartitionSpec& spec) {
    if (std::abs(spec.train_frac + spec.val_frac + spec.test_frac - 1.0) > 1e-9)
        throw DomainError("partition: fractions must sum to 1");
    const bool has_exclusion = spec.excluded_y >= 0 && spec.excluded_s >= 0;

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto rng = make_rng(spec.seed, stream::kPartition);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<std::size_t> excluded, rest;
    for (std::size_t i : order) {
        if (has_exclusion && data.y[i] == spec.excluded_y && data.s[i] == spec.excluded_s)
            excluded.push_back(i);
        else
            rest.push_back(i);
    }
    if (has_exclusion && excluded.empty())
        throw DataError("partition: excluded cell has no rows in the data");

    const std::size_t n_rest = rest.size();
    const auto n_train = static_cast<std::size_t>(std::floor(spec.train_frac * n_rest));
    const auto n_val = static_cast<std::size_t>(std::floor(spec.val_frac * n_rest));
    std::vector<std::size_t> train_idx(rest.begin(), rest.begin() + n_train);
    std::vector<std::size_t> val_idx(rest.begin() + n_train, rest.begin() + n_train + n_val);
    std::vector<std::size_t> test_pool(rest.begin() + n_train + n_val, rest.end());
    test_pool.insert(test_pool.end(), excluded.begin(), excluded.end());

    // Balance the test set: equal count per (y,s) cell, seeded subsampling.
    std::map<std::pair<int, int>, std::vector<std::size_t>> cells;
    for (std::size_t i : test_pool) cells[{data.y[i], data.s[i]}].push_back(i);
    std::size_t quota = spec.test_quota;
    if (quota == 0) {
        quota = data.size();
        for (const auto& [k, v] : cells) quota = std::min(quota, v.size());
    }
    std::vector<std::size_t> test_idx, reserve_idx;
    std::size_t discarded = 0;
    for (auto& [k, v] : cells) {
        if (v.size() < quota)
            throw DataError("partition: test quota " + std::to_string(quota) +
                            " unsatisfiable for cell (" + std::to_string(k.first) + "," +
                            std::to_string(k.second) + ") with " + std::to_string(v.size()) +
                            " rows");
        test_idx.insert(test_idx.end(), v.begin(), v.begin() + quota);
        reserve_idx.insert(reserve_idx.end(), v.begin() + quota, v.end());
        discarded += v.size() - quota;
    }
    std::sort(test_idx.begin(), test_idx.end());
    std::sort(reserve_idx.begin(), reserve_idx.end());

    PartitionResult res;
    res.train = data.subset(train_idx);
    res.val = data.subset(val_idx);
    res.test = data.subset(test_idx);
    res.reserve = data.subset(reserve_idx);
    res.train.provenance = data.provenance + "#train";
    res.val.provenance = data.provenance + "#val";
    res.test.provenance = data.provenance + "#test";
    res.manifest.train = count_cells(res.train);
    res.manifest.val = count_cells(res.val);
    res.manifest.test = count_cells(res.test);
    res.manifest.discarded_test_rows = discarded;
    res.manifest.dropped_rows = data.dropped_rows;
    return res;
}

LabeledDataset synth_tabular(const SynthSpec& spec) {
    if (spec.rho < 0 || spec.rho > 1) throw DomainError("synth_tabular: rho must lie in [0,1]");
    LabeledDataset data;
    data.schema.features = {ColumnSpec::categorical("confound"), ColumnSpec::numeric("x1"),
                            ColumnSpec::numeric("x2")};
    data.schema.target_column = "y";
    data.schema.sensitive_column = "s";
    data.feature_encodings.resize(3);
    data.provenance = "synth_tabular";

    auto rng = make_rng(spec.seed, stream::kSynthData);
    std::bernoulli_distribution coin(0.5);
    std::bernoulli_distribution keep((1.0 + spec.rho) / 2.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    data.x.reserve(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        const int s = coin(rng) ? 1 : 0;
        const int confound = keep(rng) ? s : 1 - s;
        const double x1 = normal(rng);
        const double x2 = normal(rng);
        const double eta = normal(rng);
        const double margin = x1 + 0.5 * x2 - 0.3 * spec.shift + spec.shift * (1 - 2 * s) +
                              spec.label_noise * eta;
        const int y = (margin > 0) ? 1 : 0;
        data.x.push_back({static_cast<double>(confound), x1, x2});
        data.y.push_back(y);
        data.s.push_back(s);
        data.synthetic.push_back(false);
    }
    return data;
}

LabeledDataset balanced_subsample(const LabeledDataset& data, std::size_t quota,
                                  std::uint64_t seed) {
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto rng = make_rng(seed ^ 0xba1a, stream::kPartition);
    std::shuffle(order.begin(), order.end(), rng);
    std::map<std::pair<int, int>, std::vector<std::size_t>> cells;
    for (std::size_t i : order) cells[{data.y[i], data.s[i]}].push_back(i);
    if (cells.empty()) throw DataError("balanced_subsample: empty dataset");
    if (quota == 0) {
        quota = data.size();
        for (const auto& [k, v] : cells) quota = std::min(quota, v.size());
    }
    std::vector<std::size_t> keep;
    for (auto& [k, v] : cells) {
        if (v.size() < quota)
            throw DataError("balanced_subsample: cell (" + std::to_string(k.first) + "," +
                            std::to_string(k.second) + ") has only " + std::to_string(v.size()) +
                            " rows for quota " + std::to_string(quota));
        keep.insert(keep.end(), v.begin(), v.begin() + quota);
    }
    std::sort(keep.begin(), keep.end());
    return data.subset(keep);
}

LabeledDataset merge_synthetic(const LabeledDataset& train, const LabeledDataset& synthetic_rows) {
    if (train.schema.features.size() != synthetic_rows.schema.features.size())
        throw DataError("merge_synthetic: schema feature counts differ");
    for (std::size_t f = 0; f < train.schema.features.size(); ++f) {
        if (train.schema.features[f].name != synthetic_rows.schema.features[f].name ||
            train.schema.features[f].type != synthetic_rows.schema.features[f].type)
            throw DataError("merge_synthetic: schema mismatch on feature '" +
                            train.schema.features[f].name + "'");
    }
    LabeledDataset out = train;
    for (std::size_t i = 0; i < synthetic_rows.size(); ++i) {
        out.x.push_back(synthetic_rows.x[i]);
        out.y.push_back(synthetic_rows.y[i]);
        out.s.push_back(synthetic_rows.s[i]);
        out.synthetic.push_back(true);
    }
    return out;
}

}  // namespace fairkit
