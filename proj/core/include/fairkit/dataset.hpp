#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fairkit/errors.hpp"
#include "fairkit/tensor.hpp"

namespace fairkit {

struct ColumnSpec {
    enum class Type { Categorical, Numeric };
    std::string name;
    Type type = Type::Categorical;
    // Numeric columns with a cutoff are binarized at ingestion:
    // value <= cutoff -> code 1, else 0 (e.g. age <= 40 -> "younger").
    bool has_cutoff = false;
    double cutoff = 0;

    static ColumnSpec categorical(std::string n) { return {std::move(n), Type::Categorical, false, 0}; }
    static ColumnSpec numeric(std::string n) { return {std::move(n), Type::Numeric, false, 0}; }
    static ColumnSpec numeric_cutoff(std::string n, double c) { return {std::move(n), Type::Numeric, true, c}; }
};

struct DatasetSchema {
    std::vector<ColumnSpec> features;
    std::string target_column;
    std::string sensitive_column;  // may name one of the feature columns
};

// Preset mirroring the eight tabular survey features plus the treatment
// target; sensitive is "gender" or "age" (age binarized at 40).
DatasetSchema osmi_schema(const std::string& sensitive);

// Tabular dataset with dense categorical codes. Categorical cells are encoded
// in order of first appearance; integer-looking cells are used as codes
// directly, which makes emit/ingest round-trips exact.
struct LabeledDataset {
    DatasetSchema schema;
    std::vector<std::vector<double>> x;  // per row, one value per feature
    std::vector<int> y;
    std::vector<int> s;
    std::vector<bool> synthetic;
    std::vector<std::map<std::string, int>> feature_encodings;  // per feature
    std::map<std::string, int> target_encoding;
    std::map<std::string, int> sensitive_encoding;
    std::size_t dropped_rows = 0;
    std::string provenance;

    std::size_t size() const { return x.size(); }
    std::size_t feature_count() const { return schema.features.size(); }

    // Category count per feature for embedding construction (0 = numeric).
    std::vector<int> categories_per_feature() const;

    Tensor2 features_tensor() const;
    Tensor2 features_tensor(const std::vector<std::size_t>& rows) const;

    LabeledDataset subset(const std::vector<std::size_t>& rows) const;
};

LabeledDataset ingest_csv(const std::string& path, const DatasetSchema& schema);
void emit_csv(const LabeledDataset& data, const std::string& path);

struct PartitionSpec {
    double train_frac = 0.7, val_frac = 0.1, test_frac = 0.2;
    // Cell excluded entirely from train/val (domain generalization); -1 = none.
    int excluded_y = -1, excluded_s = -1;
    // Per-(y,s)-cell test quota; 0 = auto (the smallest cell available).
    std::size_t test_quota = 0;
    std::uint64_t seed = 0;
};

struct CellCounts {
    std::map<std::pair<int, int>, std::size_t> cells;  // (y,s) -> count
    std::size_t total() const;
};

struct DatasetManifest {
    CellCounts train, val, test;
    std::size_t discarded_test_rows = 0;
    std::size_t dropped_rows = 0;
    std::string render() const;        // aligned text table
    std::uint64_t content_hash() const;
};

struct PartitionResult {
    LabeledDataset train, val, test;
    // Test-pool rows left over after balancing; the best-threshold baseline
    // draws its extra balanced validation set from here.
    LabeledDataset reserve;
    DatasetManifest manifest;
};

// Balanced per-(y,s)-cell subsample of `data`; quota 0 = smallest cell.
LabeledDataset balanced_subsample(const LabeledDataset& data, std::size_t quota,
                                  std::uint64_t seed);

PartitionResult partition(const LabeledDataset& data, const PartitionSpec& spec);

// Seeded biased tabular generator used as the desk-scale tabular benchmark.
//
// Generative process:
//   S ~ Bernoulli(1/2)
//   confound = S with probability (1+rho)/2, else 1-S  (so corr(confound,S)=rho)
//   x1, x2 ~ N(0,1) independent
//   Y = 1{ x1 + 0.5*x2 - 0.3*shift + shift*(1-2S) + label_noise*eta > 0 }
// The label rule carries a group-conditional intercept, so the Bayes-optimal
// decision needs S; the confound is the only feature carrying S. A plain
// classifier therefore leans on the confound and picks up a known accuracy
// gap, and with shift > 0 the (Y=1, S=1) cell is the minority cell.
struct SynthSpec {
    std::size_t n = 10000;
    double rho = 0.9;
    double shift = 1.0;
    double label_noise = 0.5;
    std::uint64_t seed = 0;
};

LabeledDataset synth_tabular(const SynthSpec& spec);

// Appends synthetic rows (same schema) to train; synthetic flags forced true.
LabeledDataset merge_synthetic(const LabeledDataset& train, const LabeledDataset& synthetic_rows);

CellCounts count_cells(const LabeledDataset& data);

}  // namespace fairkit
