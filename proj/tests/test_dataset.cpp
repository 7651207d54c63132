#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "fairkit/dataset.hpp"

using namespace fairkit;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    const std::string path = "/tmp/" + name;
    std::ofstream os(path);
    os << content;
    return path;
}

DatasetSchema toy_schema() {
    DatasetSchema s;
    s.features = {ColumnSpec::categorical("color"), ColumnSpec::numeric("size")};
    s.target_column = "label";
    s.sensitive_column = "grp";
    return s;
}

}  // namespace

TEST_CASE("ingest_csv: three-row toy file with stable encoding") {
    const auto path = write_temp("fairkit_toy.csv",
                                 "color,size,label,grp\n"
                                 "red,1.5,yes,a\n"
                                 "blue,2.0,no,b\n"
                                 "red,0.5,yes,a\n");
    auto data = ingest_csv(path, toy_schema());
    REQUIRE(data.size() == 3);
    CHECK(data.x[0][0] == 0);  // red -> 0 (first appearance)
    CHECK(data.x[1][0] == 1);  // blue -> 1
    CHECK(data.x[2][0] == 0);
    CHECK(data.y == std::vector<int>{0, 1, 0});
    CHECK(data.s == std::vector<int>{0, 1, 0});
    CHECK(data.dropped_rows == 0);
}

TEST_CASE("ingest_csv: rows with an empty target are dropped and counted") {
    const auto path = write_temp("fairkit_drop.csv",
                                 "color,size,label,grp\n"
                                 "red,1.5,yes,a\n"
                                 "blue,2.0,,b\n");
    auto data = ingest_csv(path, toy_schema());
    CHECK(data.size() == 1);
    CHECK(data.dropped_rows == 1);
}

TEST_CASE("ingest_csv: missing schema column is an error") {
    const auto path = write_temp("fairkit_badheader.csv", "color,label,grp\nred,yes,a\n");
    CHECK_THROWS_AS(ingest_csv(path, toy_schema()), DataError);
}

TEST_CASE("osmi preset accepts the eight survey columns") {
    const auto path = write_temp(
        "fairkit_osmi.csv",
        "age,gender,benefits,care_options,anonymity,work_interfere,leave,"
        "mental_health_consequence,treatment\n"
        "35,male,yes,no,yes,sometimes,easy,no,yes\n"
        "52,female,no,yes,no,often,hard,maybe,no\n"
        "29,female,yes,yes,yes,never,easy,yes,yes\n");
    auto data = ingest_csv(path, osmi_schema("gender"));
    REQUIRE(data.size() == 3);
    // Age is binarized at 40: <=40 -> 1.
    CHECK(data.x[0][0] == 1);
    CHECK(data.x[1][0] == 0);
    CHECK(data.s == std::vector<int>{0, 1, 1});

    auto by_age = ingest_csv(path, osmi_schema("age"));
    CHECK(by_age.s == std::vector<int>{1, 0, 1});
    CHECK_THROWS_AS(osmi_schema("height"), ConfigError);
}

TEST_CASE("partition: exclusion, balance, determinism") {
    SynthSpec spec;
    spec.n = 4000;
    spec.seed = 5;
    auto data = synth_tabular(spec);
    PartitionSpec pspec;
    pspec.excluded_y = 1;
    pspec.excluded_s = 1;
    pspec.seed = 9;
    auto parts = partition(data, pspec);

    auto train_cells = count_cells(parts.train).cells;
    auto val_cells = count_cells(parts.val).cells;
    CHECK(train_cells.count({1, 1}) == 0);
    CHECK(val_cells.count({1, 1}) == 0);

    auto test_cells = count_cells(parts.test).cells;
    REQUIRE(test_cells.size() == 4);
    std::size_t mn = SIZE_MAX, mx = 0;
    for (const auto& [cell, n] : test_cells) {
        mn = std::min(mn, n);
        mx = std::max(mx, n);
    }
    CHECK(mn == mx);  // balanced

    auto parts2 = partition(data, pspec);
    CHECK(parts2.train.x == parts.train.x);
    CHECK(parts2.test.x == parts.test.x);
}

TEST_CASE("partition: disjointness and exclusion hold across 50 seeds") {
    SynthSpec spec;
    spec.n = 600;
    spec.seed = 77;
    auto data = synth_tabular(spec);
    // Tag rows through a hidden unique feature value to trace membership.
    for (std::size_t i = 0; i < data.size(); ++i) data.x[i][1] = static_cast<double>(i);

    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        PartitionSpec pspec;
        pspec.excluded_y = 1;
        pspec.excluded_s = 1;
        pspec.seed = seed;
        auto parts = partition(data, pspec);
        std::vector<int> seen(data.size(), 0);
        for (const auto& split : {&parts.train, &parts.val, &parts.test, &parts.reserve})
            for (const auto& row : split->x) seen[static_cast<std::size_t>(row[1])] += 1;
        CHECK(*std::max_element(seen.begin(), seen.end()) <= 1);
        for (std::size_t i = 0; i < parts.train.size(); ++i)
            CHECK(!(parts.train.y[i] == 1 && parts.train.s[i] == 1));
        for (std::size_t i = 0; i < parts.val.size(); ++i)
            CHECK(!(parts.val.y[i] == 1 && parts.val.s[i] == 1));
    }
}

TEST_CASE("partition: unsatisfiable quota names the short cell") {
    SynthSpec spec;
    spec.n = 200;
    spec.seed = 3;
    auto data = synth_tabular(spec);
    PartitionSpec pspec;
    pspec.test_quota = 100000;
    try {
        partition(data, pspec);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("cell") != std::string::npos);
    }
}

TEST_CASE("partition: fractions must sum to one") {
    SynthSpec spec;
    spec.n = 100;
    auto data = synth_tabular(spec);
    PartitionSpec pspec;
    pspec.train_frac = 0.9;
    CHECK_THROWS_AS(partition(data, pspec), DomainError);
}

TEST_CASE("synth_tabular: rho controls the confound correlation") {
    SynthSpec indep;
    indep.n = 10000;
    indep.rho = 0.0;  // independent confound
    indep.seed = 21;
    auto data = synth_tabular(indep);
    double mean_c = 0, mean_s = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        mean_c += data.x[i][0];
        mean_s += data.s[i];
    }
    mean_c /= data.size();
    mean_s /= data.size();
    double cov = 0, var_c = 0, var_s = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        cov += (data.x[i][0] - mean_c) * (data.s[i] - mean_s);
        var_c += (data.x[i][0] - mean_c) * (data.x[i][0] - mean_c);
        var_s += (data.s[i] - mean_s) * (data.s[i] - mean_s);
    }
    CHECK(std::abs(cov / std::sqrt(var_c * var_s)) < 0.05);

    SynthSpec exact;
    exact.n = 500;
    exact.rho = 1.0;
    exact.seed = 22;
    auto hard = synth_tabular(exact);
    for (std::size_t i = 0; i < hard.size(); ++i)
        CHECK(hard.x[i][0] == static_cast<double>(hard.s[i]));

    SynthSpec bad;
    bad.rho = 1.5;
    CHECK_THROWS_AS(synth_tabular(bad), DomainError);
}

TEST_CASE("merge_synthetic: identity on empty set, flags forced true") {
    SynthSpec spec;
    spec.n = 50;
    spec.seed = 4;
    auto train = synth_tabular(spec);
    LabeledDataset empty;
    empty.schema = train.schema;
    auto same = merge_synthetic(train, empty);
    CHECK(same.x == train.x);

    LabeledDataset extra;
    extra.schema = train.schema;
    extra.x = {{1.0, 0.1, 0.2}};
    extra.y = {1};
    extra.s = {1};
    extra.synthetic = {false};  // forced true on merge
    auto merged = merge_synthetic(train, extra);
    CHECK(merged.size() == train.size() + 1);
    CHECK(merged.synthetic.back() == true);

    LabeledDataset wrong;
    wrong.schema.features = {ColumnSpec::categorical("other")};
    wrong.schema.target_column = "y";
    wrong.schema.sensitive_column = "s";
    CHECK_THROWS_AS(merge_synthetic(train, wrong), DataError);
}

TEST_CASE("ingestion is idempotent on the canonical integer form") {
    SynthSpec spec;
    spec.n = 120;
    spec.seed = 14;
    auto data = synth_tabular(spec);
    data.synthetic[3] = true;
    const std::string path = "/tmp/fairkit_roundtrip.csv";
    emit_csv(data, path);
    auto back = ingest_csv(path, data.schema);
    REQUIRE(back.size() == data.size());
    CHECK(back.y == data.y);
    CHECK(back.s == data.s);
    CHECK(back.synthetic == data.synthetic);
    for (std::size_t i = 0; i < data.size(); ++i)
        for (std::size_t f = 0; f < data.feature_count(); ++f)
            CHECK(back.x[i][f] == data.x[i][f]);

    // Second emit/ingest cycle is exactly stable.
    const std::string path2 = "/tmp/fairkit_roundtrip2.csv";
    emit_csv(back, path2);
    auto again = ingest_csv(path2, data.schema);
    CHECK(again.x == back.x);
}

TEST_CASE("manifest renders cell counts and hashes deterministically") {
    SynthSpec spec;
    spec.n = 400;
    spec.seed = 2;
    auto data = synth_tabular(spec);
    PartitionSpec pspec;
    pspec.seed = 2;
    auto parts = partition(data, pspec);
    const auto text = parts.manifest.render();
    CHECK(text.find("cell (y,s)") != std::string::npos);
    CHECK(parts.manifest.content_hash() == partition(data, pspec).manifest.content_hash());
}
