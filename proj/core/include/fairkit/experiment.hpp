#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fairkit/adversarial.hpp"
#include "fairkit/augment.hpp"
#include "fairkit/dataset.hpp"
#include "fairkit/generator.hpp"
#include "fairkit/report.hpp"

namespace fairkit {

enum class Method { Baseline, Noise, AD, ADDP, Freeze, IA, TARA, TARAF, BestThreshold };

Method parse_method(const std::string& name);
const char* method_name(Method method);

enum class DataSource { Csv, SynthTabular, ToyImage };

struct ToyImageSpec {
    std::size_t n = 1500;
    std::size_t scales = 3;
    std::size_t scale_width = 4;
    std::size_t side = 16;
    double crosstalk = 0.15;
};

struct ExperimentConfig {
    DataSource source = DataSource::SynthTabular;
    std::string csv_path;
    std::string csv_schema_preset;  // "osmi_gender" | "osmi_age" | "" (generic)
    DatasetSchema schema;           // used when no preset is set
    SynthSpec synth;
    ToyImageSpec toy;
    PartitionSpec partition;
    Method method = Method::Baseline;
    AdvConfig adv;
    bool beta_set = false;  // unset AD-family beta runs the {0.5, 1.0} grid
    bool tap_set = false;   // unset tap: logits for tabular, pre-logits for images
    SynthesisConfig augment;
    std::size_t ia_rows = 400;
    std::vector<double> alphas = {0.5, 0.75};
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    ArchSpec f_arch;  // hidden widths; embedding added per source
    ArchSpec a_arch;

    // Flat key=value file with '#' comments; returns defaults when path empty.
    static ExperimentConfig from_file(const std::string& path);
    void apply_override(const std::string& key, const std::string& value);
    void validate() const;
    std::string run_id() const;
};

struct RunArtifacts {
    std::string run_dir;
    Report report;
    std::string report_csv_path;
    std::string dump_csv_path;
    std::string baseline_run_dir;  // empty for baseline runs
};

// Executes one experiment end to end: data, partition, baseline reference
// (when the method needs one), method training, evaluation, artifacts on disk
// under out/<run-id>/.
RunArtifacts run_experiment(const ExperimentConfig& config);

struct CompareResult {
    std::vector<std::string> methods;
    std::map<double, std::vector<double>> cai;    // alpha -> per-candidate
    std::map<double, std::vector<double>> cauci;  // empty when AUC missing
    std::vector<std::string> notes;
    std::string rendered;
};

// Conjunctive table of candidates against the first (baseline) report. All
// reports must share the test manifest hash.
CompareResult compare_reports(const std::vector<std::string>& report_csv_paths,
                              const std::vector<double>& alphas = {0.5, 0.75});

}  // namespace fairkit
