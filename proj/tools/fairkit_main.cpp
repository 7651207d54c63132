#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "fairkit/checkpoint.hpp"
#include "fairkit/experiment.hpp"
#include "fairkit/ita.hpp"

namespace {

fairkit::ExperimentConfig load_config(const std::string& path,
                                      const std::vector<std::string>& overrides,
                                      const std::string& out_override) {
    auto cfg = fairkit::ExperimentConfig::from_file(path);
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw fairkit::ConfigError("--set expects key=value, got '" + kv + "'");
        cfg.apply_override(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!out_override.empty()) cfg.out_dir = out_override;
    return cfg;
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides,
            const std::string& out_dir) {
    auto cfg = load_config(config_path, overrides, out_dir);
    auto artifacts = fairkit::run_experiment(cfg);
    std::cout << fairkit::render_report_text(artifacts.report);
    std::cout << "artifacts: " << artifacts.run_dir << "\n";
    if (!artifacts.baseline_run_dir.empty())
        std::cout << "baseline:  " << artifacts.baseline_run_dir << "\n";
    return 0;
}

int cmd_compare(const std::vector<std::string>& reports, const std::vector<double>& alphas) {
    auto res = fairkit::compare_reports(reports, alphas.empty()
                                                     ? std::vector<double>{0.5, 0.75}
                                                     : alphas);
    std::cout << res.rendered;
    return 0;
}

int cmd_ita(const std::vector<std::string>& images, const std::string& method_name,
            const std::string& regions_path, double cutoff, bool cutoff_set,
            const std::string& out_csv, const std::string& hist_csv) {
    fairkit::ItaMethod method = fairkit::ItaMethod::WholeImage;
    if (method_name == "fundus") method = fairkit::ItaMethod::FundusMask;
    else if (method_name == "face") method = fairkit::ItaMethod::FaceRegions;
    else if (method_name != "whole")
        throw fairkit::ConfigError("--method must be fundus|face|whole");
    if (!cutoff_set) cutoff = (method == fairkit::ItaMethod::FaceRegions) ? 28.0 : 19.0;

    std::vector<fairkit::RegionPolygon> regions;
    if (!regions_path.empty()) regions = fairkit::load_regions_json(regions_path);
    if (method == fairkit::ItaMethod::FaceRegions && regions.empty())
        throw fairkit::ConfigError("--method face requires --regions");

    std::ostringstream os;
    os << "image_id,ita,mask_coverage,binary_attribute\n";
    std::vector<double> itas;
    for (const auto& path : images) {
        const auto img = fairkit::load_image(path);
        auto res = fairkit::binarize(fairkit::image_ita(img, method, regions), cutoff);
        itas.push_back(res.ita_degrees);
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%s,%.4f,%.4f,%d\n",
                      std::filesystem::path(path).filename().string().c_str(), res.ita_degrees,
                      res.mask_coverage, *res.binary_attribute ? 1 : 0);
        os << buf;
    }
    if (out_csv.empty()) {
        std::cout << os.str();
    } else {
        std::ofstream f(out_csv);
        f << os.str();
        std::cout << "wrote " << out_csv << "\n";
    }
    if (!hist_csv.empty()) {
        const auto h = fairkit::histogram(itas, -90, 90, 36);
        std::ofstream f(hist_csv);
        f << "bin_lo,bin_hi,count\n";
        for (std::size_t b = 0; b < h.counts.size(); ++b) {
            const double w = (h.hi - h.lo) / static_cast<double>(h.counts.size());
            f << h.lo + b * w << ',' << h.lo + (b + 1) * w << ',' << h.counts[b] << '\n';
        }
        std::cout << "wrote " << hist_csv << "\n";
    }
    return 0;
}

int cmd_augment(const std::string& config_path, const std::vector<std::string>& overrides,
                const std::string& out_dir) {
    auto cfg = load_config(config_path, overrides, out_dir);
    if (cfg.source != fairkit::DataSource::ToyImage)
        throw fairkit::ConfigError("augment: config must use source=toy_image");
    cfg.method = fairkit::Method::IA;
    cfg.validate();

    auto gen = fairkit::ToyGenerator::make(cfg.toy.scales, cfg.toy.scale_width, cfg.toy.side,
                                           cfg.seed, cfg.toy.crosstalk);
    const auto pairs = fairkit::sample_pairs(gen, cfg.toy.n, cfg.seed ^ 0x70b5);
    fairkit::Tensor2 obs = fairkit::observations_tensor(pairs);
    std::vector<int> ys, ss;
    for (const auto& p : pairs) {
        ys.push_back(gen.true_y(p.latent));
        ss.push_back(gen.true_s(p.latent));
    }
    const auto c1_y = fairkit::train_c1(obs, ys, cfg.seed ^ 0xc11);
    const auto c1_s = fairkit::train_c1(obs, ss, cfg.seed ^ 0xc15);

    fairkit::SynthesisConfig syn = cfg.augment;
    syn.seed = cfg.seed;
    syn.target_y = cfg.partition.excluded_y;
    syn.target_s = cfg.partition.excluded_s;
    if (syn.mask_y.empty()) syn.mask_y = {gen.y_scale()};
    if (syn.mask_s.empty()) syn.mask_s = {gen.s_scale()};
    const auto batch = fairkit::synthesize_missing(gen, c1_y, c1_s, syn, cfg.ia_rows);

    std::filesystem::create_directories(cfg.out_dir);
    const std::string rows_path = cfg.out_dir + "/synthetic_rows.csv";
    std::ofstream rows(rows_path);
    for (std::size_t c = 0; c < batch.x.cols; ++c) rows << "px" << c << ',';
    rows << "y,s,synthetic\n";
    for (std::size_t r = 0; r < batch.x.rows; ++r) {
        char buf[64];
        for (std::size_t c = 0; c < batch.x.cols; ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g,", batch.x.at(r, c));
            rows << buf;
        }
        rows << batch.y[r] << ',' << batch.s[r] << ",1\n";
    }
    const std::string traj_path = cfg.out_dir + "/ascent_trajectories.csv";
    std::ofstream traj(traj_path);
    traj << "row,step,confidence\n";
    for (std::size_t r = 0; r < batch.trajectories.size(); ++r)
        for (std::size_t j = 0; j < batch.trajectories[r].size(); ++j)
            traj << r << ',' << j << ',' << batch.trajectories[r][j] << '\n';
    std::cout << "accepted " << batch.accepted << "/" << batch.requested << " rows ("
              << batch.attempted << " attempts)\n";
    std::cout << "wrote " << rows_path << " and " << traj_path << "\n";
    return 0;
}

int cmd_probe(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& checkpoint) {
    auto cfg = load_config(config_path, overrides, "");
    cfg.validate();
    // Rebuild the experiment's data and probe residual leakage on its test split.
    auto probe_cfg = cfg;
    probe_cfg.method = fairkit::Method::Baseline;
    fairkit::TrainedPair pair;
    pair.predictor = fairkit::load_net(checkpoint);
    pair.tap_layer = fairkit::resolve_tap_layer(pair.predictor, cfg.adv.tap);

    fairkit::ExperimentConfig data_cfg = cfg;
    fairkit::SynthSpec synth = data_cfg.synth;
    synth.seed = data_cfg.seed;
    fairkit::LabeledDataset all;
    if (data_cfg.source == fairkit::DataSource::SynthTabular) {
        all = fairkit::synth_tabular(synth);
    } else if (data_cfg.source == fairkit::DataSource::Csv) {
        fairkit::DatasetSchema schema = data_cfg.schema;
        if (data_cfg.csv_schema_preset == "osmi_gender") schema = fairkit::osmi_schema("gender");
        else if (data_cfg.csv_schema_preset == "osmi_age") schema = fairkit::osmi_schema("age");
        all = fairkit::ingest_csv(data_cfg.csv_path, schema);
    } else {
        throw fairkit::ConfigError("probe: csv or synth sources only");
    }
    fairkit::PartitionSpec pspec = data_cfg.partition;
    pspec.seed = data_cfg.seed;
    auto parts = fairkit::partition(all, pspec);
    const auto res = fairkit::adversary_probe(pair, parts.test, cfg.seed);
    std::printf("probe_accuracy %.4f\nmajority_baseline %.4f\n", res.probe_accuracy,
                res.majority_baseline);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fairness-optimization toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir, checkpoint;
    std::vector<std::string> overrides;

    auto* run = app.add_subcommand("run", "run one experiment and emit reports");
    run->add_option("--config", config_path, "key=value config file");
    run->add_option("--set", overrides, "override config entries (key=value)");
    run->add_option("--out", out_dir, "output directory");

    std::vector<std::string> report_paths;
    std::vector<double> alphas;
    auto* cmp = app.add_subcommand("compare", "conjunctive table from report CSVs");
    cmp->add_option("reports", report_paths, "baseline report.csv first, then candidates")
        ->required()
        ->expected(-2);
    cmp->add_option("--alpha", alphas, "alpha values (default 0.5 0.75)");

    std::vector<std::string> images;
    std::string ita_method = "whole", regions_path, ita_out, hist_out;
    double cutoff = 19.0;
    auto* ita = app.add_subcommand("ita", "individual typology angle for images");
    ita->add_option("images", images, "PNG or P6 PPM files")->required()->expected(-1);
    ita->add_option("--method", ita_method, "fundus|face|whole (default whole)");
    ita->add_option("--regions", regions_path, "region polygons JSON (face method)");
    auto* cutoff_opt = ita->add_option("--cutoff", cutoff, "dark-skin cutoff (<=, inclusive)");
    ita->add_option("--out", ita_out, "output CSV (stdout when omitted)");
    ita->add_option("--hist", hist_out, "also write an ITA histogram CSV");

    auto* aug = app.add_subcommand("augment", "synthesize rows for a missing subpopulation");
    aug->add_option("--config", config_path, "key=value config file");
    aug->add_option("--set", overrides, "override config entries");
    aug->add_option("--out", out_dir, "output directory");

    auto* prb = app.add_subcommand("probe", "residual-leakage probe on a checkpoint");
    prb->add_option("--config", config_path, "config describing the dataset/partition");
    prb->add_option("--set", overrides, "override config entries");
    prb->add_option("--checkpoint", checkpoint, "predictor .fknt file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, overrides, out_dir);
        if (cmp->parsed()) return cmd_compare(report_paths, alphas);
        if (ita->parsed())
            return cmd_ita(images, ita_method, regions_path, cutoff, cutoff_opt->count() > 0,
                           ita_out, hist_out);
        if (aug->parsed()) return cmd_augment(config_path, overrides, out_dir);
        if (prb->parsed()) return cmd_probe(config_path, overrides, checkpoint);
    } catch (const fairkit::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const fairkit::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
