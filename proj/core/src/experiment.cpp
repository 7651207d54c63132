#include "fairkit/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fairkit/checkpoint.hpp"
#include "fairkit/roc.hpp"
#include "fairkit/rng.hpp"
#include "fairkit/threshold.hpp"

namespace fairkit {

std::vector<RocCurvePoint> roc_points(const std::vector<double>& scores,
                                      const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw ShapeError("roc_points: size mismatch");
    std::size_t n_pos = 0, n_neg = 0;
    for (int y : labels) (y == 1 ? n_pos : n_neg) += 1;
    if (n_pos == 0 || n_neg == 0) throw DataError("roc_points: single-class population");
    std::vector<std::pair<double, int>> scored;
    scored.reserve(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) scored.emplace_back(scores[i], labels[i]);
    std::sort(scored.begin(), scored.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<RocCurvePoint> pts;
    pts.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    std::size_t tp = 0, fp = 0, i = 0;
    while (i < scored.size()) {
        const double s = scored[i].first;
        while (i < scored.size() && scored[i].first == s) {
            (scored[i].second == 1 ? tp : fp) += 1;
            ++i;
        }
        pts.push_back({s, static_cast<double>(fp) / static_cast<double>(n_neg),
                       static_cast<double>(tp) / static_cast<double>(n_pos)});
    }
    return pts;
}

Method parse_method(const std::string& name) {
    if (name == "baseline") return Method::Baseline;
    if (name == "noise") return Method::Noise;
    if (name == "ad") return Method::AD;
    if (name == "addp") return Method::ADDP;
    if (name == "freeze") return Method::Freeze;
    if (name == "ia") return Method::IA;
    if (name == "tara") return Method::TARA;
    if (name == "tara_f" || name == "taraf") return Method::TARAF;
    if (name == "best_threshold" || name == "best_thre") return Method::BestThreshold;
    throw ConfigError("unknown method '" + name + "'");
}

const char* method_name(Method method) {
    switch (method) {
        case Method::Baseline: return "baseline";
        case Method::Noise: return "noise";
        case Method::AD: return "ad";
        case Method::ADDP: return "addp";
        case Method::Freeze: return "freeze";
        case Method::IA: return "ia";
        case Method::TARA: return "tara";
        case Method::TARAF: return "tara_f";
        case Method::BestThreshold: return "best_threshold";
    }
    return "?";
}

namespace {

bool is_adversarial(Method m) {
    return m == Method::AD || m == Method::ADDP || m == Method::Freeze || m == Method::TARA ||
           m == Method::TARAF;
}

bool uses_augmentation(Method m) {
    return m == Method::IA || m == Method::TARA || m == Method::TARAF;
}

std::vector<std::string> split_list(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(s);
    while (std::getline(ss, cell, sep))
        if (!cell.empty()) out.push_back(cell);
    return out;
}

std::vector<std::size_t> parse_widths(const std::string& s) {
    std::vector<std::size_t> out;
    if (s == "none" || s == "0") return out;
    for (const auto& tok : split_list(s, ',')) out.push_back(std::stoul(tok));
    return out;
}

std::vector<int> parse_ints(const std::string& s) {
    std::vector<int> out;
    for (const auto& tok : split_list(s, ',')) out.push_back(std::stoi(tok));
    return out;
}

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    ExperimentConfig cfg;
    if (const char* env_seed = std::getenv("FAIRKIT_SEED")) {
        cfg.seed = std::stoull(env_seed);
    }
    if (path.empty()) return cfg;
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open " + path);
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        // trim
        const auto b = line.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        const auto e = line.find_last_not_of(" \t");
        line = line.substr(b, e - b + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("config: expected key=value, got: " + line);
        cfg.apply_override(line.substr(0, eq), line.substr(eq + 1));
    }
    return cfg;
}

void ExperimentConfig::apply_override(const std::string& key, const std::string& value) {
    auto num = [&]() { return std::stod(value); };
    auto flag = [&]() { return value == "1" || value == "true" || value == "on"; };
    if (key == "source") {
        if (value == "csv") source = DataSource::Csv;
        else if (value == "synth") source = DataSource::SynthTabular;
        else if (value == "toy_image") source = DataSource::ToyImage;
        else throw ConfigError("config: unknown source '" + value + "'");
    } else if (key == "csv.path") csv_path = value;
    else if (key == "csv.schema") csv_schema_preset = value;
    else if (key == "csv.target") schema.target_column = value;
    else if (key == "csv.sensitive") schema.sensitive_column = value;
    else if (key == "csv.features") {
        schema.features.clear();
        // name:cat | name:num | name:num@cutoff
        for (const auto& tok : split_list(value, ',')) {
            const auto colon = tok.find(':');
            if (colon == std::string::npos)
                throw ConfigError("config: feature spec needs name:type, got " + tok);
            const std::string name = tok.substr(0, colon);
            std::string type = tok.substr(colon + 1);
            const auto at = type.find('@');
            if (type == "cat") schema.features.push_back(ColumnSpec::categorical(name));
            else if (type == "num") schema.features.push_back(ColumnSpec::numeric(name));
            else if (at != std::string::npos && type.substr(0, at) == "num")
                schema.features.push_back(
                    ColumnSpec::numeric_cutoff(name, std::stod(type.substr(at + 1))));
            else throw ConfigError("config: bad feature type in " + tok);
        }
    }
    else if (key == "synth.n") synth.n = static_cast<std::size_t>(num());
    else if (key == "synth.rho") synth.rho = num();
    else if (key == "synth.shift") synth.shift = num();
    else if (key == "synth.label_noise") synth.label_noise = num();
    else if (key == "toy.n") toy.n = static_cast<std::size_t>(num());
    else if (key == "toy.scales") toy.scales = static_cast<std::size_t>(num());
    else if (key == "toy.scale_width") toy.scale_width = static_cast<std::size_t>(num());
    else if (key == "toy.side") toy.side = static_cast<std::size_t>(num());
    else if (key == "toy.crosstalk") toy.crosstalk = num();
    else if (key == "partition.train") partition.train_frac = num();
    else if (key == "partition.val") partition.val_frac = num();
    else if (key == "partition.test") partition.test_frac = num();
    else if (key == "partition.exclude_y") partition.excluded_y = std::stoi(value);
    else if (key == "partition.exclude_s") partition.excluded_s = std::stoi(value);
    else if (key == "partition.quota") partition.test_quota = std::stoul(value);
    else if (key == "method") method = parse_method(value);
    else if (key == "adv.beta") { adv.beta = num(); beta_set = true; }
    else if (key == "adv.tap") {
        if (value == "logits") adv.tap = TapPoint::Logits;
        else if (value == "pre_logits") adv.tap = TapPoint::PreLogits;
        else throw ConfigError("config: adv.tap must be logits|pre_logits");
        tap_set = true;
    }
    else if (key == "adv.sees_label") adv.adversary_sees_label = flag();
    else if (key == "adv.noise_sigma") adv.noise_sigma = num();
    else if (key == "adv.pretrain_epochs") adv.adversary_pretrain_epochs = std::stoi(value);
    else if (key == "adv.max_epochs") adv.max_epochs = std::stoi(value);
    else if (key == "adv.patience") adv.early_stop_patience = std::stoi(value);
    else if (key == "adv.batch") adv.batch_size = std::stoul(value);
    else if (key == "adv.lr") adv.adversary.optimizer.learning_rate = num();
    else if (key == "train.lr") adv.predictor.optimizer.learning_rate = num();
    else if (key == "train.optimizer") {
        const double lr = adv.predictor.optimizer.learning_rate;
        if (value == "adam") adv.predictor.optimizer = OptimizerState::adam(lr);
        else if (value == "adamw") adv.predictor.optimizer = OptimizerState::adamw(lr);
        else if (value == "sgd") adv.predictor.optimizer = OptimizerState::sgd_nesterov(lr);
        else throw ConfigError("config: train.optimizer must be adam|adamw|sgd");
    }
    else if (key == "train.plateau") adv.predictor.plateau_scheduler = flag();
    else if (key == "arch.hidden") f_arch.hidden = parse_widths(value);
    else if (key == "arch.embed_dim") f_arch.embed_dim = std::stoi(value);
    else if (key == "adv_arch.hidden") a_arch.hidden = parse_widths(value);
    else if (key == "augment.gamma") augment.gamma = num();
    else if (key == "augment.steps") augment.steps = std::stoi(value);
    else if (key == "augment.confidence") augment.desired_confidence = num();
    else if (key == "augment.rows") ia_rows = std::stoul(value);
    else if (key == "augment.mask_y") augment.mask_y = parse_ints(value);
    else if (key == "augment.mask_s") augment.mask_s = parse_ints(value);
    else if (key == "alphas") {
        alphas.clear();
        for (const auto& tok : split_list(value, ',')) alphas.push_back(std::stod(tok));
    }
    else if (key == "seed") seed = std::stoull(value);
    else if (key == "out") out_dir = value;
    else throw ConfigError("config: unknown key '" + key + "'");
}

void ExperimentConfig::validate() const {
    if (source == DataSource::Csv && csv_path.empty())
        throw ConfigError("config: source=csv requires csv.path");
    if (source == DataSource::Csv && csv_schema_preset.empty() &&
        (schema.features.empty() || schema.target_column.empty() ||
         schema.sensitive_column.empty()))
        throw ConfigError("config: source=csv requires csv.schema preset or explicit columns");
    if (uses_augmentation(method)) {
        if (source != DataSource::ToyImage)
            throw ConfigError("config: IA/TARA methods need source=toy_image (a generator)");
        if (partition.excluded_y < 0 || partition.excluded_s < 0)
            throw ConfigError("config: IA/TARA methods need an excluded (y,s) cell to target");
    }
    if (method == Method::Noise && adv.beta > 0)
        throw ConfigError("config: method=noise cannot set adv.beta");
    if (!is_adversarial(method) && beta_set && adv.beta > 0)
        throw ConfigError("config: adv.beta is only valid for adversarial methods");
    for (double a : alphas)
        if (a < 0 || a > 1) throw ConfigError("config: alphas must lie in [0,1]");
}

std::string ExperimentConfig::run_id() const {
    std::ostringstream key;
    key << static_cast<int>(source) << '|' << csv_path << '|' << csv_schema_preset << '|'
        << synth.n << ',' << synth.rho << ',' << synth.shift << ',' << synth.label_noise << '|'
        << toy.n << ',' << toy.scales << ',' << toy.scale_width << ',' << toy.side << ','
        << toy.crosstalk << '|' << partition.train_frac << ',' << partition.val_frac << ','
        << partition.test_frac << ',' << partition.excluded_y << ',' << partition.excluded_s
        << ',' << partition.test_quota << '|' << method_name(method) << '|' << adv.beta << ','
        << beta_set << ',' << tap_point_name(adv.tap) << ',' << adv.adversary_sees_label << ','
        << adv.freeze_alternation << ',' << adv.noise_sigma << ','
        << adv.adversary_pretrain_epochs << ',' << adv.max_epochs << ','
        << adv.early_stop_patience << ',' << adv.batch_size << ','
        << adv.predictor.optimizer.learning_rate << ','
        << adv.adversary.optimizer.learning_rate << '|' << augment.gamma << ','
        << augment.steps << ',' << augment.desired_confidence << ',' << ia_rows << '|' << seed;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%08llx",
                  static_cast<unsigned long long>(fnv1a(key.str()) & 0xffffffffULL));
    return std::string(method_name(method)) + "-s" + std::to_string(seed) + "-" + buf;
}

namespace {

struct PreparedData {
    LabeledDataset all;
    PartitionResult parts;
    std::optional<ToyGenerator> generator;
};

PreparedData prepare_data(const ExperimentConfig& cfg) {
    PreparedData prep;
    switch (cfg.source) {
        case DataSource::Csv: {
            DatasetSchema schema = cfg.schema;
            if (cfg.csv_schema_preset == "osmi_gender") schema = osmi_schema("gender");
            else if (cfg.csv_schema_preset == "osmi_age") schema = osmi_schema("age");
            else if (!cfg.csv_schema_preset.empty())
                throw ConfigError("config: unknown csv.schema preset '" + cfg.csv_schema_preset +
                                  "'");
            prep.all = ingest_csv(cfg.csv_path, schema);
            break;
        }
        case DataSource::SynthTabular: {
            SynthSpec spec = cfg.synth;
            spec.seed = cfg.seed;
            prep.all = synth_tabular(spec);
            break;
        }
        case DataSource::ToyImage: {
            prep.generator = ToyGenerator::make(cfg.toy.scales, cfg.toy.scale_width, cfg.toy.side,
                                                cfg.seed, cfg.toy.crosstalk);
            const auto pairs = sample_pairs(*prep.generator, cfg.toy.n, cfg.seed ^ 0x70b5);
            LabeledDataset data;
            for (std::size_t c = 0; c < prep.generator->observation_dim(); ++c)
                data.schema.features.push_back(ColumnSpec::numeric("px" + std::to_string(c)));
            data.schema.target_column = "y";
            data.schema.sensitive_column = "s";
            data.feature_encodings.resize(data.schema.features.size());
            data.provenance = "toy_image";
            for (const auto& p : pairs) {
                data.x.push_back(p.observation);
                data.y.push_back(prep.generator->true_y(p.latent));
                data.s.push_back(prep.generator->true_s(p.latent));
                data.synthetic.push_back(false);
            }
            prep.all = std::move(data);
            break;
        }
    }
    PartitionSpec pspec = cfg.partition;
    pspec.seed = cfg.seed;
    prep.parts = partition(prep.all, pspec);
    return prep;
}

ArchSpec resolved_f_arch(const ExperimentConfig& cfg, const LabeledDataset& data) {
    ArchSpec arch = cfg.f_arch;
    const auto cats = data.categories_per_feature();
    const bool any_categorical = std::any_of(cats.begin(), cats.end(), [](int c) { return c > 0; });
    if (any_categorical) arch.embedding_categories = cats;
    if (arch.hidden.empty())
        arch.hidden = (cfg.source == DataSource::ToyImage) ? std::vector<std::size_t>{64}
                                                           : std::vector<std::size_t>{16};
    return arch;
}

ArchSpec resolved_a_arch(const ExperimentConfig& cfg) {
    ArchSpec arch = cfg.a_arch;
    if (arch.hidden.empty())
        arch.hidden = (cfg.source == DataSource::ToyImage) ? std::vector<std::size_t>{64, 64}
                                                           : std::vector<std::size_t>{64};
    return arch;
}

AdvConfig method_adv_config(const ExperimentConfig& cfg, Method method, double beta) {
    AdvConfig adv = cfg.adv;
    adv.seed = cfg.seed;
    if (!cfg.tap_set && cfg.source == DataSource::ToyImage) adv.tap = TapPoint::PreLogits;
    switch (method) {
        case Method::Baseline:
        case Method::IA:
        case Method::BestThreshold:
            adv.beta = 0;
            adv.noise_sigma = 0;
            break;
        case Method::Noise:
            adv.beta = 0;
            if (adv.noise_sigma <= 0) adv.noise_sigma = 0.5;
            break;
        case Method::AD:
            adv.beta = beta;
            adv.adversary_sees_label = true;
            adv.freeze_alternation = false;
            adv.noise_sigma = 0;
            break;
        case Method::ADDP:
            adv.beta = beta;
            adv.adversary_sees_label = false;
            adv.freeze_alternation = false;
            adv.noise_sigma = 0;
            break;
        case Method::Freeze:
            adv.beta = beta;
            adv.adversary_sees_label = false;  // the paper's freeze variant is ADDP-based
            adv.freeze_alternation = true;
            adv.noise_sigma = 0;
            break;
        case Method::TARA:
            adv.beta = beta;
            adv.adversary_sees_label = true;
            adv.noise_sigma = 0;
            adv.filter_synthetic_from_adversary = false;
            adv.filter_synthetic_from_validation = false;
            break;
        case Method::TARAF:
            adv.beta = beta;
            adv.adversary_sees_label = true;
            adv.noise_sigma = 0;
            adv.filter_synthetic_from_adversary = true;
            adv.filter_synthetic_from_validation = true;
            break;
    }
    return adv;
}

double overall_accuracy(const PredictionDump& dump) {
    std::size_t hits = 0;
    for (const auto& r : dump.rows) hits += (r.pred == r.label);
    return static_cast<double>(hits) / static_cast<double>(dump.rows.size());
}

struct TrainedCandidate {
    TrainedPair pair;
    std::string beta_note;
    std::optional<SyntheticBatch> synthetic;
    std::optional<GroupThresholds> thresholds;
    PredictionDump test_dump;
    PredictionDump val_dump;
};

SyntheticBatch make_synthetic(const ExperimentConfig& cfg, const ToyGenerator& gen,
                              const LabeledDataset& train) {
    const Tensor2 obs = train.features_tensor();
    const DenseNet c1_y = train_c1(obs, train.y, cfg.seed ^ 0xc11);
    const DenseNet c1_s = train_c1(obs, train.s, cfg.seed ^ 0xc15);
    SynthesisConfig syn = cfg.augment;
    syn.seed = cfg.seed;
    syn.target_y = cfg.partition.excluded_y;
    syn.target_s = cfg.partition.excluded_s;
    if (syn.mask_y.empty()) syn.mask_y = {gen.y_scale()};
    if (syn.mask_s.empty()) syn.mask_s = {gen.s_scale()};
    return synthesize_missing(gen, c1_y, c1_s, syn, cfg.ia_rows);
}

LabeledDataset synthetic_rows_dataset(const LabeledDataset& like, const SyntheticBatch& batch) {
    LabeledDataset rows;
    rows.schema = like.schema;
    rows.feature_encodings = like.feature_encodings;
    rows.target_encoding = like.target_encoding;
    rows.sensitive_encoding = like.sensitive_encoding;
    rows.provenance = "synthesized";
    for (std::size_t r = 0; r < batch.x.rows; ++r) {
        std::vector<double> row(batch.x.cols);
        for (std::size_t c = 0; c < batch.x.cols; ++c) row[c] = batch.x.at(r, c);
        rows.x.push_back(std::move(row));
        rows.y.push_back(batch.y[r]);
        rows.s.push_back(batch.s[r]);
        rows.synthetic.push_back(true);
    }
    return rows;
}

TrainedCandidate train_candidate(const ExperimentConfig& cfg, const PreparedData& prep,
                                 const TrainedPair& baseline) {
    const Method method = cfg.method;
    TrainedCandidate cand;

    LabeledDataset train_set = prep.parts.train;
    if (uses_augmentation(method)) {
        cand.synthetic = make_synthetic(cfg, *prep.generator, prep.parts.train);
        train_set = merge_synthetic(prep.parts.train, synthetic_rows_dataset(prep.parts.train,
                                                                             *cand.synthetic));
    }

    const ArchSpec f_arch = resolved_f_arch(cfg, prep.all);
    const ArchSpec a_arch = resolved_a_arch(cfg);

    if (method == Method::Baseline || method == Method::BestThreshold) {
        cand.pair = baseline;
    } else if (method == Method::Noise || method == Method::IA) {
        const AdvConfig adv = method_adv_config(cfg, method, 0);
        cand.pair = (method == Method::Noise)
                        ? train(train_set, prep.parts.val, f_arch, a_arch, adv)
                        : train_classifier(train_set, prep.parts.val, f_arch, adv);
    } else {
        std::vector<double> betas;
        if (cfg.beta_set && cfg.adv.beta > 0) {
            betas = {cfg.adv.beta};
        } else {
            betas = {0.5, 1.0};  // grid, best overall test accuracy kept
        }
        double best_acc = -1;
        for (double beta : betas) {
            const AdvConfig adv = method_adv_config(cfg, method, beta);
            TrainedPair pair = train(train_set, prep.parts.val, f_arch, a_arch, adv);
            const double acc = overall_accuracy(make_dump(pair, prep.parts.test));
            if (acc > best_acc) {
                best_acc = acc;
                cand.pair = std::move(pair);
                cand.beta_note = "beta=" + std::to_string(beta) +
                                 (betas.size() > 1 ? " (best overall accuracy over grid)" : "");
            }
        }
    }

    cand.test_dump = make_dump(cand.pair, prep.parts.test);
    cand.val_dump = make_dump(cand.pair, prep.parts.val);

    if (method == Method::BestThreshold) {
        // The extra balanced validation set granted only to this method.
        LabeledDataset extra = balanced_subsample(prep.parts.reserve, 0, cfg.seed);
        const PredictionDump extra_dump = make_dump(cand.pair, extra);
        cand.thresholds = fit_group_thresholds(extra_dump);
        cand.test_dump = apply_group_thresholds(*cand.thresholds, cand.test_dump, cfg.seed);
        cand.val_dump = apply_group_thresholds(*cand.thresholds, cand.val_dump, cfg.seed ^ 1);
    }
    return cand;
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write " + path);
    os << content;
}

void emit_plot_data(const std::string& dir, const PredictionDump& dump) {
    std::map<int, std::pair<std::vector<double>, std::vector<int>>> groups;
    for (const auto& r : dump.rows) {
        groups[r.group].first.push_back(r.score);
        groups[r.group].second.push_back(r.label);
    }
    for (const auto& [gid, sv] : groups) {
        std::ostringstream os;
        os << "threshold,fpr,tpr\n";
        char buf[128];
        for (const auto& p : roc_points(sv.first, sv.second)) {
            std::snprintf(buf, sizeof(buf), "%.17g,%.6f,%.6f\n", p.threshold, p.fpr, p.tpr);
            os << buf;
        }
        write_text(dir + "/roc_g" + std::to_string(gid) + ".csv", os.str());
    }
    // Score density per group, 20 equal bins over [0,1].
    std::ostringstream os;
    os << "group,bin_lo,bin_hi,count\n";
    for (const auto& [gid, sv] : groups) {
        std::vector<std::size_t> counts(20, 0);
        for (double s : sv.first) {
            auto b = static_cast<std::size_t>(std::clamp(s, 0.0, 0.999999) * 20);
            counts[b] += 1;
        }
        for (std::size_t b = 0; b < counts.size(); ++b) {
            char buf[96];
            std::snprintf(buf, sizeof(buf), "%d,%.2f,%.2f,%zu\n", gid, b * 0.05, (b + 1) * 0.05,
                          counts[b]);
            os << buf;
        }
    }
    write_text(dir + "/score_density.csv", os.str());
}

nlohmann::json history_json(const TrainedPair& pair) {
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& h : pair.history) {
        hist.push_back({{"epoch", h.epoch},
                        {"train_loss", h.train_loss},
                        {"val_loss", h.val_loss},
                        {"adversary_loss", h.adversary_loss},
                        {"adversary_acc", h.adversary_acc},
                        {"predictor_lr", h.predictor_lr}});
    }
    return hist;
}

Report build_report(const ExperimentConfig& cfg, const PredictionDump& test_dump,
                    const EvalReport* baseline_eval, const TrainedCandidate& cand,
                    std::uint64_t manifest_hash, const std::string& baseline_run_id) {
    EvalOptions opts;
    opts.bootstrap_seed = cfg.seed;
    Report rep;
    rep.eval = evaluate(test_dump, opts);
    if (baseline_eval) {
        for (double alpha : cfg.alphas) {
            rep.eval.cai[alpha] = cai({baseline_eval->overall_acc * 100, baseline_eval->acc_gap * 100},
                                      {rep.eval.overall_acc * 100, rep.eval.acc_gap * 100}, alpha);
            rep.eval.cauci[alpha] = cauci({baseline_eval->overall_auc, baseline_eval->auc_gap},
                                          {rep.eval.overall_auc, rep.eval.auc_gap}, alpha);
        }
    }
    rep.meta.run_id = cfg.run_id();
    rep.meta.method = method_name(cfg.method);
    rep.meta.seed = cfg.seed;
    rep.meta.manifest_hash = manifest_hash;
    rep.meta.extra_information = (cfg.method == Method::BestThreshold);
    rep.meta.baseline_run_id = baseline_run_id;
    rep.meta.beta_note = cand.beta_note;
    return rep;
}

std::string emit_artifacts(const ExperimentConfig& cfg, const PreparedData& prep,
                           const TrainedCandidate& cand, const Report& report) {
    namespace fs = std::filesystem;
    const std::string dir = cfg.out_dir + "/" + report.meta.run_id;
    fs::create_directories(dir);

    write_text(dir + "/report.txt", render_report_text(report));
    write_text(dir + "/report.csv", render_report_csv(report));
    save_dump_csv(cand.test_dump, dir + "/dump_test.csv");
    save_dump_csv(cand.val_dump, dir + "/dump_val.csv");
    write_text(dir + "/manifest.txt", prep.parts.manifest.render());
    save_net(cand.pair.predictor, dir + "/predictor.fknt");
    if (cand.pair.has_adversary) save_net(cand.pair.adversary, dir + "/adversary.fknt");
    if (cand.thresholds) save_thresholds_csv(*cand.thresholds, dir + "/thresholds.csv");
    emit_plot_data(dir, cand.test_dump);

    if (cand.synthetic) {
        std::ostringstream os;
        os << "row,step,confidence\n";
        char buf[96];
        const std::size_t keep = std::min<std::size_t>(cand.synthetic->trajectories.size(), 32);
        for (std::size_t r = 0; r < keep; ++r) {
            const auto& traj = cand.synthetic->trajectories[r];
            for (std::size_t j = 0; j < traj.size(); ++j) {
                std::snprintf(buf, sizeof(buf), "%zu,%zu,%.6f\n", r, j, traj[j]);
                os << buf;
            }
        }
        write_text(dir + "/ascent_trajectories.csv", os.str());
    }

    nlohmann::json side;
    side["run_id"] = report.meta.run_id;
    side["method"] = method_name(cfg.method);
    side["seed"] = cfg.seed;
    side["beta"] = cand.pair.has_adversary ? cfg.adv.beta : 0.0;
    side["beta_note"] = cand.beta_note;
    side["tap"] = tap_point_name(cfg.adv.tap);
    side["history"] = history_json(cand.pair);
    side["best_epoch"] = cand.pair.best_epoch;
    side["manifest_hash"] = report.meta.manifest_hash;
    if (cand.synthetic) {
        side["synthetic_requested"] = cand.synthetic->requested;
        side["synthetic_accepted"] = cand.synthetic->accepted;
        side["synthetic_attempted"] = cand.synthetic->attempted;
        side["adversary_filters_synthetic"] = cfg.method == Method::TARAF;
    }
    if (cand.thresholds) side["threshold_residual"] = cand.thresholds->residual;
    write_text(dir + "/sidecar.json", side.dump(2) + "\n");
    return dir;
}

}  // namespace

RunArtifacts run_experiment(const ExperimentConfig& config) {
    config.validate();
    PreparedData prep = prepare_data(config);

    const ArchSpec f_arch = resolved_f_arch(config, prep.all);
    const AdvConfig baseline_cfg = method_adv_config(config, Method::Baseline, 0);
    TrainedPair baseline =
        train_classifier(prep.parts.train, prep.parts.val, f_arch, baseline_cfg);

    RunArtifacts artifacts;
    const std::uint64_t manifest_hash = prep.parts.manifest.content_hash();

    std::string baseline_run_id;
    if (config.method != Method::Baseline) {
        // Emit the reference baseline under its own run id first.
        ExperimentConfig base_cfg = config;
        base_cfg.method = Method::Baseline;
        TrainedCandidate base_cand;
        base_cand.pair = baseline;
        base_cand.test_dump = make_dump(baseline, prep.parts.test);
        base_cand.val_dump = make_dump(baseline, prep.parts.val);
        Report base_report =
            build_report(base_cfg, base_cand.test_dump, nullptr, base_cand, manifest_hash, "");
        artifacts.baseline_run_dir = emit_artifacts(base_cfg, prep, base_cand, base_report);
        baseline_run_id = base_report.meta.run_id;

        TrainedCandidate cand = train_candidate(config, prep, baseline);
        EvalOptions base_opts;
        base_opts.bootstrap_seed = config.seed;
        EvalReport baseline_eval = evaluate(base_cand.test_dump, base_opts);
        Report report = build_report(config, cand.test_dump, &baseline_eval, cand, manifest_hash,
                                     baseline_run_id);
        artifacts.run_dir = emit_artifacts(config, prep, cand, report);
        artifacts.report = report;
    } else {
        TrainedCandidate cand;
        cand.pair = baseline;
        cand.test_dump = make_dump(baseline, prep.parts.test);
        cand.val_dump = make_dump(baseline, prep.parts.val);
        Report report = build_report(config, cand.test_dump, nullptr, cand, manifest_hash, "");
        artifacts.run_dir = emit_artifacts(config, prep, cand, report);
        artifacts.report = report;
    }
    artifacts.report_csv_path = artifacts.run_dir + "/report.csv";
    artifacts.dump_csv_path = artifacts.run_dir + "/dump_test.csv";
    return artifacts;
}

CompareResult compare_reports(const std::vector<std::string>& report_csv_paths,
                              const std::vector<double>& alphas) {
    if (report_csv_paths.size() < 2)
        throw DomainError("compare: need a baseline report plus at least one candidate");
    std::vector<Report> reports;
    for (const auto& p : report_csv_paths) reports.push_back(parse_report_csv(p));
    for (std::size_t i = 1; i < reports.size(); ++i)
        if (reports[i].meta.manifest_hash != reports[0].meta.manifest_hash)
            throw DataError("compare: report '" + reports[i].meta.run_id +
                            "' was evaluated on a different test manifest (incomparable)");

    const Report& base = reports[0];
    CompareResult res;
    std::ostringstream os;
    os << "conjunctive comparison vs " << base.meta.run_id << "\n";
    os << "metric      ";
    for (std::size_t i = 1; i < reports.size(); ++i) {
        res.methods.push_back(reports[i].meta.method +
                              (reports[i].meta.extra_information ? "*" : ""));
        os << "  " << res.methods.back();
    }
    os << "\n";

    const bool all_have_auc =
        std::all_of(reports.begin(), reports.end(), [](const Report& r) { return r.eval.has_auc; });

    char buf[64];
    for (double alpha : alphas) {
        std::vector<double>& row = res.cai[alpha];
        for (std::size_t i = 1; i < reports.size(); ++i)
            row.push_back(cai({base.eval.overall_acc * 100, base.eval.acc_gap * 100},
                              {reports[i].eval.overall_acc * 100, reports[i].eval.acc_gap * 100},
                              alpha));
        const auto best = std::max_element(row.begin(), row.end());
        std::snprintf(buf, sizeof(buf), "CAI_%.2f   ", alpha);
        os << buf;
        for (std::size_t i = 0; i < row.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "  %8.2f%s", row[i],
                          (row.begin() + i == best) ? "!" : " ");
            os << buf;
        }
        os << "\n";
    }
    if (all_have_auc) {
        for (double alpha : alphas) {
            std::vector<double>& row = res.cauci[alpha];
            for (std::size_t i = 1; i < reports.size(); ++i)
                row.push_back(cauci({base.eval.overall_auc, base.eval.auc_gap},
                                    {reports[i].eval.overall_auc, reports[i].eval.auc_gap},
                                    alpha));
            const auto best = std::max_element(row.begin(), row.end());
            std::snprintf(buf, sizeof(buf), "CAUCI_%.2f ", alpha);
            os << buf;
            for (std::size_t i = 0; i < row.size(); ++i) {
                std::snprintf(buf, sizeof(buf), "  %8.4f%s", row[i],
                              (row.begin() + i == best) ? "!" : " ");
                os << buf;
            }
            os << "\n";
        }
    } else {
        res.notes.push_back("CAUCI rows omitted: at least one report lacks AUC fields");
        os << "(CAUCI rows omitted: missing AUC fields)\n";
    }
    res.rendered = os.str();
    return res;
}

}  // namespace fairkit
