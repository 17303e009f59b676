// include/xmodal/experiment.hpp
#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "xmodal/dataset.hpp"
#include "xmodal/label_prediction.hpp"
#include "xmodal/representation.hpp"
#include "xmodal/retrieval.hpp"

namespace xmodal {

// Thrown by pipeline stages so the CLI can name the failing stage.
struct StageFailure : std::runtime_error {
    std::string stage;
    StageFailure(std::string stage_name, const std::string& message)
        : std::runtime_error(message), stage(std::move(stage_name)) {}
};

enum class RunMode { supervised, semi_paired, semi_unpaired };

inline std::string run_mode_name(RunMode m) {
    switch (m) {
        case RunMode::supervised: return "supervised";
        case RunMode::semi_paired: return "semi_paired";
        case RunMode::semi_unpaired: return "semi_unpaired";
    }
    throw ConfigError("unknown run mode");
}

inline RunMode run_mode_from_name(const std::string& s) {
    if (s == "supervised") return RunMode::supervised;
    if (s == "semi_paired") return RunMode::semi_paired;
    if (s == "semi_unpaired") return RunMode::semi_unpaired;
    throw ConfigError("unknown mode: " + s);
}

inline std::string reduction_name(Reduction r) { return r == Reduction::sum ? "sum" : "mean"; }
inline Reduction reduction_from_name(const std::string& s) {
    if (s == "sum") return Reduction::sum;
    if (s == "mean") return Reduction::mean;
    throw ConfigError("unknown reduction: " + s);
}

// ---------------------------------------------------------------------------
// Experiment configuration with named profiles
// ---------------------------------------------------------------------------

struct SynthConfig {
    std::size_t classes = 10;
    std::size_t d_x = 32;
    std::size_t d_y = 24;
    std::size_t train_per_class = 30;
    std::size_t test_per_class = 20;
    double noise_sigma = 0.15;
    double extra_tag_prob = 0.0;
    LabelMode label_mode = LabelMode::single_label;
};

struct SplitConfig {
    double labeled_fraction = 1.0;
    double nn_fraction = 0.2;
    double val_fraction = 0.1;
    bool stratified = false;
};

struct EvalConfig {
    SimilarityMetric metric = SimilarityMetric::cosine;
    std::size_t cutoff = 50;
};

struct DatasetSourceConfig {
    bool synthetic = true;
    SynthConfig synth;
    std::string train_manifest;
    std::string test_manifest;
};

struct ExperimentConfig {
    std::string profile = "synthetic";
    RunMode mode = RunMode::supervised;
    std::uint64_t seed = 1;
    DatasetSourceConfig dataset;
    SplitConfig split;
    LpConfig lp;
    CrlConfig crl;
    EvalConfig eval;

    void validate() const {
        if (mode == RunMode::supervised && split.labeled_fraction != 1.0)
            throw ConfigError("config: supervised mode requires labeled_fraction = 1");
        lp.validate();
        crl.validate();
    }
};

// The paper-reported per-dataset hyperparameters become selectable profiles;
// `synthetic` is the desk-scale profile the experiment harness defaults to.
inline ExperimentConfig profile_defaults(const std::string& name) {
    ExperimentConfig cfg;
    cfg.profile = name;
    if (name == "synthetic") {
        cfg.lp.hidden_dim = 64;
        cfg.lp.learning_rate = 0.005;
        cfg.lp.batch_size = 32;
        cfg.lp.max_epochs = 120;
        cfg.lp.patience = 10;
        cfg.crl.hidden_dim = 48;
        cfg.crl.learning_rate = 0.0005;
        cfg.crl.batch_size = 64;
        cfg.crl.epochs = 60;
        cfg.crl.pairs_per_batch = 64;
        cfg.crl.alpha1 = 10.0;
        cfg.crl.alpha2 = 1.0;
        cfg.crl.alpha3 = 10.0;
        cfg.crl.alpha4 = 1.0;
        cfg.crl.beta = 1.0;
        return cfg;
    }
    if (name == "wiki") {
        cfg.lp.hidden_dim = 1000;
        cfg.lp.learning_rate = 0.005;
        cfg.crl.hidden_dim = 5000;
        cfg.crl.learning_rate = 0.001;
        cfg.crl.alpha1 = 10.0;
        cfg.crl.alpha2 = 1.0;
        cfg.crl.alpha3 = 10.0;
        cfg.crl.alpha4 = 1.0;
        cfg.crl.beta = 1.0;
        cfg.dataset.synth.label_mode = LabelMode::single_label;
        return cfg;
    }
    if (name == "pascal") {
        cfg.lp.hidden_dim = 1000;
        cfg.lp.learning_rate = 0.05;
        cfg.crl.hidden_dim = 5000;
        cfg.crl.learning_rate = 0.005;
        cfg.crl.alpha1 = 10.0;
        cfg.crl.alpha2 = 1.0;
        cfg.crl.alpha3 = 1.0;
        cfg.crl.alpha4 = 1.0;
        cfg.crl.beta = 1.0;
        cfg.dataset.synth.label_mode = LabelMode::multi_label;
        cfg.dataset.synth.extra_tag_prob = 0.12;
        return cfg;
    }
    if (name == "nuswide") {
        cfg.lp.hidden_dim = 1000;
        cfg.lp.learning_rate = 0.005;
        cfg.crl.hidden_dim = 5000;
        cfg.crl.learning_rate = 0.0001;
        cfg.crl.alpha1 = 10.0;
        cfg.crl.alpha2 = 0.1;
        cfg.crl.alpha3 = 0.1;
        cfg.crl.alpha4 = 0.1;
        cfg.crl.beta = 10.0;
        cfg.dataset.synth.label_mode = LabelMode::multi_label;
        cfg.dataset.synth.extra_tag_prob = 0.12;
        return cfg;
    }
    throw ConfigError("unknown profile: " + name);
}

inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    return nlohmann::json{
        {"profile", cfg.profile},
        {"mode", run_mode_name(cfg.mode)},
        {"seed", cfg.seed},
        {"dataset",
         {{"source", cfg.dataset.synthetic ? "synthetic" : "files"},
          {"synthetic",
           {{"classes", cfg.dataset.synth.classes},
            {"d_x", cfg.dataset.synth.d_x},
            {"d_y", cfg.dataset.synth.d_y},
            {"train_per_class", cfg.dataset.synth.train_per_class},
            {"test_per_class", cfg.dataset.synth.test_per_class},
            {"noise_sigma", cfg.dataset.synth.noise_sigma},
            {"extra_tag_prob", cfg.dataset.synth.extra_tag_prob},
            {"label_mode", label_mode_name(cfg.dataset.synth.label_mode)}}},
          {"train_manifest", cfg.dataset.train_manifest},
          {"test_manifest", cfg.dataset.test_manifest}}},
        {"split",
         {{"labeled_fraction", cfg.split.labeled_fraction},
          {"nn_fraction", cfg.split.nn_fraction},
          {"val_fraction", cfg.split.val_fraction},
          {"stratified", cfg.split.stratified}}},
        {"lp",
         {{"hidden_dim", cfg.lp.hidden_dim},
          {"learning_rate", cfg.lp.learning_rate},
          {"batch_size", cfg.lp.batch_size},
          {"max_epochs", cfg.lp.max_epochs},
          {"patience", cfg.lp.patience},
          {"ml_loss", lp_loss_name(cfg.lp.ml_loss)},
          {"reduction", reduction_name(cfg.lp.reduction)}}},
        {"crl",
         {{"alpha1", cfg.crl.alpha1},
          {"alpha2", cfg.crl.alpha2},
          {"alpha3", cfg.crl.alpha3},
          {"alpha4", cfg.crl.alpha4},
          {"beta", cfg.crl.beta},
          {"tau1", cfg.crl.tau1},
          {"tau2", cfg.crl.tau2},
          {"margin", cfg.crl.margin},
          {"learning_rate", cfg.crl.learning_rate},
          {"batch_size", cfg.crl.batch_size},
          {"epochs", cfg.crl.epochs},
          {"pairs_per_batch", cfg.crl.pairs_per_batch},
          {"hidden_dim", cfg.crl.hidden_dim},
          {"reduction", reduction_name(cfg.crl.reduction)}}},
        {"eval", {{"metric", metric_name(cfg.eval.metric)}, {"cutoff", cfg.eval.cutoff}}},
    };
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig cfg = profile_defaults(j.value("profile", std::string("synthetic")));
    if (j.contains("mode")) cfg.mode = run_mode_from_name(j.at("mode").get<std::string>());
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        if (d.contains("source")) cfg.dataset.synthetic = d.at("source").get<std::string>() == "synthetic";
        cfg.dataset.train_manifest = d.value("train_manifest", cfg.dataset.train_manifest);
        cfg.dataset.test_manifest = d.value("test_manifest", cfg.dataset.test_manifest);
        if (d.contains("synthetic")) {
            const auto& s = d.at("synthetic");
            auto& sc = cfg.dataset.synth;
            sc.classes = s.value("classes", sc.classes);
            sc.d_x = s.value("d_x", sc.d_x);
            sc.d_y = s.value("d_y", sc.d_y);
            sc.train_per_class = s.value("train_per_class", sc.train_per_class);
            sc.test_per_class = s.value("test_per_class", sc.test_per_class);
            sc.noise_sigma = s.value("noise_sigma", sc.noise_sigma);
            sc.extra_tag_prob = s.value("extra_tag_prob", sc.extra_tag_prob);
            if (s.contains("label_mode"))
                sc.label_mode = label_mode_from_name(s.at("label_mode").get<std::string>());
        }
    }
    if (j.contains("split")) {
        const auto& s = j.at("split");
        cfg.split.labeled_fraction = s.value("labeled_fraction", cfg.split.labeled_fraction);
        cfg.split.nn_fraction = s.value("nn_fraction", cfg.split.nn_fraction);
        cfg.split.val_fraction = s.value("val_fraction", cfg.split.val_fraction);
        cfg.split.stratified = s.value("stratified", cfg.split.stratified);
    }
    if (j.contains("lp")) {
        const auto& s = j.at("lp");
        cfg.lp.hidden_dim = s.value("hidden_dim", cfg.lp.hidden_dim);
        cfg.lp.learning_rate = s.value("learning_rate", cfg.lp.learning_rate);
        cfg.lp.batch_size = s.value("batch_size", cfg.lp.batch_size);
        cfg.lp.max_epochs = s.value("max_epochs", cfg.lp.max_epochs);
        cfg.lp.patience = s.value("patience", cfg.lp.patience);
        if (s.contains("ml_loss")) cfg.lp.ml_loss = lp_loss_from_name(s.at("ml_loss").get<std::string>());
        if (s.contains("reduction")) cfg.lp.reduction = reduction_from_name(s.at("reduction").get<std::string>());
    }
    if (j.contains("crl")) {
        const auto& s = j.at("crl");
        cfg.crl.alpha1 = s.value("alpha1", cfg.crl.alpha1);
        cfg.crl.alpha2 = s.value("alpha2", cfg.crl.alpha2);
        cfg.crl.alpha3 = s.value("alpha3", cfg.crl.alpha3);
        cfg.crl.alpha4 = s.value("alpha4", cfg.crl.alpha4);
        cfg.crl.beta = s.value("beta", cfg.crl.beta);
        cfg.crl.tau1 = s.value("tau1", cfg.crl.tau1);
        cfg.crl.tau2 = s.value("tau2", cfg.crl.tau2);
        cfg.crl.margin = s.value("margin", cfg.crl.margin);
        cfg.crl.learning_rate = s.value("learning_rate", cfg.crl.learning_rate);
        cfg.crl.batch_size = s.value("batch_size", cfg.crl.batch_size);
        cfg.crl.epochs = s.value("epochs", cfg.crl.epochs);
        cfg.crl.pairs_per_batch = s.value("pairs_per_batch", cfg.crl.pairs_per_batch);
        cfg.crl.hidden_dim = s.value("hidden_dim", cfg.crl.hidden_dim);
        if (s.contains("reduction")) cfg.crl.reduction = reduction_from_name(s.at("reduction").get<std::string>());
    }
    if (j.contains("eval")) {
        const auto& s = j.at("eval");
        if (s.contains("metric")) cfg.eval.metric = metric_from_name(s.at("metric").get<std::string>());
        cfg.eval.cutoff = s.value("cutoff", cfg.eval.cutoff);
    }
    return cfg;
}

inline ExperimentConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw LoadError("config: cannot open: " + path.string());
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw LoadError("config: bad JSON: " + std::string(e.what()));
    }
    return config_from_json(j);
}

// ---------------------------------------------------------------------------
// CSV / report writers (tabular outputs are RFC 4180: CRLF, quoting on demand)
// ---------------------------------------------------------------------------

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline std::string format_double_short(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

inline std::string format_fixed6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

inline void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw LoadError("write_csv: cannot open for write: " + path.string());
    auto emit = [&](const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) os << ",";
            os << csv_field(fields[i]);
        }
        os << "\r\n";
    };
    emit(header);
    for (const auto& row : rows) emit(row);
}

inline nlohmann::json report_to_json(const MapReport& report, const ExperimentConfig& cfg) {
    return nlohmann::json{
        {"format", "xmodal-report"},
        {"version", 1},
        {"seed", cfg.seed},
        {"metric", metric_name(cfg.eval.metric)},
        {"cutoff", cfg.eval.cutoff},
        {"conventions",
         {{"tie_break", "ascending database index"},
          {"zero_relevant_queries", "AP counted as 0, kept in the mean"}}},
        {"directions",
         {{"image_query_text_db",
           {{"map_at_50", report.image_query.map_at_50}, {"map_at_all", report.image_query.map_at_all}}},
          {"text_query_image_db",
           {{"map_at_50", report.text_query.map_at_50}, {"map_at_all", report.text_query.map_at_all}}}}},
        {"avg", {{"map_at_50", report.avg_at_50}, {"map_at_all", report.avg_at_all}}},
        {"config", config_to_json(cfg)},
    };
}

inline std::string report_to_table(const MapReport& r) {
    char buf[256];
    std::string out;
    out += "Method        R=50                        R=all\n";
    out += "              T-Q     I-Q     Avg.        T-Q     I-Q     Avg.\n";
    std::snprintf(buf, sizeof(buf), "ours          %.3f   %.3f   %.3f       %.3f   %.3f   %.3f\n",
                  r.text_query.map_at_50, r.image_query.map_at_50, r.avg_at_50, r.text_query.map_at_all,
                  r.image_query.map_at_all, r.avg_at_all);
    out += buf;
    return out;
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

namespace detail {

template <typename Fn>
auto stage(const std::string& name, Fn&& fn) {
    try {
        return fn();
    } catch (const StageFailure&) {
        throw;
    } catch (const std::exception& e) {
        throw StageFailure(name, e.what());
    }
}

inline AnchorSet gather_anchors(const ModalityDataset& ds, const std::vector<std::size_t>& idx) {
    return AnchorSet{gather_cols(ds.features_x, idx), gather_cols(ds.features_y, idx),
                     gather_cols(ds.labels, idx)};
}

}  // namespace detail

struct PreparedData {
    ModalityDataset train;
    ModalityDataset test;
    DatasetSplit split;
};

inline PreparedData prepare_data(const ExperimentConfig& cfg) {
    PreparedData out;
    detail::stage("dataset", [&] {
        if (cfg.dataset.synthetic) {
            const auto& sc = cfg.dataset.synth;
            SyntheticSpec spec;
            spec.d_x = sc.d_x;
            spec.d_y = sc.d_y;
            spec.d_c = sc.classes;
            spec.samples_per_class = sc.train_per_class + sc.test_per_class;
            spec.noise_sigma = sc.noise_sigma;
            spec.multi_label_extra_tag_prob = sc.extra_tag_prob;
            spec.label_mode = sc.label_mode;
            spec.seed = derive_seed(cfg.seed, 101);
            const ModalityDataset full = generate_synthetic(spec);
            std::vector<std::size_t> train_idx, test_idx;
            for (std::size_t c = 0; c < sc.classes; ++c) {
                const std::size_t base = c * spec.samples_per_class;
                for (std::size_t s = 0; s < sc.train_per_class; ++s) train_idx.push_back(base + s);
                for (std::size_t s = 0; s < sc.test_per_class; ++s)
                    test_idx.push_back(base + sc.train_per_class + s);
            }
            out.train = subset(full, train_idx);
            out.test = subset(full, test_idx);
        } else {
            out.train = load_dataset_manifest(cfg.dataset.train_manifest);
            out.test = load_dataset_manifest(cfg.dataset.test_manifest);
        }
        return 0;
    });
    detail::stage("splits", [&] {
        out.split = make_splits(out.train, cfg.split.labeled_fraction, cfg.split.nn_fraction,
                                cfg.split.val_fraction, cfg.mode == RunMode::semi_unpaired,
                                derive_seed(cfg.seed, 102), cfg.split.stratified);
        return 0;
    });
    return out;
}

struct LpStageResult {
    std::optional<LpNetwork> net;
    std::vector<LpTrainLogRow> log;
    TrainStatus status = TrainStatus::completed;
    // Per-modality unlabeled annotations and predictions. In paired mode the
    // x and y views are the same items and matrices.
    Matrix noisy_x, noisy_y;          // d_c x U
    Matrix pred_x, pred_y;            // d_c x U, soft
    Matrix substitutes_y, substitutes_x;  // unpaired only
    double noisy_accuracy = std::numeric_limits<double>::quiet_NaN();
    double lp_accuracy_value = std::numeric_limits<double>::quiet_NaN();
};

// Noisy-label generation, LP training and label inference for the unlabeled
// portion. The labeled data is always paired; unpaired mode only changes how
// the unlabeled samples are annotated and fed.
inline LpStageResult lp_stage(const ExperimentConfig& cfg, const PreparedData& data) {
    LpStageResult out;
    const ModalityDataset& train = data.train;
    const DatasetSplit& split = data.split;
    const LabelMode mode = train.label_mode;

    const AnchorSet anchors = detail::gather_anchors(train, split.nn);
    const LabeledTrainSet lp_train_pairs{gather_cols(train.features_x, split.train),
                                         gather_cols(train.features_y, split.train),
                                         gather_cols(train.labels, split.train)};

    auto paired_noisy = [&](const std::vector<std::size_t>& idx) {
        Matrix noisy(train.num_classes(), idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) {
            const auto ann = assign_noisy_labels_paired(idx[k], get_col(train.features_x, idx[k]),
                                                        get_col(train.features_y, idx[k]), anchors, mode);
            set_col(noisy, k, ann.noisy_label);
        }
        return noisy;
    };

    LpTrainData lp_train, lp_val;
    detail::stage("noisy_labels", [&] {
        lp_train = LpTrainData{gather_cols(train.features_x, split.train),
                               gather_cols(train.features_y, split.train), paired_noisy(split.train),
                               gather_cols(train.labels, split.train)};
        lp_val = LpTrainData{gather_cols(train.features_x, split.val),
                             gather_cols(train.features_y, split.val), paired_noisy(split.val),
                             gather_cols(train.labels, split.val)};
        return 0;
    });

    detail::stage("train_lp", [&] {
        Rng rng(derive_seed(cfg.seed, 103));
        LpNetwork net(train.dim_x(), train.dim_y(), train.num_classes(), cfg.lp.hidden_dim,
                      lp_mode_for(mode), rng);
        LpTrainResult res = train_lp(std::move(net), lp_train, lp_val, cfg.lp, derive_seed(cfg.seed, 104));
        out.log = std::move(res.log);
        out.status = res.status;
        out.net.emplace(std::move(res.net));
        return 0;
    });
    // On a numeric abort the caller still writes the best checkpoint seen.
    if (out.status == TrainStatus::numeric_abort) return out;

    detail::stage("predict_labels", [&] {
        if (cfg.mode == RunMode::semi_unpaired) {
            const auto annotate = [&](const std::vector<std::size_t>& idx, ModalityTag tag, Matrix& noisy,
                                      Matrix& subs) {
                const Matrix& own = tag == ModalityTag::x ? train.features_x : train.features_y;
                const std::size_t other_dim = tag == ModalityTag::x ? train.dim_y() : train.dim_x();
                noisy = Matrix(train.num_classes(), idx.size());
                subs = Matrix(other_dim, idx.size());
                for (std::size_t k = 0; k < idx.size(); ++k) {
                    const auto a = assign_noisy_labels_unpaired(idx[k], get_col(own, idx[k]), tag, anchors,
                                                                lp_train_pairs, mode);
                    set_col(noisy, k, a.annotation.noisy_label);
                    set_col(subs, k, a.substitute_other);
                }
            };
            annotate(split.unlabeled_x, ModalityTag::x, out.noisy_x, out.substitutes_y);
            annotate(split.unlabeled_y, ModalityTag::y, out.noisy_y, out.substitutes_x);
            if (!split.unlabeled_x.empty())
                out.pred_x = predict_labels(*out.net, gather_cols(train.features_x, split.unlabeled_x),
                                            out.substitutes_y, out.noisy_x, mode);
            if (!split.unlabeled_y.empty())
                out.pred_y = predict_labels(*out.net, out.substitutes_x,
                                            gather_cols(train.features_y, split.unlabeled_y), out.noisy_y,
                                            mode);
        } else {
            out.noisy_x = paired_noisy(split.unlabeled);
            out.noisy_y = out.noisy_x;
            if (!split.unlabeled.empty()) {
                out.pred_x = predict_labels(*out.net, gather_cols(train.features_x, split.unlabeled),
                                            gather_cols(train.features_y, split.unlabeled), out.noisy_x, mode);
                out.pred_y = out.pred_x;
            }
        }
        return 0;
    });

    // When the dataset carries ground truth for the unlabeled samples
    // (synthetic data does), report annotation and prediction quality.
    const bool truths_known = [&] {
        for (std::size_t i : split.unlabeled)
            if (i >= train.labeled_count()) return false;
        return !split.unlabeled.empty();
    }();
    if (truths_known) {
        Matrix truth = gather_cols(train.labels, split.unlabeled_x);
        Matrix noisy = out.noisy_x;
        Matrix pred = out.pred_x;
        if (cfg.mode == RunMode::semi_unpaired) {
            truth = hstack(truth, gather_cols(train.labels, split.unlabeled_y));
            noisy = hstack(noisy, out.noisy_y);
            pred = hstack(pred, out.pred_y);
        }
        if (truth.cols > 0) {
            out.noisy_accuracy = lp_accuracy(noisy, truth, mode);
            out.lp_accuracy_value = lp_accuracy(pred, truth, mode);
        }
    }
    return out;
}

struct TrainOutcome {
    MapReport report;
    bool lp_trained = false;
    double lp_accuracy_unlabeled = std::numeric_limits<double>::quiet_NaN();
    double noisy_accuracy_unlabeled = std::numeric_limits<double>::quiet_NaN();
    TrainStatus crl_status = TrainStatus::completed;
    std::vector<CrlTrainLogRow> crl_log;
};

struct RunOptions {
    bool write_artifacts = true;
    // When false, the unlabeled portion is ignored entirely: the CRL trains
    // on the labeled subset only and the LP stage is skipped (the
    // "labeled-only" arm of the sweeps).
    bool use_unlabeled = true;
};

inline TrainOutcome run_train(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                              const RunOptions& opts = {}) {
    cfg.lp.validate();
    cfg.crl.validate();
    const PreparedData data = prepare_data(cfg);
    const ModalityDataset& train = data.train;
    const DatasetSplit& split = data.split;
    const bool semi = cfg.mode != RunMode::supervised && opts.use_unlabeled && !split.unlabeled.empty();

    if (opts.write_artifacts) {
        detail::stage("write_artifacts", [&] {
            std::filesystem::create_directories(out_dir);
            std::ofstream os(out_dir / "config.json");
            if (!os) throw LoadError("cannot write config.json in " + out_dir.string());
            os << config_to_json(cfg).dump(2) << "\n";
            if (cfg.dataset.synthetic) {
                save_dataset(out_dir / "dataset" / "train", train);
                save_dataset(out_dir / "dataset" / "test", data.test);
            }
            return 0;
        });
    }

    LpStageResult lp;
    if (semi) {
        lp = lp_stage(cfg, data);
        if (opts.write_artifacts) {
            detail::stage("write_artifacts", [&] {
                if (cfg.mode == RunMode::semi_unpaired) {
                    save_matrix(out_dir / "noisy_labels_x.txt", lp.noisy_x);
                    save_matrix(out_dir / "noisy_labels_y.txt", lp.noisy_y);
                    save_matrix(out_dir / "predicted_labels_x.txt", lp.pred_x);
                    save_matrix(out_dir / "predicted_labels_y.txt", lp.pred_y);
                } else {
                    save_matrix(out_dir / "noisy_labels.txt", lp.noisy_x);
                    save_matrix(out_dir / "predicted_labels.txt", lp.pred_x);
                }
                const LpNetwork& net = *lp.net;
                save_stacks_file(out_dir / "lp.ckpt",
                                 {&net.branch_x(), &net.branch_y(), &net.branch_label(), &net.trunk()});
                nlohmann::json sidecar = {{"format", "xmodal-lp"},
                                          {"version", 1},
                                          {"output_mode", lp_mode_name(net.mode())},
                                          {"d_x", net.dim_x()},
                                          {"d_y", net.dim_y()},
                                          {"d_c", net.num_classes()},
                                          {"split_seed", derive_seed(cfg.seed, 102)}};
                std::ofstream ls(out_dir / "lp.json");
                ls << sidecar.dump(2) << "\n";
                std::vector<std::vector<std::string>> rows;
                for (const auto& r : lp.log)
                    rows.push_back({std::to_string(r.epoch), format_double_short(r.train_loss),
                                    format_double_short(r.val_accuracy)});
                write_csv(out_dir / "lp_train_log.csv", {"epoch", "train_loss", "val_accuracy"}, rows);
                return 0;
            });
        }
        if (lp.status == TrainStatus::numeric_abort)
            throw StageFailure("train_lp", "non-finite training loss; last-good checkpoint retained");
    }

    // CRL training data: all labeled samples plus (in semi mode) the
    // unlabeled samples with their LP-predicted soft labels.
    CrlTrainData crl_data;
    crl_data.labeled_x = gather_cols(train.features_x, split.labeled);
    crl_data.labeled_y = gather_cols(train.features_y, split.labeled);
    crl_data.labels = gather_cols(train.labels, split.labeled);
    if (semi) {
        crl_data.unlabeled_x = gather_cols(train.features_x, split.unlabeled_x);
        crl_data.pred_x = lp.pred_x;
        crl_data.unlabeled_y = gather_cols(train.features_y, split.unlabeled_y);
        crl_data.pred_y = lp.pred_y;
    }

    TrainOutcome outcome;
    outcome.lp_trained = semi;
    outcome.lp_accuracy_unlabeled = lp.lp_accuracy_value;
    outcome.noisy_accuracy_unlabeled = lp.noisy_accuracy;

    const PairSets pairs = detail::stage("pair_sets", [&] {
        return build_pair_sets(crl_data.labels, train.label_mode, cfg.crl.tau1, cfg.crl.tau2);
    });

    CrlTrainResult crl = detail::stage("train_crl", [&] {
        Rng rng(derive_seed(cfg.seed, 105));
        CrlConfig crl_cfg = cfg.crl;
        if (!semi) crl_cfg.beta = 0.0;
        CrlModel model(train.dim_x(), train.dim_y(), train.num_classes(), cfg.crl.hidden_dim,
                       train.label_mode, rng);
        return train_crl(std::move(model), crl_data, pairs, crl_cfg, derive_seed(cfg.seed, 106));
    });
    outcome.crl_status = crl.status;
    outcome.crl_log = crl.log;

    if (opts.write_artifacts) {
        detail::stage("write_artifacts", [&] {
            save_crl_model(out_dir, crl.model, config_to_json(cfg));
            std::vector<std::vector<std::string>> rows;
            for (const auto& r : crl.log)
                rows.push_back({std::to_string(r.epoch), format_double_short(r.label_loss),
                                format_double_short(r.cross_loss), format_double_short(r.sim),
                                format_double_short(r.dsim), format_double_short(r.pred_label_loss),
                                format_double_short(r.total)});
            write_csv(out_dir / "crl_train_log.csv",
                      {"epoch", "label_loss", "cross_loss", "sim_loss", "dsim_loss", "pred_label_loss",
                       "total"},
                      rows);
            return 0;
        });
    }
    if (crl.status != TrainStatus::completed)
        throw StageFailure("train_crl", "training diverged: " + crl.diagnostics);

    detail::stage("evaluate", [&] {
        const auto enc_x = crl.model.encode(ModalityTag::x, data.test.features_x);
        const auto enc_y = crl.model.encode(ModalityTag::y, data.test.features_y);
        const RetrievalRun iq =
            build_run(Direction::image_query_text_db, enc_x.rep, enc_y.rep, data.test.labels,
                      data.test.labels, data.test.label_mode, cfg.eval.metric);
        const RetrievalRun tq =
            build_run(Direction::text_query_image_db, enc_y.rep, enc_x.rep, data.test.labels,
                      data.test.labels, data.test.label_mode, cfg.eval.metric);
        outcome.report = map_report(iq, tq, cfg.eval.cutoff);
        return 0;
    });

    if (opts.write_artifacts) {
        detail::stage("write_artifacts", [&] {
            std::ofstream rj(out_dir / "report.json");
            if (!rj) throw LoadError("cannot write report.json in " + out_dir.string());
            rj << report_to_json(outcome.report, cfg).dump(2) << "\n";
            std::ofstream rt(out_dir / "report.txt");
            rt << report_to_table(outcome.report);
            return 0;
        });
    }
    return outcome;
}

// Evaluate saved CRL checkpoints against a test manifest.
inline MapReport run_eval(const std::filesystem::path& model_dir,
                          const std::filesystem::path& test_manifest, const ExperimentConfig& cfg,
                          const std::filesystem::path& out_dir, bool write_artifacts = true) {
    const CrlModel model = detail::stage("load_model", [&] { return load_crl_model(model_dir); });
    const ModalityDataset test =
        detail::stage("dataset", [&] { return load_dataset_manifest(test_manifest); });
    MapReport report;
    detail::stage("evaluate", [&] {
        const auto enc_x = model.encode(ModalityTag::x, test.features_x);
        const auto enc_y = model.encode(ModalityTag::y, test.features_y);
        const RetrievalRun iq = build_run(Direction::image_query_text_db, enc_x.rep, enc_y.rep,
                                          test.labels, test.labels, test.label_mode, cfg.eval.metric);
        const RetrievalRun tq = build_run(Direction::text_query_image_db, enc_y.rep, enc_x.rep,
                                          test.labels, test.labels, test.label_mode, cfg.eval.metric);
        report = map_report(iq, tq, cfg.eval.cutoff);
        return 0;
    });
    if (write_artifacts) {
        detail::stage("write_artifacts", [&] {
            std::filesystem::create_directories(out_dir);
            std::ofstream rj(out_dir / "report.json");
            if (!rj) throw LoadError("cannot write report.json in " + out_dir.string());
            rj << report_to_json(report, cfg).dump(2) << "\n";
            std::ofstream rt(out_dir / "report.txt");
            rt << report_to_table(report);
            return 0;
        });
    }
    return report;
}

// ---------------------------------------------------------------------------
// Experiment harnesses: labeled-fraction sweep, loss ablation, LP loss
// comparison.
// ---------------------------------------------------------------------------

struct SweepCell {
    double fraction = 0.0;
    std::string arm;        // "labeled_only" or "semi"
    MapReport report;
};

inline std::vector<SweepCell> run_sweep(const ExperimentConfig& base,
                                        const std::vector<double>& fractions,
                                        const std::filesystem::path& out_dir, bool write_artifacts = true) {
    if (fractions.empty()) throw ConfigError("sweep: no fractions given");
    std::vector<SweepCell> cells;
    for (std::size_t fi = 0; fi < fractions.size(); ++fi) {
        const double f = fractions[fi];
        if (!(f > 0.0 && f < 1.0)) throw ConfigError("sweep: fractions must lie in (0,1)");
        ExperimentConfig cfg = base;
        if (cfg.mode == RunMode::supervised) cfg.mode = RunMode::semi_paired;
        cfg.split.labeled_fraction = f;
        cfg.seed = derive_seed(base.seed, 900 + fi);  // isolated per fraction, shared across arms
        RunOptions opts;
        opts.write_artifacts = false;
        opts.use_unlabeled = false;
        cells.push_back({f, "labeled_only", run_train(cfg, "", opts).report});
        opts.use_unlabeled = true;
        cells.push_back({f, "semi", run_train(cfg, "", opts).report});
    }
    if (write_artifacts) {
        std::filesystem::create_directories(out_dir);
        std::ofstream cj(out_dir / "config.json");
        cj << config_to_json(base).dump(2) << "\n";
        std::vector<std::vector<std::string>> rows;
        for (const auto& c : cells) {
            const struct {
                const char* name;
                double m50, mall;
            } dirs[] = {
                {"T-Q", c.report.text_query.map_at_50, c.report.text_query.map_at_all},
                {"I-Q", c.report.image_query.map_at_50, c.report.image_query.map_at_all},
                {"Avg", c.report.avg_at_50, c.report.avg_at_all},
            };
            for (const auto& d : dirs)
                rows.push_back({format_double_short(c.fraction), c.arm, d.name, format_fixed6(d.m50),
                                format_fixed6(d.mall)});
        }
        write_csv(out_dir / "sweep.csv",
                  {"labeled_fraction", "arm", "direction", "map_at_50", "map_at_all"}, rows);
    }
    return cells;
}

inline const std::vector<std::string>& ablation_toggles() {
    static const std::vector<std::string> toggles = {"no_sim_dsim", "no_lab", "no_pred_lab", "no_cross",
                                                     "full"};
    return toggles;
}

struct AblationRow {
    std::string toggle;
    MapReport report;
};

inline std::vector<AblationRow> run_ablate(const ExperimentConfig& base,
                                           const std::vector<std::string>& toggles,
                                           const std::filesystem::path& out_dir,
                                           bool write_artifacts = true) {
    std::vector<AblationRow> rows;
    for (const auto& toggle : toggles) {
        ExperimentConfig cfg = base;
        if (toggle == "full") {
            // unchanged
        } else if (toggle == "no_sim_dsim") {
            cfg.crl.alpha3 = 0.0;
            cfg.crl.alpha4 = 0.0;
        } else if (toggle == "no_lab") {
            cfg.crl.alpha1 = 0.0;
        } else if (toggle == "no_pred_lab") {
            cfg.crl.beta = 0.0;
        } else if (toggle == "no_cross") {
            cfg.crl.alpha2 = 0.0;
        } else {
            throw ConfigError("ablate: unknown toggle: " + toggle);
        }
        RunOptions opts;
        opts.write_artifacts = false;
        rows.push_back({toggle, run_train(cfg, "", opts).report});
    }
    if (write_artifacts) {
        std::filesystem::create_directories(out_dir);
        std::ofstream cj(out_dir / "config.json");
        cj << config_to_json(base).dump(2) << "\n";
        std::vector<std::vector<std::string>> csv;
        for (const auto& r : rows)
            csv.push_back({r.toggle, format_fixed6(r.report.text_query.map_at_50),
                           format_fixed6(r.report.image_query.map_at_50), format_fixed6(r.report.avg_at_50),
                           format_fixed6(r.report.text_query.map_at_all),
                           format_fixed6(r.report.image_query.map_at_all),
                           format_fixed6(r.report.avg_at_all)});
        write_csv(out_dir / "ablate.csv",
                  {"toggle", "map50_tq", "map50_iq", "map50_avg", "mapall_tq", "mapall_iq", "mapall_avg"},
                  csv);
    }
    return rows;
}

struct LpCompareRow {
    double fraction = 0.0;
    double l1_error = 0.0;
    double bce_error = 0.0;
    double wbce_error = 0.0;
};

// Average one/zero prediction error of the LP network on the unlabeled data
// under each candidate loss. M-L data only.
inline std::vector<LpCompareRow> run_lp_compare(const ExperimentConfig& base,
                                                const std::vector<double>& fractions,
                                                const std::filesystem::path& out_dir,
                                                bool write_artifacts = true) {
    if (base.dataset.synthetic && base.dataset.synth.label_mode != LabelMode::multi_label)
        throw ValidationError("lp-compare: requires a multi-label dataset");
    std::vector<LpCompareRow> rows;
    for (std::size_t fi = 0; fi < fractions.size(); ++fi) {
        LpCompareRow row;
        row.fraction = fractions[fi];
        for (LpLossKind kind : {LpLossKind::l1, LpLossKind::bce, LpLossKind::wbce}) {
            ExperimentConfig cfg = base;
            if (cfg.mode == RunMode::supervised) cfg.mode = RunMode::semi_paired;
            cfg.split.labeled_fraction = fractions[fi];
            cfg.seed = derive_seed(base.seed, 700 + fi);
            cfg.lp.ml_loss = kind;
            const PreparedData data = prepare_data(cfg);
            if (data.train.label_mode != LabelMode::multi_label)
                throw ValidationError("lp-compare: requires a multi-label dataset");
            const LpStageResult lp = lp_stage(cfg, data);
            const double err = 1.0 - lp.lp_accuracy_value;
            if (kind == LpLossKind::l1)
                row.l1_error = err;
            else if (kind == LpLossKind::bce)
                row.bce_error = err;
            else
                row.wbce_error = err;
        }
        rows.push_back(row);
    }
    if (write_artifacts) {
        std::filesystem::create_directories(out_dir);
        std::ofstream cj(out_dir / "config.json");
        cj << config_to_json(base).dump(2) << "\n";
        std::vector<std::vector<std::string>> csv;
        for (const auto& r : rows)
            csv.push_back({format_double_short(r.fraction), format_fixed6(r.l1_error),
                           format_fixed6(r.bce_error), format_fixed6(r.wbce_error)});
        write_csv(out_dir / "lp_compare.csv", {"labeled_fraction", "l1", "bce", "wbce"}, csv);
    }
    return rows;
}

// Synthetic dataset generation for the `synth` CLI verb.
inline void run_synth(const SyntheticSpec& spec, const std::filesystem::path& out_dir) {
    const ModalityDataset ds = detail::stage("dataset", [&] { return generate_synthetic(spec); });
    detail::stage("write_artifacts", [&] {
        save_dataset(out_dir, ds);
        return 0;
    });
}

}  // namespace xmodal
