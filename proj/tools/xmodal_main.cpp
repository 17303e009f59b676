// tools/xmodal_main.cpp
//
// Command-line front end: dataset synthesis, sequential LP + CRL training,
// retrieval evaluation, and the experiment harnesses (labeled-fraction
// sweeps, loss ablations, LP loss comparison).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "xmodal/experiment.hpp"

namespace {

using namespace xmodal;

struct GlobalArgs {
    std::string config_path;
    std::string out_dir = "out";
    std::string profile = "synthetic";
    std::optional<std::uint64_t> seed;
};

ExperimentConfig resolve_config(const GlobalArgs& g) {
    ExperimentConfig cfg =
        g.config_path.empty() ? profile_defaults(g.profile) : load_config_file(g.config_path);
    if (g.seed) cfg.seed = *g.seed;
    return cfg;
}

std::vector<double> parse_fractions(const std::vector<double>& given) {
    if (!given.empty()) return given;
    std::vector<double> fractions;
    for (int pct = 20; pct <= 90; pct += 10) fractions.push_back(pct / 100.0);
    return fractions;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"xmodal: semi-supervised cross-modal retrieval engine"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalArgs g;
    app.add_option("--config", g.config_path, "experiment config JSON");
    app.add_option("--out", g.out_dir, "output directory");
    app.add_option("--profile", g.profile, "config profile: synthetic|wiki|pascal|nuswide");
    std::uint64_t seed_value = 0;
    auto* seed_opt = app.add_option("--seed", seed_value, "master seed (overrides config)");

    auto* synth = app.add_subcommand("synth", "generate a synthetic two-modality dataset");
    std::size_t classes = 10, per_class = 30, dx = 32, dy = 24;
    double noise_sigma = 0.15, extra_tag_prob = 0.1;
    bool multi_label = false;
    synth->add_option("--classes", classes, "number of categories");
    synth->add_option("--per-class", per_class, "samples per class");
    synth->add_option("--dx", dx, "modality-x feature dimension");
    synth->add_option("--dy", dy, "modality-y feature dimension");
    synth->add_option("--noise-sigma", noise_sigma, "per-feature Gaussian noise");
    synth->add_flag("--multi-label", multi_label, "emit multi-hot labels");
    synth->add_option("--extra-tag-prob", extra_tag_prob, "extra-tag probability (multi-label)");

    auto* train = app.add_subcommand("train", "run the full pipeline and evaluate");
    auto* eval = app.add_subcommand("eval", "evaluate saved checkpoints on a test set");
    std::string model_dir, test_manifest;
    eval->add_option("--model", model_dir, "run directory holding the CRL checkpoints")->required();
    eval->add_option("--test-manifest", test_manifest, "test dataset manifest")->required();

    auto* sweep = app.add_subcommand("sweep", "MAP vs labeled fraction, labeled-only vs semi");
    std::vector<double> sweep_fractions;
    sweep->add_option("--fractions", sweep_fractions, "labeled fractions (default 0.2..0.9)");

    auto* ablate = app.add_subcommand("ablate", "retrain with individual losses disabled");
    std::vector<std::string> toggles;
    ablate->add_option("--toggles", toggles, "subset of: no_sim_dsim no_lab no_pred_lab no_cross full");

    auto* lp_compare = app.add_subcommand("lp-compare", "LP error under l1 / bce / wbce losses");
    std::vector<double> lp_fractions;
    lp_compare->add_option("--fractions", lp_fractions, "labeled fractions (default 0.2..0.9)");

    CLI11_PARSE(app, argc, argv);
    if (seed_opt->count() > 0) g.seed = seed_value;

    try {
        if (synth->parsed()) {
            SyntheticSpec spec;
            spec.d_x = dx;
            spec.d_y = dy;
            spec.d_c = classes;
            spec.samples_per_class = per_class;
            spec.noise_sigma = noise_sigma;
            spec.label_mode = multi_label ? LabelMode::multi_label : LabelMode::single_label;
            spec.multi_label_extra_tag_prob = multi_label ? extra_tag_prob : 0.0;
            spec.seed = g.seed.value_or(1);
            run_synth(spec, g.out_dir);
        } else if (train->parsed()) {
            ExperimentConfig cfg = resolve_config(g);
            cfg.validate();
            run_train(cfg, g.out_dir);
        } else if (eval->parsed()) {
            ExperimentConfig cfg;
            if (!g.config_path.empty()) {
                cfg = load_config_file(g.config_path);
            } else {
                // Reuse the config echoed into the model sidecar.
                std::ifstream is(std::filesystem::path(model_dir) / "crl_model.json");
                if (!is) throw LoadError("eval: missing crl_model.json in " + model_dir);
                nlohmann::json sidecar;
                is >> sidecar;
                cfg = config_from_json(sidecar.at("config"));
            }
            if (g.seed) cfg.seed = *g.seed;
            run_eval(model_dir, test_manifest, cfg, g.out_dir);
        } else if (sweep->parsed()) {
            ExperimentConfig cfg = resolve_config(g);
            run_sweep(cfg, parse_fractions(sweep_fractions), g.out_dir);
        } else if (ablate->parsed()) {
            ExperimentConfig cfg = resolve_config(g);
            run_ablate(cfg, toggles.empty() ? ablation_toggles() : toggles, g.out_dir);
        } else if (lp_compare->parsed()) {
            ExperimentConfig cfg = resolve_config(g);
            run_lp_compare(cfg, parse_fractions(lp_fractions), g.out_dir);
        }
    } catch (const StageFailure& e) {
        std::cerr << "error: stage " << e.stage << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
