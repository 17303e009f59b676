// include/xmodal/representation.hpp
#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "xmodal/checkpoint.hpp"
#include "xmodal/dataset.hpp"
#include "xmodal/label_prediction.hpp"
#include "xmodal/losses.hpp"
#include "xmodal/optimizer.hpp"

namespace xmodal {

// ---------------------------------------------------------------------------
// Pair construction over labeled cross-modal samples
// ---------------------------------------------------------------------------

struct PairSets {
    std::vector<std::pair<std::size_t, std::size_t>> similar;     // S_1: (x index, y index)
    std::vector<std::pair<std::size_t, std::size_t>> dissimilar;  // S_2
};

// S-L: same class vs different class. M-L: normalized inner product of the
// label vectors against tau1/tau2; pairs between the thresholds are dropped.
inline PairSets build_pair_sets(const Matrix& labels, LabelMode mode, double tau1, double tau2) {
    if (!(tau1 > tau2)) throw ConfigError("build_pair_sets: requires tau1 > tau2");
    const std::size_t n = labels.cols;
    std::vector<double> norms(n);
    for (std::size_t j = 0; j < n; ++j) {
        norms[j] = std::sqrt(dot_cols(labels, j, labels, j));
        if (mode == LabelMode::multi_label && norms[j] == 0.0)
            throw ValidationError("build_pair_sets: zero label vector at column " + std::to_string(j));
    }
    PairSets sets;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (mode == LabelMode::single_label) {
                bool same = true;
                for (std::size_t r = 0; r < labels.rows && same; ++r)
                    if (labels(r, i) != labels(r, j)) same = false;
                (same ? sets.similar : sets.dissimilar).push_back({i, j});
            } else {
                const double s = dot_cols(labels, i, labels, j) / (norms[i] * norms[j]);
                if (s >= tau1)
                    sets.similar.push_back({i, j});
                else if (s <= tau2)
                    sets.dissimilar.push_back({i, j});
            }
        }
    }
    return sets;
}

// ---------------------------------------------------------------------------
// Model: one encoder/decoder stack per modality, bottleneck of size d_c.
// ---------------------------------------------------------------------------

inline Activation crl_final_activation(LabelMode mode) {
    return mode == LabelMode::multi_label ? Activation::sigmoid : Activation::softmax;
}

class CrlModel {
  public:
    CrlModel(std::size_t d_x, std::size_t d_y, std::size_t d_c, std::size_t hidden_dim, LabelMode mode,
             Rng& rng)
        : mode_(mode), d_x_(d_x), d_y_(d_y), d_c_(d_c) {
        build_encoder(encoder_x_, d_x, hidden_dim, d_c);
        build_encoder(encoder_y_, d_y, hidden_dim, d_c);
        build_decoder(decoder_x_, d_c, hidden_dim, d_x);
        build_decoder(decoder_y_, d_c, hidden_dim, d_y);
        encoder_x_.init_uniform(rng);
        encoder_y_.init_uniform(rng);
        decoder_x_.init_uniform(rng);
        decoder_y_.init_uniform(rng);
    }

    CrlModel(LayerStack enc_x, LayerStack enc_y, LayerStack dec_x, LayerStack dec_y, LabelMode mode)
        : encoder_x_(std::move(enc_x)),
          encoder_y_(std::move(enc_y)),
          decoder_x_(std::move(dec_x)),
          decoder_y_(std::move(dec_y)),
          mode_(mode) {
        d_x_ = encoder_x_.input_dim();
        d_y_ = encoder_y_.input_dim();
        d_c_ = encoder_x_.output_dim();
        if (encoder_y_.output_dim() != d_c_ || decoder_x_.input_dim() != d_c_ ||
            decoder_y_.input_dim() != d_c_ || decoder_x_.output_dim() != d_x_ ||
            decoder_y_.output_dim() != d_y_)
            throw ConfigError("CrlModel: stack dimensions do not agree");
    }

    LabelMode mode() const { return mode_; }
    std::size_t dim_x() const { return d_x_; }
    std::size_t dim_y() const { return d_y_; }
    std::size_t num_classes() const { return d_c_; }

    LayerStack& encoder(ModalityTag t) { return t == ModalityTag::x ? encoder_x_ : encoder_y_; }
    LayerStack& decoder(ModalityTag t) { return t == ModalityTag::x ? decoder_x_ : decoder_y_; }
    const LayerStack& encoder(ModalityTag t) const { return t == ModalityTag::x ? encoder_x_ : encoder_y_; }
    const LayerStack& decoder(ModalityTag t) const { return t == ModalityTag::x ? decoder_x_ : decoder_y_; }

    struct Encoded {
        Matrix pre;  // encoder output before the final activation (pair losses, decoders)
        Matrix rep;  // activated common representation (label loss, retrieval)
    };

    // Read-only projection into the common space.
    Encoded encode(ModalityTag t, const Matrix& features) const {
        const LayerStack& enc = t == ModalityTag::x ? encoder_x_ : encoder_y_;
        Encoded out;
        out.pre = enc.infer(features);
        out.rep = out.pre;
        apply_activation(out.rep, crl_final_activation(mode_));
        return out;
    }

    void collect_params(std::vector<double*>& out) {
        encoder_x_.collect_params(out);
        encoder_y_.collect_params(out);
        decoder_x_.collect_params(out);
        decoder_y_.collect_params(out);
    }

  private:
    static void build_encoder(LayerStack& s, std::size_t in, std::size_t hidden, std::size_t bottleneck) {
        s.add_layer(FcLayer(hidden, in, Activation::sigmoid));
        s.add_layer(FcLayer(hidden, hidden, Activation::sigmoid));
        s.add_layer(FcLayer(bottleneck, hidden, Activation::none));
    }
    static void build_decoder(LayerStack& s, std::size_t bottleneck, std::size_t hidden, std::size_t out) {
        s.add_layer(FcLayer(hidden, bottleneck, Activation::sigmoid));
        s.add_layer(FcLayer(hidden, hidden, Activation::sigmoid));
        s.add_layer(FcLayer(out, hidden, Activation::none));
    }

    LayerStack encoder_x_, encoder_y_, decoder_x_, decoder_y_;
    LabelMode mode_;
    std::size_t d_x_ = 0, d_y_ = 0, d_c_ = 0;
};

// ---------------------------------------------------------------------------
// Composite loss
// ---------------------------------------------------------------------------

struct CrlConfig {
    double alpha1 = 10.0;  // label loss
    double alpha2 = 1.0;   // cross reconstruction
    double alpha3 = 10.0;  // similarity
    double alpha4 = 1.0;   // dissimilarity
    double beta = 1.0;     // label loss on LP-predicted labels
    double tau1 = 0.5;
    double tau2 = 0.1;
    double margin = 1.0;
    double learning_rate = 0.001;
    std::size_t batch_size = 64;
    std::size_t epochs = 100;
    std::size_t pairs_per_batch = 128;
    std::size_t hidden_dim = 5000;
    Reduction reduction = Reduction::sum;
    double divergence_threshold = 1e6;
    double weight_cap = 20.0;

    void validate() const {
        if (!(tau1 > tau2)) throw ConfigError("CrlConfig: requires tau1 > tau2");
        if (!(margin > 0.0)) throw ConfigError("CrlConfig: margin must be > 0");
        if (alpha1 < 0 || alpha2 < 0 || alpha3 < 0 || alpha4 < 0 || beta < 0)
            throw ConfigError("CrlConfig: loss weights must be >= 0");
        if (!(learning_rate > 0.0)) throw ConfigError("CrlConfig: learning_rate must be > 0");
        if (batch_size == 0 || epochs == 0 || hidden_dim == 0)
            throw ConfigError("CrlConfig: zero-sized field");
    }
};

// Labeled columns are aligned pairs across modalities; unlabeled columns per
// modality carry LP-predicted soft labels.
struct CrlTrainData {
    Matrix labeled_x;  // d_x x N_l
    Matrix labeled_y;  // d_y x N_l
    Matrix labels;     // d_c x N_l
    Matrix unlabeled_x;  // d_x x U_x (may be empty)
    Matrix pred_x;       // d_c x U_x
    Matrix unlabeled_y;  // d_y x U_y
    Matrix pred_y;       // d_c x U_y

    void validate() const {
        if (labeled_x.cols == 0) throw ConfigError("CrlTrainData: no labeled samples");
        if (labeled_y.cols != labeled_x.cols || labels.cols != labeled_x.cols)
            throw ConfigError("CrlTrainData: labeled column counts differ");
        if (unlabeled_x.cols != pred_x.cols || unlabeled_y.cols != pred_y.cols)
            throw ConfigError("CrlTrainData: unlabeled/prediction column counts differ");
    }
};

struct CrlStepBatch {
    std::vector<std::size_t> labeled;                                // into labeled columns
    std::vector<std::pair<std::size_t, std::size_t>> sim_pairs;      // into labeled columns
    std::vector<std::pair<std::size_t, std::size_t>> dsim_pairs;
    std::vector<std::size_t> unlabeled_x;                            // into unlabeled_x columns
    std::vector<std::size_t> unlabeled_y;
};

struct CrlLossBreakdown {
    double label_loss = 0.0;       // L^lab
    double cross_loss = 0.0;       // L^cross
    double sim = 0.0;              // L^sim
    double dsim = 0.0;             // L^dsim
    double pred_label_loss = 0.0;  // predicted-label loss on the unlabeled batch
    double total = 0.0;
};

struct CrlGrads {
    StackGrads encoder_x, encoder_y, decoder_x, decoder_y;
};

namespace detail {

// Label-loss value/grad for one rep column against a (possibly soft) target.
inline LossValue crl_label_loss(std::span<const double> target, std::span<const double> rep,
                                LabelMode mode, const PositiveWeights& weights, bool soft_target) {
    if (mode == LabelMode::multi_label) return wbce_loss(target, rep, weights);
    if (soft_target) return ce_core(target, rep);
    return ce_loss(target, rep);
}

struct ModalitySide {
    Matrix inputs;    // concatenated forward columns
    Matrix pre;       // encoder pre-activation output
    Matrix rep;       // activated representation
    Matrix grad_rep;  // accumulated, loss-weighted
    Matrix grad_pre;  // direct pre-activation contributions (sim/dsim)
    std::size_t n_labeled = 0;
    std::size_t n_sim = 0;
    std::size_t n_dsim = 0;
    std::size_t n_unlabeled = 0;
};

}  // namespace detail

// Total CRL loss over one step batch, with per-component values. When
// `grads` is non-null the parameter gradients of the weighted total are
// written there. Pure in (parameters, data, batch) — repeated calls give
// identical results, which the finite-difference tests rely on.
inline CrlLossBreakdown crl_batch_loss(CrlModel& model, const CrlTrainData& data,
                                       const CrlStepBatch& batch, const CrlConfig& config,
                                       const PositiveWeights& weights, CrlGrads* grads = nullptr) {
    config.validate();
    data.validate();
    if (batch.labeled.empty()) throw ConfigError("crl_batch_loss: labeled batch is empty");
    if (!batch.unlabeled_x.empty() && data.unlabeled_x.cols == 0)
        throw ConfigError("crl_batch_loss: unlabeled batch without unlabeled data");

    const LabelMode mode = model.mode();
    const Activation final_act = crl_final_activation(mode);
    const std::size_t nb = batch.labeled.size();
    const std::size_t ns = batch.sim_pairs.size();
    const std::size_t nd = batch.dsim_pairs.size();

    // Assemble forward columns per modality: labeled batch, pair members,
    // unlabeled batch. Duplicated columns are fine; their gradients add up
    // through the shared parameters.
    auto assemble = [&](ModalityTag tag) {
        detail::ModalitySide side;
        side.n_labeled = nb;
        side.n_sim = ns;
        side.n_dsim = nd;
        const Matrix& labeled = tag == ModalityTag::x ? data.labeled_x : data.labeled_y;
        const Matrix& unlabeled = tag == ModalityTag::x ? data.unlabeled_x : data.unlabeled_y;
        const auto& unlabeled_idx = tag == ModalityTag::x ? batch.unlabeled_x : batch.unlabeled_y;
        side.n_unlabeled = unlabeled_idx.size();
        std::vector<std::size_t> cols;
        cols.reserve(nb + ns + nd);
        cols.insert(cols.end(), batch.labeled.begin(), batch.labeled.end());
        for (const auto& p : batch.sim_pairs) cols.push_back(tag == ModalityTag::x ? p.first : p.second);
        for (const auto& p : batch.dsim_pairs) cols.push_back(tag == ModalityTag::x ? p.first : p.second);
        side.inputs = gather_cols(labeled, cols);
        if (!unlabeled_idx.empty()) side.inputs = hstack(side.inputs, gather_cols(unlabeled, unlabeled_idx));
        side.pre = model.encoder(tag).forward(side.inputs);
        side.rep = side.pre;
        apply_activation(side.rep, final_act);
        side.grad_rep = Matrix(side.rep.rows, side.rep.cols);
        side.grad_pre = Matrix(side.pre.rows, side.pre.cols);
        return side;
    };
    detail::ModalitySide side_x = assemble(ModalityTag::x);
    detail::ModalitySide side_y = assemble(ModalityTag::y);

    CrlLossBreakdown out;
    const bool mean = config.reduction == Reduction::mean;
    const double lab_scale = mean ? 1.0 / static_cast<double>(nb) : 1.0;
    const double sim_scale = ns > 0 && mean ? 1.0 / static_cast<double>(ns) : 1.0;
    const double dsim_scale = nd > 0 && mean ? 1.0 / static_cast<double>(nd) : 1.0;
    const std::size_t n_unlab_terms = side_x.n_unlabeled + side_y.n_unlabeled;
    const double pred_scale = n_unlab_terms > 0 && mean ? 1.0 / static_cast<double>(n_unlab_terms) : 1.0;

    // L^lab over both modalities.
    for (std::size_t j = 0; j < nb; ++j) {
        const auto target = get_col(data.labels, batch.labeled[j]);
        for (detail::ModalitySide* side : {&side_x, &side_y}) {
            const LossValue lv = detail::crl_label_loss(target, get_col(side->rep, j), mode, weights, false);
            out.label_loss += lab_scale * lv.value;
            if (grads) add_to_col(side->grad_rep, j, lv.grad, config.alpha1 * lab_scale);
        }
    }

    // Predicted-label loss over the unlabeled batch.
    auto pred_label_term = [&](detail::ModalitySide& side, const Matrix& preds,
                               const std::vector<std::size_t>& idx) {
        const std::size_t offset = nb + ns + nd;
        for (std::size_t j = 0; j < idx.size(); ++j) {
            const auto target = get_col(preds, idx[j]);
            const LossValue lv =
                detail::crl_label_loss(target, get_col(side.rep, offset + j), mode, weights, true);
            out.pred_label_loss += pred_scale * lv.value;
            if (grads) add_to_col(side.grad_rep, offset + j, lv.grad, config.beta * pred_scale);
        }
    };
    pred_label_term(side_x, data.pred_x, batch.unlabeled_x);
    pred_label_term(side_y, data.pred_y, batch.unlabeled_y);

    // Cross reconstruction: decode each modality from the other encoder's
    // pre-activation output of the aligned labeled pairs (the activation is
    // written into the label loss, not into the encoder map).
    auto cross_term = [&](detail::ModalitySide& from, ModalityTag to_tag, const Matrix& originals) {
        const Matrix pre_batch = take_cols(from.pre, 0, nb);
        const Matrix original = gather_cols(originals, batch.labeled);
        const Matrix& recon = model.decoder(to_tag).forward(pre_batch);
        MatrixLossValue lv = l1_cross_recon_loss(original, recon);
        out.cross_loss += lab_scale * lv.value;
        if (grads) {
            for (double& v : lv.grad.data) v *= config.alpha2 * lab_scale;
            StackGrads& dec_grads = to_tag == ModalityTag::x ? grads->decoder_x : grads->decoder_y;
            const Matrix grad_pre_batch = model.decoder(to_tag).backward(lv.grad, dec_grads);
            for (std::size_t j = 0; j < nb; ++j)
                add_to_col(from.grad_pre, j, get_col(grad_pre_batch, j), 1.0);
        }
    };
    cross_term(side_x, ModalityTag::y, data.labeled_y);  // Q_y(P_x(x)) vs y
    cross_term(side_y, ModalityTag::x, data.labeled_x);  // Q_x(P_y(y)) vs x

    // Similarity / dissimilarity on the pre-activation encoder outputs.
    for (std::size_t k = 0; k < ns; ++k) {
        const std::size_t cx = nb + k;
        const std::size_t cy = nb + k;
        const PairLossValue lv = sim_loss(get_col(side_x.pre, cx), get_col(side_y.pre, cy));
        out.sim += sim_scale * lv.value;
        if (grads) {
            add_to_col(side_x.grad_pre, cx, lv.grad_x, config.alpha3 * sim_scale);
            add_to_col(side_y.grad_pre, cy, lv.grad_y, config.alpha3 * sim_scale);
        }
    }
    for (std::size_t k = 0; k < nd; ++k) {
        const std::size_t cx = nb + ns + k;
        const std::size_t cy = nb + ns + k;
        const PairLossValue lv =
            dsim_loss(get_col(side_x.pre, cx), get_col(side_y.pre, cy), config.margin);
        out.dsim += dsim_scale * lv.value;
        if (grads) {
            add_to_col(side_x.grad_pre, cx, lv.grad_x, config.alpha4 * dsim_scale);
            add_to_col(side_y.grad_pre, cy, lv.grad_y, config.alpha4 * dsim_scale);
        }
    }

    out.total = config.alpha1 * out.label_loss + config.alpha2 * out.cross_loss +
                config.alpha3 * out.sim + config.alpha4 * out.dsim + config.beta * out.pred_label_loss;

    if (grads) {
        auto backprop = [&](detail::ModalitySide& side, ModalityTag tag, StackGrads& enc_grads) {
            Matrix grad_pre_total = activation_backward(side.rep, side.grad_rep, final_act);
            add_scaled(grad_pre_total, side.grad_pre, 1.0);
            model.encoder(tag).backward(grad_pre_total, enc_grads);
        };
        backprop(side_x, ModalityTag::x, grads->encoder_x);
        backprop(side_y, ModalityTag::y, grads->encoder_y);
        if (grads->decoder_x.empty()) grads->decoder_x = model.decoder(ModalityTag::x).make_zero_grads();
        if (grads->decoder_y.empty()) grads->decoder_y = model.decoder(ModalityTag::y).make_zero_grads();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct CrlTrainLogRow {
    std::size_t epoch = 0;
    double label_loss = 0.0;
    double cross_loss = 0.0;
    double sim = 0.0;
    double dsim = 0.0;
    double pred_label_loss = 0.0;
    double total = 0.0;
};

struct CrlTrainResult {
    CrlModel model;
    std::vector<CrlTrainLogRow> log;
    TrainStatus status = TrainStatus::completed;
    std::string diagnostics;
};

// Minibatch SGD over the weighted composite loss. Pairs are drawn uniformly
// from the precomputed sets each step; the unlabeled samples are spread over
// the epoch's batches.
inline CrlTrainResult train_crl(CrlModel model, const CrlTrainData& data, const PairSets& pairs,
                                const CrlConfig& config, std::uint64_t seed) {
    config.validate();
    data.validate();
    if (config.alpha3 > 0.0 && pairs.similar.empty() && config.pairs_per_batch > 0)
        throw ConfigError("train_crl: similarity loss enabled but no similar pairs");
    if (config.alpha4 > 0.0 && pairs.dissimilar.empty() && config.pairs_per_batch > 0)
        throw ConfigError("train_crl: dissimilarity loss enabled but no dissimilar pairs");

    const PositiveWeights weights = model.mode() == LabelMode::multi_label
                                        ? PositiveWeights::from_labels(data.labels, config.weight_cap)
                                        : PositiveWeights::ones(data.labels.rows);
    SgdOptimizer opt(config.learning_rate);
    CrlTrainResult result{std::move(model), {}, TrainStatus::completed, ""};

    std::vector<std::size_t> labeled_order(data.labeled_x.cols);
    std::iota(labeled_order.begin(), labeled_order.end(), 0);
    std::vector<std::size_t> unlabeled_x_order(data.unlabeled_x.cols);
    std::iota(unlabeled_x_order.begin(), unlabeled_x_order.end(), 0);
    std::vector<std::size_t> unlabeled_y_order(data.unlabeled_y.cols);
    std::iota(unlabeled_y_order.begin(), unlabeled_y_order.end(), 0);

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        Rng rng(derive_seed(seed, epoch));
        std::shuffle(labeled_order.begin(), labeled_order.end(), rng);
        std::shuffle(unlabeled_x_order.begin(), unlabeled_x_order.end(), rng);
        std::shuffle(unlabeled_y_order.begin(), unlabeled_y_order.end(), rng);
        const std::size_t n_batches = (labeled_order.size() + config.batch_size - 1) / config.batch_size;

        CrlTrainLogRow row{epoch, 0, 0, 0, 0, 0, 0};
        for (std::size_t b = 0; b < n_batches; ++b) {
            CrlStepBatch batch;
            const std::size_t lb0 = b * config.batch_size;
            const std::size_t lb1 = std::min(labeled_order.size(), lb0 + config.batch_size);
            batch.labeled.assign(labeled_order.begin() + static_cast<std::ptrdiff_t>(lb0),
                                 labeled_order.begin() + static_cast<std::ptrdiff_t>(lb1));
            if (config.pairs_per_batch > 0 && !pairs.similar.empty()) {
                std::uniform_int_distribution<std::size_t> pick(0, pairs.similar.size() - 1);
                for (std::size_t k = 0; k < config.pairs_per_batch; ++k)
                    batch.sim_pairs.push_back(pairs.similar[pick(rng)]);
            }
            if (config.pairs_per_batch > 0 && !pairs.dissimilar.empty()) {
                std::uniform_int_distribution<std::size_t> pick(0, pairs.dissimilar.size() - 1);
                for (std::size_t k = 0; k < config.pairs_per_batch; ++k)
                    batch.dsim_pairs.push_back(pairs.dissimilar[pick(rng)]);
            }
            auto chunk = [&](const std::vector<std::size_t>& order) {
                std::vector<std::size_t> out;
                if (order.empty()) return out;
                const std::size_t per = (order.size() + n_batches - 1) / n_batches;
                const std::size_t u0 = std::min(order.size(), b * per);
                const std::size_t u1 = std::min(order.size(), u0 + per);
                out.assign(order.begin() + static_cast<std::ptrdiff_t>(u0),
                           order.begin() + static_cast<std::ptrdiff_t>(u1));
                return out;
            };
            if (config.beta > 0.0) {
                batch.unlabeled_x = chunk(unlabeled_x_order);
                batch.unlabeled_y = chunk(unlabeled_y_order);
            }

            CrlGrads grads;
            const CrlLossBreakdown loss =
                crl_batch_loss(result.model, data, batch, config, weights, &grads);
            if (!std::isfinite(loss.total) || loss.total > config.divergence_threshold) {
                result.status = TrainStatus::numeric_abort;
                result.diagnostics = "epoch " + std::to_string(epoch) + " batch " + std::to_string(b) +
                                     ": total loss " + std::to_string(loss.total) + " exceeds " +
                                     std::to_string(config.divergence_threshold);
                result.log.push_back(row);
                return result;
            }
            row.label_loss += loss.label_loss;
            row.cross_loss += loss.cross_loss;
            row.sim += loss.sim;
            row.dsim += loss.dsim;
            row.pred_label_loss += loss.pred_label_loss;
            row.total += loss.total;

            opt.step(result.model.encoder(ModalityTag::x), grads.encoder_x);
            opt.step(result.model.encoder(ModalityTag::y), grads.encoder_y);
            opt.step(result.model.decoder(ModalityTag::x), grads.decoder_x);
            opt.step(result.model.decoder(ModalityTag::y), grads.decoder_y);
        }
        result.log.push_back(row);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Checkpointing: four stack files plus a JSON sidecar.
// ---------------------------------------------------------------------------

inline void save_crl_model(const std::filesystem::path& dir, const CrlModel& model,
                           const nlohmann::json& config_echo) {
    std::filesystem::create_directories(dir);
    save_stack_file(dir / "crl_encoder_x.ckpt", model.encoder(ModalityTag::x));
    save_stack_file(dir / "crl_encoder_y.ckpt", model.encoder(ModalityTag::y));
    save_stack_file(dir / "crl_decoder_x.ckpt", model.decoder(ModalityTag::x));
    save_stack_file(dir / "crl_decoder_y.ckpt", model.decoder(ModalityTag::y));
    nlohmann::json sidecar = {
        {"format", "xmodal-crl"},
        {"version", 1},
        {"label_mode", label_mode_name(model.mode())},
        {"d_x", model.dim_x()},
        {"d_y", model.dim_y()},
        {"d_c", model.num_classes()},
        {"config", config_echo},
    };
    std::ofstream os(dir / "crl_model.json");
    if (!os) throw LoadError("save_crl_model: cannot write sidecar in " + dir.string());
    os << sidecar.dump(2) << "\n";
}

inline CrlModel load_crl_model(const std::filesystem::path& dir) {
    std::ifstream is(dir / "crl_model.json");
    if (!is) throw LoadError("load_crl_model: missing sidecar in " + dir.string());
    nlohmann::json sidecar;
    try {
        is >> sidecar;
    } catch (const nlohmann::json::exception& e) {
        throw LoadError("load_crl_model: bad sidecar JSON: " + std::string(e.what()));
    }
    return CrlModel(load_stack_file(dir / "crl_encoder_x.ckpt"), load_stack_file(dir / "crl_encoder_y.ckpt"),
                    load_stack_file(dir / "crl_decoder_x.ckpt"), load_stack_file(dir / "crl_decoder_y.ckpt"),
                    label_mode_from_name(sidecar.at("label_mode").get<std::string>()));
}

}  // namespace xmodal
