// include/xmodal/label_prediction.hpp
#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "xmodal/dataset.hpp"
#include "xmodal/layers.hpp"
#include "xmodal/losses.hpp"
#include "xmodal/optimizer.hpp"

namespace xmodal {

enum class ModalityTag { x, y };

// ---------------------------------------------------------------------------
// Anchor-based noisy annotation
// ---------------------------------------------------------------------------

struct AnchorSet {
    Matrix features_x;  // d_x x K, one anchor per column
    Matrix features_y;  // d_y x K
    Matrix labels;      // d_c x K

    void validate() const {
        if (features_x.cols == 0) throw ConfigError("AnchorSet: empty anchor set");
        if (features_y.cols != features_x.cols || labels.cols != features_x.cols)
            throw ConfigError("AnchorSet: column counts differ");
    }
};

// Index of the Euclidean-nearest column; exact distance ties go to the
// lowest index.
inline std::size_t nearest_column(const Matrix& candidates, std::span<const double> sample) {
    if (candidates.cols == 0) throw ConfigError("nearest_column: no candidates");
    if (candidates.rows != sample.size()) throw ConfigError("nearest_column: dimension mismatch");
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < candidates.cols; ++j) {
        double d = 0.0;
        for (std::size_t i = 0; i < candidates.rows; ++i) {
            const double diff = candidates(i, j) - sample[i];
            d += diff * diff;
        }
        if (d < best_d) {
            best_d = d;
            best = j;
        }
    }
    return best;
}

enum class NoisySource { paired_or_fusion, unpaired_substitute };

struct NoisyAnnotation {
    std::size_t sample_idx = 0;
    std::vector<double> noisy_label;
    NoisySource source = NoisySource::paired_or_fusion;
    bool modality_disagreement = false;  // S-L only: the two modalities named different classes
};

// M-L: elementwise OR. S-L: OR of two distinct one-hot vectors is not
// one-hot, so the x-side label wins on disagreement (flagged).
inline std::vector<double> fuse_noisy_labels(std::span<const double> label_x,
                                             std::span<const double> label_y, LabelMode mode,
                                             bool* disagreement = nullptr) {
    if (label_x.size() != label_y.size()) throw ConfigError("fuse_noisy_labels: length mismatch");
    std::vector<double> fused(label_x.size());
    if (mode == LabelMode::multi_label) {
        for (std::size_t i = 0; i < fused.size(); ++i)
            fused[i] = (label_x[i] != 0.0 || label_y[i] != 0.0) ? 1.0 : 0.0;
        if (disagreement) *disagreement = false;
        return fused;
    }
    bool equal = true;
    for (std::size_t i = 0; i < fused.size(); ++i)
        if (label_x[i] != label_y[i]) equal = false;
    std::copy(label_x.begin(), label_x.end(), fused.begin());
    if (disagreement) *disagreement = !equal;
    return fused;
}

inline NoisyAnnotation assign_noisy_labels_paired(std::size_t sample_idx, std::span<const double> x,
                                                  std::span<const double> y, const AnchorSet& anchors,
                                                  LabelMode mode) {
    anchors.validate();
    const std::size_t ax = nearest_column(anchors.features_x, x);
    const std::size_t ay = nearest_column(anchors.features_y, y);
    const auto lx = get_col(anchors.labels, ax);
    const auto ly = get_col(anchors.labels, ay);
    NoisyAnnotation ann;
    ann.sample_idx = sample_idx;
    ann.source = NoisySource::paired_or_fusion;
    ann.noisy_label = fuse_noisy_labels(lx, ly, mode, &ann.modality_disagreement);
    return ann;
}

// Labeled training pairs used to substitute the missing modality for
// unpaired unlabeled samples.
struct LabeledTrainSet {
    Matrix features_x;
    Matrix features_y;
    Matrix labels;

    void validate() const {
        if (features_x.cols == 0) throw ConfigError("LabeledTrainSet: empty");
        if (features_y.cols != features_x.cols || labels.cols != features_x.cols)
            throw ConfigError("LabeledTrainSet: column counts differ");
    }
};

struct UnpairedAssignment {
    NoisyAnnotation annotation;
    std::vector<double> substitute_other;  // fed as the missing modality's branch input
    std::size_t matched_train_idx = 0;
};

// For an unlabeled sample without a counterpart: its own modality's nearest
// anchor gives one label vote; the nearest labeled training sample lends its
// paired other-modality features and its own (true) label as the second vote.
inline UnpairedAssignment assign_noisy_labels_unpaired(std::size_t sample_idx,
                                                       std::span<const double> sample, ModalityTag modality,
                                                       const AnchorSet& anchors,
                                                       const LabeledTrainSet& labeled_train,
                                                       LabelMode mode) {
    anchors.validate();
    labeled_train.validate();
    const Matrix& own_anchors = modality == ModalityTag::x ? anchors.features_x : anchors.features_y;
    const Matrix& own_train = modality == ModalityTag::x ? labeled_train.features_x : labeled_train.features_y;
    const Matrix& other_train = modality == ModalityTag::x ? labeled_train.features_y : labeled_train.features_x;

    const std::size_t a = nearest_column(own_anchors, sample);
    const auto own_label = get_col(anchors.labels, a);
    const std::size_t t = nearest_column(own_train, sample);
    const auto other_label = get_col(labeled_train.labels, t);

    UnpairedAssignment out;
    out.matched_train_idx = t;
    out.substitute_other = get_col(other_train, t);
    out.annotation.sample_idx = sample_idx;
    out.annotation.source = NoisySource::unpaired_substitute;
    if (modality == ModalityTag::x)
        out.annotation.noisy_label =
            fuse_noisy_labels(own_label, other_label, mode, &out.annotation.modality_disagreement);
    else
        out.annotation.noisy_label =
            fuse_noisy_labels(other_label, own_label, mode, &out.annotation.modality_disagreement);
    return out;
}

// ---------------------------------------------------------------------------
// LP network: three input branches, a two-layer trunk, and a residual
// connection from the noisy label to the prediction.
// ---------------------------------------------------------------------------

enum class LpOutputMode { residual_clip, residual_softmax };

inline LpOutputMode lp_mode_for(LabelMode mode) {
    return mode == LabelMode::multi_label ? LpOutputMode::residual_clip : LpOutputMode::residual_softmax;
}

inline std::string lp_mode_name(LpOutputMode m) {
    return m == LpOutputMode::residual_clip ? "residual_clip" : "residual_softmax";
}

inline LpOutputMode lp_mode_from_name(const std::string& s) {
    if (s == "residual_clip") return LpOutputMode::residual_clip;
    if (s == "residual_softmax") return LpOutputMode::residual_softmax;
    throw LoadError("unknown LP output mode: " + s);
}

class LpNetwork {
  public:
    LpNetwork(std::size_t d_x, std::size_t d_y, std::size_t d_c, std::size_t hidden_dim,
              LpOutputMode mode, Rng& rng)
        : mode_(mode), d_x_(d_x), d_y_(d_y), d_c_(d_c) {
        // Linear input branches, one nonlinear trunk layer, linear residual
        // head. Sigmoid branches squash the per-sample signal badly enough
        // that the head mostly learns class priors.
        branch_x_.add_layer(FcLayer(hidden_dim, d_x, Activation::none));
        branch_y_.add_layer(FcLayer(hidden_dim, d_y, Activation::none));
        branch_label_.add_layer(FcLayer(hidden_dim, d_c, Activation::none));
        trunk_.add_layer(FcLayer(hidden_dim, 3 * hidden_dim, Activation::sigmoid));
        trunk_.add_layer(FcLayer(d_c, hidden_dim, Activation::none));
        branch_x_.init_uniform(rng);
        branch_y_.init_uniform(rng);
        branch_label_.init_uniform(rng);
        trunk_.init_uniform(rng);
        // Zero residual head: the network starts as the identity map on the
        // noisy label, so the best-validation snapshot can never fall below
        // the raw anchor annotation quality.
        trunk_.layer(trunk_.size() - 1).weight.fill(0.0);
        std::fill(trunk_.layer(trunk_.size() - 1).bias.begin(), trunk_.layer(trunk_.size() - 1).bias.end(),
                  0.0);
    }

    // Constructed from checkpoint stacks (branch_x, branch_y, branch_label, trunk).
    LpNetwork(std::vector<LayerStack> stacks, LpOutputMode mode) : mode_(mode) {
        if (stacks.size() != 4) throw LoadError("LpNetwork: expected 4 stacks");
        branch_x_ = std::move(stacks[0]);
        branch_y_ = std::move(stacks[1]);
        branch_label_ = std::move(stacks[2]);
        trunk_ = std::move(stacks[3]);
        d_x_ = branch_x_.input_dim();
        d_y_ = branch_y_.input_dim();
        d_c_ = trunk_.output_dim();
        if (branch_label_.input_dim() != d_c_) throw LoadError("LpNetwork: label branch dim mismatch");
    }

    LpOutputMode mode() const { return mode_; }
    std::size_t dim_x() const { return d_x_; }
    std::size_t dim_y() const { return d_y_; }
    std::size_t num_classes() const { return d_c_; }

    LayerStack& branch_x() { return branch_x_; }
    LayerStack& branch_y() { return branch_y_; }
    LayerStack& branch_label() { return branch_label_; }
    LayerStack& trunk() { return trunk_; }
    const LayerStack& branch_x() const { return branch_x_; }
    const LayerStack& branch_y() const { return branch_y_; }
    const LayerStack& branch_label() const { return branch_label_; }
    const LayerStack& trunk() const { return trunk_; }

    // Training forward (caches for backward). Samples are columns.
    // M-L: clip(L^n + g, [0,1]); S-L: softmax(L^n + g).
    const Matrix& forward(const Matrix& x, const Matrix& y, const Matrix& noisy) {
        check_dims(x, y, noisy);
        const Matrix& bx = branch_x_.forward(x);
        const Matrix& by = branch_y_.forward(y);
        const Matrix& bl = branch_label_.forward(noisy);
        const Matrix& g = trunk_.forward(vstack(bx, by, bl));
        pre_residual_ = noisy;
        add_scaled(pre_residual_, g, 1.0);
        prediction_ = pre_residual_;
        if (mode_ == LpOutputMode::residual_clip) {
            for (double& v : prediction_.data) v = std::clamp(v, 0.0, 1.0);
        } else {
            softmax_cols_inplace(prediction_);
        }
        prediction_.assert_finite("LpNetwork forward");
        have_forward_ = true;
        return prediction_;
    }

    // Cache-free inference.
    Matrix predict(const Matrix& x, const Matrix& y, const Matrix& noisy) const {
        check_dims(x, y, noisy);
        const Matrix bx = branch_x_.infer(x);
        const Matrix by = branch_y_.infer(y);
        const Matrix bl = branch_label_.infer(noisy);
        Matrix pred = trunk_.infer(vstack(bx, by, bl));
        add_scaled(pred, noisy, 1.0);
        if (mode_ == LpOutputMode::residual_clip) {
            for (double& v : pred.data) v = std::clamp(v, 0.0, 1.0);
        } else {
            softmax_cols_inplace(pred);
        }
        return pred;
    }

    struct Grads {
        StackGrads branch_x, branch_y, branch_label, trunk;
    };

    // grad_prediction is w.r.t. the clipped / softmaxed output.
    Grads backward(const Matrix& grad_prediction) {
        if (!have_forward_) throw StateError("LpNetwork: backward without prior forward");
        require_same_shape(grad_prediction, prediction_, "LpNetwork backward");
        Matrix grad_pre(grad_prediction.rows, grad_prediction.cols);
        if (mode_ == LpOutputMode::residual_clip) {
            for (std::size_t k = 0; k < grad_pre.data.size(); ++k) {
                const double v = pre_residual_.data[k];
                grad_pre.data[k] = (v > 0.0 && v < 1.0) ? grad_prediction.data[k] : 0.0;
            }
        } else {
            grad_pre = activation_backward(prediction_, grad_prediction, Activation::softmax);
        }
        Grads grads;
        Matrix grad_concat = trunk_.backward(grad_pre, grads.trunk);
        const std::size_t h = branch_x_.output_dim();
        branch_x_.backward(take_rows(grad_concat, 0, h), grads.branch_x);
        branch_y_.backward(take_rows(grad_concat, h, 2 * h), grads.branch_y);
        branch_label_.backward(take_rows(grad_concat, 2 * h, 3 * h), grads.branch_label);
        return grads;
    }

    void apply(const SgdOptimizer& opt, const Grads& grads) {
        opt.step(branch_x_, grads.branch_x);
        opt.step(branch_y_, grads.branch_y);
        opt.step(branch_label_, grads.branch_label);
        opt.step(trunk_, grads.trunk);
    }

    void collect_params(std::vector<double*>& out) {
        branch_x_.collect_params(out);
        branch_y_.collect_params(out);
        branch_label_.collect_params(out);
        trunk_.collect_params(out);
    }

  private:
    void check_dims(const Matrix& x, const Matrix& y, const Matrix& noisy) const {
        if (x.rows != d_x_ || y.rows != d_y_ || noisy.rows != d_c_)
            throw ConfigError("LpNetwork: input dimension mismatch");
        if (x.cols != y.cols || x.cols != noisy.cols)
            throw ConfigError("LpNetwork: batch size mismatch across inputs");
    }

    LayerStack branch_x_, branch_y_, branch_label_, trunk_;
    LpOutputMode mode_;
    std::size_t d_x_ = 0, d_y_ = 0, d_c_ = 0;
    Matrix pre_residual_;
    Matrix prediction_;
    bool have_forward_ = false;
};

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

enum class LpLossKind { wbce, bce, l1 };

inline std::string lp_loss_name(LpLossKind k) {
    switch (k) {
        case LpLossKind::wbce: return "wbce";
        case LpLossKind::bce: return "bce";
        case LpLossKind::l1: return "l1";
    }
    throw ConfigError("unknown LP loss");
}

inline LpLossKind lp_loss_from_name(const std::string& s) {
    if (s == "wbce") return LpLossKind::wbce;
    if (s == "bce") return LpLossKind::bce;
    if (s == "l1") return LpLossKind::l1;
    throw ConfigError("unknown LP loss: " + s);
}

struct LpConfig {
    std::size_t hidden_dim = 1000;
    double learning_rate = 0.005;
    std::size_t batch_size = 64;
    std::size_t max_epochs = 200;
    std::size_t patience = 10;
    LpLossKind ml_loss = LpLossKind::wbce;  // M-L only; S-L always uses CE
    Reduction reduction = Reduction::sum;
    double weight_cap = 20.0;

    void validate() const {
        if (hidden_dim == 0 || batch_size == 0 || max_epochs == 0 || patience == 0)
            throw ConfigError("LpConfig: zero-sized field");
        if (!(learning_rate > 0.0)) throw ConfigError("LpConfig: learning_rate must be > 0");
    }
};

struct LpTrainData {
    Matrix x;      // d_x x N
    Matrix y;      // d_y x N
    Matrix noisy;  // d_c x N, network input
    Matrix truth;  // d_c x N, target

    void validate() const {
        if (x.cols == 0) throw ConfigError("LpTrainData: empty");
        if (y.cols != x.cols || noisy.cols != x.cols || truth.cols != x.cols)
            throw ConfigError("LpTrainData: column counts differ");
    }
};

// S-L: fraction of argmax matches. M-L: 1 - mean(error_on_ones,
// error_on_zeros) with threshold 0.5.
inline double lp_accuracy(const Matrix& predicted, const Matrix& truth, LabelMode mode) {
    require_same_shape(predicted, truth, "lp_accuracy");
    if (predicted.cols == 0) throw ConfigError("lp_accuracy: no samples");
    if (mode == LabelMode::single_label) {
        std::size_t correct = 0;
        for (std::size_t j = 0; j < predicted.cols; ++j) {
            std::size_t pa = 0, ta = 0;
            for (std::size_t i = 1; i < predicted.rows; ++i) {
                if (predicted(i, j) > predicted(pa, j)) pa = i;
                if (truth(i, j) > truth(ta, j)) ta = i;
            }
            if (pa == ta) ++correct;
        }
        return static_cast<double>(correct) / static_cast<double>(predicted.cols);
    }
    double ones_total = 0.0, ones_wrong = 0.0, zeros_total = 0.0, zeros_wrong = 0.0;
    for (std::size_t k = 0; k < predicted.data.size(); ++k) {
        if (truth.data[k] == 1.0) {
            ones_total += 1.0;
            if (predicted.data[k] < 0.5) ones_wrong += 1.0;
        } else {
            zeros_total += 1.0;
            if (predicted.data[k] >= 0.5) zeros_wrong += 1.0;
        }
    }
    const double err_ones = ones_total > 0.0 ? ones_wrong / ones_total : 0.0;
    const double err_zeros = zeros_total > 0.0 ? zeros_wrong / zeros_total : 0.0;
    return 1.0 - 0.5 * (err_ones + err_zeros);
}

inline Matrix threshold_labels(const Matrix& soft, double threshold = 0.5) {
    Matrix hard(soft.rows, soft.cols);
    for (std::size_t k = 0; k < soft.data.size(); ++k) hard.data[k] = soft.data[k] >= threshold ? 1.0 : 0.0;
    return hard;
}

struct LpTrainLogRow {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_accuracy = 0.0;
};

enum class TrainStatus { completed, early_stopped, numeric_abort };

struct LpTrainResult {
    LpNetwork net;  // best-validation snapshot
    std::vector<LpTrainLogRow> log;
    double best_val_accuracy = 0.0;
    TrainStatus status = TrainStatus::completed;
};

namespace detail {
// Batch loss for the LP output given truth; fills grad w.r.t. the prediction.
inline double lp_batch_loss(const Matrix& prediction, const Matrix& truth, LpOutputMode mode,
                            LpLossKind ml_loss, const PositiveWeights& weights, Reduction reduction,
                            Matrix& grad) {
    grad = Matrix(prediction.rows, prediction.cols);
    double total = 0.0;
    for (std::size_t j = 0; j < prediction.cols; ++j) {
        const auto pred = get_col(prediction, j);
        const auto target = get_col(truth, j);
        if (mode == LpOutputMode::residual_softmax) {
            const LossValue lv = ce_loss(target, pred);
            total += lv.value;
            set_col(grad, j, lv.grad);
        } else if (ml_loss == LpLossKind::l1) {
            double v = 0.0;
            std::vector<double> g(pred.size());
            for (std::size_t i = 0; i < pred.size(); ++i) {
                const double d = pred[i] - target[i];
                v += std::abs(d);
                g[i] = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
            }
            total += v;
            set_col(grad, j, g);
        } else {
            const LossValue lv = wbce_loss(target, pred, weights);
            total += lv.value;
            set_col(grad, j, lv.grad);
        }
    }
    if (reduction == Reduction::mean && prediction.cols > 0) {
        total /= static_cast<double>(prediction.cols);
        for (double& v : grad.data) v /= static_cast<double>(prediction.cols);
    }
    return total;
}
}  // namespace detail

// Minibatch SGD on the label prediction loss with validation-based early
// stopping. Returns the snapshot with the best validation accuracy seen.
inline LpTrainResult train_lp(LpNetwork net, const LpTrainData& train, const LpTrainData& val,
                              const LpConfig& config, std::uint64_t seed) {
    config.validate();
    train.validate();
    val.validate();
    const LabelMode label_mode =
        net.mode() == LpOutputMode::residual_clip ? LabelMode::multi_label : LabelMode::single_label;
    PositiveWeights weights = config.ml_loss == LpLossKind::wbce && net.mode() == LpOutputMode::residual_clip
                                  ? PositiveWeights::from_labels(train.truth, config.weight_cap)
                                  : PositiveWeights::ones(train.truth.rows);

    LpTrainResult result{net, {}, 0.0, TrainStatus::completed};
    SgdOptimizer opt(config.learning_rate);

    auto val_accuracy = [&](const LpNetwork& n) {
        return lp_accuracy(n.predict(val.x, val.y, val.noisy), val.truth, label_mode);
    };
    auto train_loss_of = [&](const LpNetwork& n) {
        Matrix g;
        return detail::lp_batch_loss(n.predict(train.x, train.y, train.noisy), train.truth, n.mode(),
                                     config.ml_loss, weights, config.reduction, g);
    };

    double best_acc = val_accuracy(net);
    result.best_val_accuracy = best_acc;
    result.log.push_back({0, train_loss_of(net), best_acc});

    std::vector<std::size_t> order(train.x.cols);
    std::iota(order.begin(), order.end(), 0);
    std::size_t patience_counter = 0;

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        Rng rng(derive_seed(seed, epoch));
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;  // sum, or sample-weighted mean under mean reduction
        bool finite = true;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            const std::span<const std::size_t> batch(order.data() + start, end - start);
            const Matrix bx = gather_cols(train.x, batch);
            const Matrix by = gather_cols(train.y, batch);
            const Matrix bn = gather_cols(train.noisy, batch);
            const Matrix bt = gather_cols(train.truth, batch);
            const Matrix& pred = net.forward(bx, by, bn);
            Matrix grad;
            const double loss =
                detail::lp_batch_loss(pred, bt, net.mode(), config.ml_loss, weights, config.reduction, grad);
            if (!std::isfinite(loss)) {
                finite = false;
                break;
            }
            epoch_loss += config.reduction == Reduction::mean
                              ? loss * static_cast<double>(batch.size()) / static_cast<double>(order.size())
                              : loss;
            net.apply(opt, net.backward(grad));
        }
        if (!finite) {
            result.status = TrainStatus::numeric_abort;
            break;
        }
        const double acc = val_accuracy(net);
        result.log.push_back({epoch, epoch_loss, acc});
        // Snapshot on ties too: among equal-validation models prefer the
        // longer-trained one. Patience only resets on strict improvement.
        if (acc >= best_acc) {
            result.net = net;
            result.best_val_accuracy = acc;
        }
        if (acc > best_acc) {
            best_acc = acc;
            patience_counter = 0;
        } else if (++patience_counter >= config.patience) {
            result.status = TrainStatus::early_stopped;
            break;
        }
    }
    return result;
}

// Predictions for unlabeled data given their noisy annotations. M-L outputs
// are soft values in [0,1]; S-L outputs are softmax columns.
inline Matrix predict_labels(const LpNetwork& net, const Matrix& x, const Matrix& y, const Matrix& noisy,
                             LabelMode data_mode) {
    if (lp_mode_for(data_mode) != net.mode())
        throw ConfigError("predict_labels: network output mode does not match data label mode");
    return net.predict(x, y, noisy);
}

}  // namespace xmodal
