// include/xmodal/losses.hpp
#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "xmodal/matrix.hpp"

namespace xmodal {

// Log arguments are clamped to [kLogEps, 1 - kLogEps]; predictions of exactly
// 0/1 are reachable after the residual clip.
inline constexpr double kLogEps = 1e-7;

struct LossValue {
    double value = 0.0;
    std::vector<double> grad;  // w.r.t. the predicted vector
};

struct PairLossValue {
    double value = 0.0;
    std::vector<double> grad_x;
    std::vector<double> grad_y;
};

struct MatrixLossValue {
    double value = 0.0;
    Matrix grad;  // w.r.t. the reconstructed matrix
};

// Per-dimension positive weights w^j >= 1 for the weighted BCE.
struct PositiveWeights {
    std::vector<double> w;

    static PositiveWeights ones(std::size_t n) { return PositiveWeights{std::vector<double>(n, 1.0)}; }

    // w^j = clamp((#zeros_j + 1) / (#ones_j + 1), 1, cap) over label columns.
    static PositiveWeights from_labels(const Matrix& labels, double cap = 20.0) {
        if (labels.empty()) throw ConfigError("PositiveWeights: empty label matrix");
        PositiveWeights pw;
        pw.w.resize(labels.rows);
        for (std::size_t j = 0; j < labels.rows; ++j) {
            double ones_count = 0.0;
            for (std::size_t i = 0; i < labels.cols; ++i) ones_count += labels(j, i);
            const double zeros_count = static_cast<double>(labels.cols) - ones_count;
            pw.w[j] = std::clamp((zeros_count + 1.0) / (ones_count + 1.0), 1.0, cap);
        }
        return pw;
    }

    void validate() const {
        for (double v : w)
            if (!(v >= 1.0)) throw ConfigError("PositiveWeights: every weight must be >= 1");
    }
};

namespace detail {
inline double clamp_p(double p) { return std::clamp(p, kLogEps, 1.0 - kLogEps); }
}

// Weighted binary cross entropy over one label vector. Targets may be soft
// values in [0,1]; the weight scales the positive (tag present) term only.
inline LossValue wbce_loss(std::span<const double> target, std::span<const double> predicted,
                           const PositiveWeights& weights) {
    if (target.size() != predicted.size() || weights.w.size() != target.size())
        throw ConfigError("wbce_loss: length mismatch");
    LossValue out;
    out.grad.resize(target.size());
    for (std::size_t j = 0; j < target.size(); ++j) {
        const double t = target[j];
        if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("wbce_loss: target outside [0,1]");
        const double p = detail::clamp_p(predicted[j]);
        out.value -= weights.w[j] * t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
        out.grad[j] = -weights.w[j] * t / p + (1.0 - t) / (1.0 - p);
    }
    return out;
}

inline bool is_one_hot(std::span<const double> v) {
    std::size_t ones_count = 0;
    for (double e : v) {
        if (e == 1.0)
            ++ones_count;
        else if (e != 0.0)
            return false;
    }
    return ones_count == 1;
}

namespace detail {
// CE core without the one-hot requirement; the unlabeled-data label loss
// feeds soft (softmax) targets through the same formula.
inline LossValue ce_core(std::span<const double> target, std::span<const double> predicted) {
    if (target.size() != predicted.size()) throw ConfigError("ce_loss: length mismatch");
    LossValue out;
    out.grad.resize(target.size());
    for (std::size_t j = 0; j < target.size(); ++j) {
        const double p = clamp_p(predicted[j]);
        out.value -= target[j] * std::log(p);
        out.grad[j] = -target[j] / p;
    }
    return out;
}
}  // namespace detail

// Cross entropy against a one-hot target. The returned gradient is w.r.t.
// the softmax output; composed with a terminal softmax this reduces to
// (predicted - target) on the logits.
inline LossValue ce_loss(std::span<const double> target, std::span<const double> predicted) {
    if (!is_one_hot(target)) throw ValidationError("ce_loss: target is not one-hot");
    double sum = 0.0;
    for (double p : predicted) sum += p;
    if (std::abs(sum - 1.0) > 1e-6) throw ValidationError("ce_loss: predicted does not sum to 1");
    return detail::ce_core(target, predicted);
}

// Sum of absolute differences; subgradient w.r.t. the reconstruction with
// sign(0) := 0.
inline MatrixLossValue l1_cross_recon_loss(const Matrix& original, const Matrix& reconstructed) {
    require_same_shape(original, reconstructed, "l1_cross_recon_loss");
    MatrixLossValue out;
    out.grad = Matrix(original.rows, original.cols);
    for (std::size_t k = 0; k < original.data.size(); ++k) {
        const double d = reconstructed.data[k] - original.data[k];
        out.value += std::abs(d);
        out.grad.data[k] = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
    }
    return out;
}

// Squared Euclidean distance between two common representations.
inline PairLossValue sim_loss(std::span<const double> rep_x, std::span<const double> rep_y) {
    if (rep_x.size() != rep_y.size()) throw ConfigError("sim_loss: length mismatch");
    PairLossValue out;
    out.grad_x.resize(rep_x.size());
    out.grad_y.resize(rep_x.size());
    for (std::size_t j = 0; j < rep_x.size(); ++j) {
        const double d = rep_x[j] - rep_y[j];
        out.value += d * d;
        out.grad_x[j] = 2.0 * d;
        out.grad_y[j] = -2.0 * d;
    }
    return out;
}

// Hinge on the squared distance: max(0, margin - ||x - y||^2). Flat (zero
// gradient) once the pair is at least `margin` apart.
inline PairLossValue dsim_loss(std::span<const double> rep_x, std::span<const double> rep_y,
                               double margin) {
    if (rep_x.size() != rep_y.size()) throw ConfigError("dsim_loss: length mismatch");
    if (!(margin > 0.0)) throw ConfigError("dsim_loss: margin must be > 0");
    PairLossValue out;
    out.grad_x.assign(rep_x.size(), 0.0);
    out.grad_y.assign(rep_x.size(), 0.0);
    double sq = 0.0;
    for (std::size_t j = 0; j < rep_x.size(); ++j) {
        const double d = rep_x[j] - rep_y[j];
        sq += d * d;
    }
    if (sq >= margin) return out;
    out.value = margin - sq;
    for (std::size_t j = 0; j < rep_x.size(); ++j) {
        const double d = rep_x[j] - rep_y[j];
        out.grad_x[j] = -2.0 * d;
        out.grad_y[j] = 2.0 * d;
    }
    return out;
}

}  // namespace xmodal
