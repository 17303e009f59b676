// include/xmodal/layers.hpp
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "xmodal/matrix.hpp"

namespace xmodal {

enum class Activation { none, sigmoid, softmax };

inline std::string activation_name(Activation a) {
    switch (a) {
        case Activation::none: return "none";
        case Activation::sigmoid: return "sigmoid";
        case Activation::softmax: return "softmax";
    }
    throw ConfigError("unknown activation");
}

inline Activation activation_from_name(const std::string& s) {
    if (s == "none") return Activation::none;
    if (s == "sigmoid") return Activation::sigmoid;
    if (s == "softmax") return Activation::softmax;
    throw LoadError("unknown activation tag: " + s);
}

inline void sigmoid_inplace(Matrix& m) {
    for (double& v : m.data) v = 1.0 / (1.0 + std::exp(-v));
}

// Column-wise softmax with max-subtraction.
inline void softmax_cols_inplace(Matrix& m) {
    for (std::size_t j = 0; j < m.cols; ++j) {
        double mx = m(0, j);
        for (std::size_t i = 1; i < m.rows; ++i) mx = std::max(mx, m(i, j));
        double sum = 0.0;
        for (std::size_t i = 0; i < m.rows; ++i) {
            const double e = std::exp(m(i, j) - mx);
            m(i, j) = e;
            sum += e;
        }
        for (std::size_t i = 0; i < m.rows; ++i) m(i, j) /= sum;
    }
}

inline void apply_activation(Matrix& m, Activation act) {
    switch (act) {
        case Activation::none: return;
        case Activation::sigmoid: sigmoid_inplace(m); return;
        case Activation::softmax: softmax_cols_inplace(m); return;
    }
}

// Pulls grad w.r.t. pre-activation out of grad w.r.t. activated output.
// `activated` must be the activation output cached from the forward pass.
inline Matrix activation_backward(const Matrix& activated, const Matrix& grad_out, Activation act) {
    require_same_shape(activated, grad_out, "activation_backward");
    Matrix g = grad_out;
    switch (act) {
        case Activation::none:
            return g;
        case Activation::sigmoid:
            for (std::size_t k = 0; k < g.data.size(); ++k) {
                const double a = activated.data[k];
                g.data[k] *= a * (1.0 - a);
            }
            return g;
        case Activation::softmax:
            // dz = s .* (g - <g, s>) per column
            for (std::size_t j = 0; j < g.cols; ++j) {
                double gs = 0.0;
                for (std::size_t i = 0; i < g.rows; ++i) gs += grad_out(i, j) * activated(i, j);
                for (std::size_t i = 0; i < g.rows; ++i) g(i, j) = activated(i, j) * (grad_out(i, j) - gs);
            }
            return g;
    }
    throw ConfigError("unknown activation");
}

struct FcLayer {
    Matrix weight;             // d_out x d_in
    std::vector<double> bias;  // d_out
    Activation activation = Activation::none;

    FcLayer() = default;
    FcLayer(std::size_t d_out, std::size_t d_in, Activation act)
        : weight(d_out, d_in), bias(d_out, 0.0), activation(act) {}

    std::size_t in_dim() const { return weight.cols; }
    std::size_t out_dim() const { return weight.rows; }

    void validate() const {
        if (weight.rows == 0 || weight.cols == 0) throw ConfigError("FcLayer: empty weight");
        if (bias.size() != weight.rows) throw ConfigError("FcLayer: bias/weight dimension mismatch");
    }
};

struct LayerGrads {
    Matrix weight;
    std::vector<double> bias;
};

using StackGrads = std::vector<LayerGrads>;

inline void add_scaled(StackGrads& into, const StackGrads& g, double scale) {
    if (into.size() != g.size()) throw ConfigError("StackGrads add: layer count mismatch");
    for (std::size_t k = 0; k < g.size(); ++k) {
        add_scaled(into[k].weight, g[k].weight, scale);
        for (std::size_t i = 0; i < g[k].bias.size(); ++i) into[k].bias[i] += scale * g[k].bias[i];
    }
}

// Ordered stack of fully connected layers with a forward cache for the
// hand-written backward pass. One training loop owns a stack at a time;
// `infer` never touches the cache and is safe on a frozen stack.
class LayerStack {
  public:
    void add_layer(FcLayer layer) {
        layer.validate();
        if (!layers_.empty()) {
            if (layers_.back().activation == Activation::softmax)
                throw ConfigError("LayerStack: softmax is only legal as a terminal activation");
            if (layers_.back().out_dim() != layer.in_dim())
                throw ConfigError("LayerStack: adjacent layer dimensions do not chain");
        }
        layers_.push_back(std::move(layer));
        have_forward_ = false;
    }

    std::size_t size() const { return layers_.size(); }
    FcLayer& layer(std::size_t k) { return layers_[k]; }
    const FcLayer& layer(std::size_t k) const { return layers_[k]; }

    std::size_t input_dim() const {
        if (layers_.empty()) throw StateError("LayerStack: empty stack");
        return layers_.front().in_dim();
    }
    std::size_t output_dim() const {
        if (layers_.empty()) throw StateError("LayerStack: empty stack");
        return layers_.back().out_dim();
    }

    // Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero bias.
    void init_uniform(Rng& rng) {
        for (auto& l : layers_) {
            const double limit = std::sqrt(6.0 / static_cast<double>(l.in_dim() + l.out_dim()));
            std::uniform_real_distribution<double> dist(-limit, limit);
            for (double& w : l.weight.data) w = dist(rng);
            std::fill(l.bias.begin(), l.bias.end(), 0.0);
        }
    }

    // Forward pass over a batch of column samples; caches per-layer inputs
    // and activated outputs for backward().
    const Matrix& forward(const Matrix& input) {
        run_forward(input, &inputs_, &outputs_);
        have_forward_ = true;
        return outputs_.back();
    }

    // Cache-free forward for read-only inference.
    Matrix infer(const Matrix& input) const {
        std::vector<Matrix> outs;
        run_forward(input, nullptr, &outs);
        return std::move(outs.back());
    }

    // Gradients w.r.t. every weight/bias plus the gradient w.r.t. the input.
    // Requires a prior forward() with a matching batch.
    Matrix backward(const Matrix& grad_output, StackGrads& grads) const {
        if (!have_forward_) throw StateError("LayerStack: backward without prior forward");
        if (grad_output.rows != outputs_.back().rows || grad_output.cols != outputs_.back().cols)
            throw StateError("LayerStack: grad_output shape does not match cached forward");
        grads.resize(layers_.size());
        Matrix g = grad_output;
        for (std::size_t k = layers_.size(); k-- > 0;) {
            const FcLayer& l = layers_[k];
            Matrix gz = activation_backward(outputs_[k], g, l.activation);
            grads[k].weight = matmul_bt(gz, inputs_[k]);  // gz * x^T
            grads[k].bias = row_sums(gz);
            g = matmul_at(l.weight, gz);  // W^T * gz
        }
        return g;
    }

    StackGrads make_zero_grads() const {
        StackGrads g(layers_.size());
        for (std::size_t k = 0; k < layers_.size(); ++k) {
            g[k].weight = Matrix(layers_[k].out_dim(), layers_[k].in_dim());
            g[k].bias.assign(layers_[k].out_dim(), 0.0);
        }
        return g;
    }

    void collect_params(std::vector<double*>& out) {
        for (auto& l : layers_) {
            for (double& w : l.weight.data) out.push_back(&w);
            for (double& b : l.bias) out.push_back(&b);
        }
    }

  private:
    void run_forward(const Matrix& input, std::vector<Matrix>* inputs, std::vector<Matrix>* outputs) const {
        if (layers_.empty()) throw StateError("LayerStack: forward on empty stack");
        if (input.rows != input_dim()) throw ConfigError("LayerStack: input dimension mismatch");
        if (inputs) inputs->clear();
        outputs->clear();
        Matrix cur = input;
        for (const auto& l : layers_) {
            if (inputs) inputs->push_back(cur);
            Matrix z = matmul(l.weight, cur);
            add_bias_cols(z, l.bias);
            apply_activation(z, l.activation);
            z.assert_finite("LayerStack forward");
            cur = std::move(z);
            outputs->push_back(cur);
        }
    }

    std::vector<FcLayer> layers_;
    std::vector<Matrix> inputs_;   // input seen by layer k
    std::vector<Matrix> outputs_;  // activated output of layer k
    bool have_forward_ = false;
};

}  // namespace xmodal
