// include/xmodal/optimizer.hpp
#pragma once

#include "xmodal/layers.hpp"

namespace xmodal {

// Plain SGD: theta <- theta - lr * grad, elementwise.
class SgdOptimizer {
  public:
    explicit SgdOptimizer(double learning_rate) : lr_(learning_rate) {
        if (!(lr_ > 0.0)) throw ConfigError("SgdOptimizer: learning_rate must be > 0");
    }

    double learning_rate() const { return lr_; }

    void step(FcLayer& layer, const LayerGrads& g) const {
        if (g.weight.rows != layer.weight.rows || g.weight.cols != layer.weight.cols ||
            g.bias.size() != layer.bias.size())
            throw ConfigError("SgdOptimizer: gradient shape does not match parameters");
        for (std::size_t k = 0; k < layer.weight.data.size(); ++k)
            layer.weight.data[k] -= lr_ * g.weight.data[k];
        for (std::size_t k = 0; k < layer.bias.size(); ++k) layer.bias[k] -= lr_ * g.bias[k];
    }

    void step(LayerStack& stack, const StackGrads& grads) const {
        if (grads.size() != stack.size())
            throw ConfigError("SgdOptimizer: gradient layer count does not match stack");
        for (std::size_t k = 0; k < stack.size(); ++k) step(stack.layer(k), grads[k]);
    }

  private:
    double lr_;
};

}  // namespace xmodal
