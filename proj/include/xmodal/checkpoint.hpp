// include/xmodal/checkpoint.hpp
#pragma once

#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "xmodal/layers.hpp"

namespace xmodal {

// Text checkpoint container, one or more layer stacks per file:
//
//   xmodal-checkpoint 1
//   stacks <k>
//   stack <n_layers>
//   layer <d_out> <d_in> <activation>
//   <d_out rows of d_in weights>
//   <one row of d_out biases>
//
// Values carry 17 significant digits, so load(save(stack)) reproduces
// parameters bit-exactly.

inline void save_stacks(std::ostream& os, const std::vector<const LayerStack*>& stacks) {
    os << "xmodal-checkpoint 1\n";
    os << "stacks " << stacks.size() << "\n";
    for (const LayerStack* stack : stacks) {
        os << "stack " << stack->size() << "\n";
        for (std::size_t k = 0; k < stack->size(); ++k) {
            const FcLayer& l = stack->layer(k);
            os << "layer " << l.out_dim() << " " << l.in_dim() << " " << activation_name(l.activation)
               << "\n";
            for (std::size_t i = 0; i < l.out_dim(); ++i) {
                for (std::size_t j = 0; j < l.in_dim(); ++j) {
                    if (j) os << " ";
                    os << format_double_17(l.weight(i, j));
                }
                os << "\n";
            }
            for (std::size_t i = 0; i < l.bias.size(); ++i) {
                if (i) os << " ";
                os << format_double_17(l.bias[i]);
            }
            os << "\n";
        }
    }
}

inline std::vector<LayerStack> load_stacks(std::istream& is) {
    auto expect = [&](const std::string& word) {
        std::string tok;
        if (!(is >> tok) || tok != word) throw LoadError("checkpoint: expected '" + word + "'");
    };
    expect("xmodal-checkpoint");
    int version = 0;
    if (!(is >> version) || version != 1) throw LoadError("checkpoint: unsupported format version");
    expect("stacks");
    std::size_t n_stacks = 0;
    if (!(is >> n_stacks)) throw LoadError("checkpoint: bad stack count");
    std::vector<LayerStack> stacks;
    stacks.reserve(n_stacks);
    for (std::size_t s = 0; s < n_stacks; ++s) {
        expect("stack");
        std::size_t n_layers = 0;
        if (!(is >> n_layers) || n_layers == 0) throw LoadError("checkpoint: bad layer count");
        LayerStack stack;
        for (std::size_t k = 0; k < n_layers; ++k) {
            expect("layer");
            std::size_t d_out = 0, d_in = 0;
            std::string act;
            if (!(is >> d_out >> d_in >> act)) throw LoadError("checkpoint: bad layer header");
            FcLayer layer(d_out, d_in, activation_from_name(act));
            for (double& w : layer.weight.data)
                if (!(is >> w)) throw LoadError("checkpoint: truncated weights");
            for (double& b : layer.bias)
                if (!(is >> b)) throw LoadError("checkpoint: truncated bias");
            stack.add_layer(std::move(layer));
        }
        stacks.push_back(std::move(stack));
    }
    return stacks;
}

inline void save_stacks_file(const std::filesystem::path& path, const std::vector<const LayerStack*>& stacks) {
    std::ofstream os(path);
    if (!os) throw LoadError("checkpoint: cannot open for write: " + path.string());
    save_stacks(os, stacks);
    if (!os) throw LoadError("checkpoint: write failed: " + path.string());
}

inline std::vector<LayerStack> load_stacks_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw LoadError("checkpoint: cannot open: " + path.string());
    return load_stacks(is);
}

inline void save_stack_file(const std::filesystem::path& path, const LayerStack& stack) {
    save_stacks_file(path, {&stack});
}

inline LayerStack load_stack_file(const std::filesystem::path& path) {
    auto stacks = load_stacks_file(path);
    if (stacks.size() != 1) throw LoadError("checkpoint: expected exactly one stack: " + path.string());
    return std::move(stacks.front());
}

}  // namespace xmodal
