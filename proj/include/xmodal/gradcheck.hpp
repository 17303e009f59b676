// include/xmodal/gradcheck.hpp
#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "xmodal/layers.hpp"

namespace xmodal {

// Central-difference gradient estimate (f(t+h) - f(t-h)) / (2h), one
// coordinate at a time. `loss_fn` must be a deterministic function of the
// values behind `params`.
inline std::vector<double> finite_diff_grad(const std::function<double()>& loss_fn,
                                            std::span<double* const> params, double step) {
    if (!(step > 0.0)) throw ConfigError("finite_diff_grad: step must be > 0");
    std::vector<double> grad(params.size());
    for (std::size_t k = 0; k < params.size(); ++k) {
        double* p = params[k];
        const double saved = *p;
        *p = saved + step;
        const double up = loss_fn();
        *p = saved - step;
        const double down = loss_fn();
        *p = saved;
        if (!std::isfinite(up) || !std::isfinite(down))
            throw NumericError("finite_diff_grad: non-finite loss evaluation");
        grad[k] = (up - down) / (2.0 * step);
    }
    return grad;
}

// max_k |a_k - b_k| / max(1e-12, |a_k| + |b_k|)
inline double max_relative_error(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ConfigError("max_relative_error: length mismatch");
    double worst = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double denom = std::max(1e-12, std::abs(a[k]) + std::abs(b[k]));
        worst = std::max(worst, std::abs(a[k] - b[k]) / denom);
    }
    return worst;
}

inline std::vector<double> flatten_grads(const StackGrads& grads) {
    std::vector<double> flat;
    for (const auto& g : grads) {
        flat.insert(flat.end(), g.weight.data.begin(), g.weight.data.end());
        flat.insert(flat.end(), g.bias.begin(), g.bias.end());
    }
    return flat;
}

}  // namespace xmodal
