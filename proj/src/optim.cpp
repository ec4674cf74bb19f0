#include "wappo/optim.hpp"

#include <cmath>

namespace wappo {

void rmsprop_step(ParamMap& params, const GradMap& grads, RmsPropState& state, double lr,
                  StepDirection dir) {
    if (lr <= 0.0) throw TensorError("rmsprop_step: learning rate must be positive");
    double sign = dir == StepDirection::Descent ? -1.0 : 1.0;
    for (auto& [name, p] : params) {
        auto git = grads.find(name);
        if (git == grads.end()) throw TensorError("rmsprop_step: missing gradient for " + name);
        const auto& g = git->second;
        auto& pv = p.mutable_data();
        if (g.size() != pv.size()) throw TensorError("rmsprop_step: shape mismatch for " + name);
        auto& sq = state.square_avg[name];
        if (sq.size() != pv.size()) sq.assign(pv.size(), 0.0);
        for (std::size_t i = 0; i < pv.size(); ++i) {
            sq[i] = state.rho * sq[i] + (1.0 - state.rho) * g[i] * g[i];
            pv[i] += sign * lr * g[i] / (std::sqrt(sq[i]) + state.eps);
        }
    }
}

void clamp_params(ParamMap& params, double c) {
    if (c <= 0.0) throw TensorError("clamp_params: bound must be positive");
    for (auto& [name, p] : params) {
        (void)name;
        for (auto& v : p.mutable_data()) {
            if (v > c) v = c;
            else if (v < -c) v = -c;
        }
    }
}

double max_abs_param(const ParamMap& params) {
    double m = 0.0;
    for (const auto& [name, p] : params) {
        (void)name;
        for (double v : p.data()) m = std::max(m, std::fabs(v));
    }
    return m;
}

}  // namespace wappo
