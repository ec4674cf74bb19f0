#pragma once

#include "wappo/optim.hpp"
#include "wappo/tensor.hpp"

#include <cstdint>

namespace wappo {

struct ConfusionConfig {
    double clip_c = 0.01;     // weight clip bound
    int n_critic = 5;         // critic steps per RL update
    double lambda = 1.0;      // confusion weight in the combined loss
    double critic_lr = 5e-4;
    int hidden_layers = 4;
    int hidden_width = 64;
};

// Dense critic scoring representations with a single scalar per row.
// Weight clipping keeps all parameters in [-c, c] after every update,
// enforcing an approximate Lipschitz constraint.
class CriticNet {
public:
    CriticNet(int in_dim, int hidden_layers, int hidden_width, std::uint64_t seed);

    // Forward pass. With frozen=true the parameters enter the graph as
    // constants, so backward through the result reaches only the
    // representation inputs.
    Tensor score(const Tensor& reps, bool frozen = false) const;

    ParamMap& params() { return params_; }
    const ParamMap& params() const { return params_; }
    int in_dim() const { return in_dim_; }

private:
    ParamMap params_;
    int in_dim_;
    int hidden_layers_;
};

Tensor critic_score(const CriticNet& critic, const Tensor& reps);

// One ascent step on mean(f(source)) - mean(f(target)) followed by weight
// clipping. Representations must be detached (constants). Returns the
// objective value before the step.
double critic_update_step(CriticNet& critic, const Tensor& source_reps,
                          const Tensor& target_reps, RmsPropState& state, double lr, double c);

// mean(f(source)) - mean(f(target)); forward only.
double wasserstein_estimate(const CriticNet& critic, const Tensor& source_reps,
                            const Tensor& target_reps);

// The Wasserstein Confusion loss node: same expression as the estimate but
// with gradient-attached representations and frozen critic parameters, so
// backward reaches only the representation function.
Tensor confusion_loss(const CriticNet& critic, const Tensor& source_reps,
                      const Tensor& target_reps);

// Squared Euclidean distance between source and target batch-mean
// representations (feature-matching baseline).
Tensor rdr_loss(const Tensor& source_reps, const Tensor& target_reps);

}  // namespace wappo
