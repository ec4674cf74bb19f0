#pragma once

#include "wappo/env.hpp"
#include "wappo/optim.hpp"
#include "wappo/rng.hpp"
#include "wappo/tensor.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace wappo {

struct PPOConfig {
    double gamma = 0.99;
    double gae_lambda = 0.95;
    double clip_eps = 0.2;
    double value_coef = 0.5;
    double entropy_coef = 0.01;
    int epochs = 4;
    std::size_t minibatch = 256;
    int horizon = 2048;
    double lr = 5e-4;
    bool normalize_adv = true;
};

// Shared feature extractor with categorical policy head and scalar value
// head. The representation (dimension 128) is what the adversarial critic
// consumes.
class PolicyValueNet {
public:
    static constexpr int kRepDim = 128;
    static constexpr int kHidden = 256;

    PolicyValueNet(int obs_dim, int n_actions, std::uint64_t seed);

    // Representation h(x): flatten -> affine 256 -> leaky-relu -> affine 128
    // -> leaky-relu.
    Tensor features(const Tensor& obs) const;

    struct Forward {
        Tensor rep;       // [n, 128]
        Tensor log_prob;  // [n, n_actions], rows are log-distributions
        Tensor value;     // [n, 1]
    };
    Forward forward(const Tensor& obs) const;

    ParamMap& params() { return params_; }
    const ParamMap& params() const { return params_; }
    int n_actions() const { return n_actions_; }
    int obs_dim() const { return obs_dim_; }

private:
    ParamMap params_;
    int obs_dim_;
    int n_actions_;
};

struct RolloutBuffer {
    std::vector<Observation> observations;
    std::vector<int> actions;
    std::vector<double> log_probs;  // behavior-policy log pi(a|s)
    std::vector<double> rewards;
    std::vector<double> values;
    std::vector<char> dones;
    double bootstrap_value = 0.0;  // V of the state after the last step
    std::vector<double> advantages;  // filled by gae()
    std::vector<double> returns;
    std::vector<double> episode_returns;  // episodes completed inside the horizon

    std::size_t size() const { return actions.size(); }
};

// On-policy collection with auto-reset; stored log-probs are those of the
// acting policy.
RolloutBuffer collect_rollout(const PolicyValueNet& policy, Domain& domain, int horizon,
                              Rng& rng);

// delta_t = r_t + gamma*V_{t+1}*(1-done_t) - V_t
// A_t     = delta_t + gamma*lambda*(1-done_t)*A_{t+1}
// ret_t   = A_t + V_t
void gae(RolloutBuffer& buffer, double gamma, double gae_lambda, double bootstrap_value);

// -mean_t[min(r_t*A_t, clip(r_t, 1-eps, 1+eps)*A_t)], r_t = exp(new - old).
Tensor ppo_policy_loss(const Tensor& logp_new, const Tensor& logp_old, const Tensor& advantages,
                       double eps);

// Mean squared error between value predictions and returns.
Tensor value_loss(const Tensor& values, const Tensor& returns);

// Mean per-row entropy of a log-distribution batch.
Tensor entropy(const Tensor& log_prob);

// Optional per-minibatch auxiliary loss (confusion / feature matching);
// receives the gradient-attached minibatch representations and returns a
// scalar node already scaled by its weight, or an undefined Tensor.
using AuxLossHook = std::function<Tensor(const Tensor& minibatch_reps)>;

struct UpdateStats {
    double loss_policy = 0.0;
    double loss_value = 0.0;
    double entropy = 0.0;
    double loss_aux = 0.0;
    int minibatches = 0;
};

UpdateStats ppo_update(PolicyValueNet& policy, const RolloutBuffer& buffer,
                       const PPOConfig& config, RmsPropState& opt_state, Rng& rng,
                       const AuxLossHook& aux = nullptr);

// Builds the [n, obs_dim] constant batch for a set of observations.
Tensor observation_batch(const std::vector<const Observation*>& obs);
Tensor observation_batch(const std::vector<Observation>& obs);

}  // namespace wappo
