#include "wappo/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace wappo {

namespace {

std::vector<double> init_uniform(std::size_t fan_in, std::size_t fan_out, std::size_t count,
                                 Rng& rng) {
    double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> v(count);
    for (auto& e : v) e = rng.uniform(-bound, bound);
    return v;
}

Tensor make_linear_params(ParamMap& params, const std::string& prefix, std::size_t in,
                          std::size_t out, Rng& rng) {
    params.emplace(prefix + ".w",
                   Tensor::parameter(prefix + ".w", {in, out}, init_uniform(in, out, in * out, rng)));
    params.emplace(prefix + ".b",
                   Tensor::parameter(prefix + ".b", {out}, std::vector<double>(out, 0.0)));
    return params.at(prefix + ".w");
}

constexpr double kLeakySlope = 0.01;

}  // namespace

PolicyValueNet::PolicyValueNet(int obs_dim, int n_actions, std::uint64_t seed)
    : obs_dim_(obs_dim), n_actions_(n_actions) {
    Rng rng(seed);
    make_linear_params(params_, "fe.l1", obs_dim, kHidden, rng);
    make_linear_params(params_, "fe.l2", kHidden, kRepDim, rng);
    make_linear_params(params_, "pi", kRepDim, n_actions, rng);
    make_linear_params(params_, "v", kRepDim, 1, rng);
}

Tensor PolicyValueNet::features(const Tensor& obs) const {
    Tensor h1 = ops::leaky_relu(
        ops::affine(obs, params_.at("fe.l1.w"), params_.at("fe.l1.b")), kLeakySlope);
    return ops::leaky_relu(ops::affine(h1, params_.at("fe.l2.w"), params_.at("fe.l2.b")),
                           kLeakySlope);
}

PolicyValueNet::Forward PolicyValueNet::forward(const Tensor& obs) const {
    Forward f;
    f.rep = features(obs);
    f.log_prob = ops::log_softmax(ops::affine(f.rep, params_.at("pi.w"), params_.at("pi.b")));
    f.value = ops::affine(f.rep, params_.at("v.w"), params_.at("v.b"));
    return f;
}

Tensor observation_batch(const std::vector<const Observation*>& obs) {
    std::size_t n = obs.size();
    std::vector<double> data;
    data.reserve(n * kObsDim);
    for (const Observation* o : obs) data.insert(data.end(), o->pixels.begin(), o->pixels.end());
    return Tensor::constant({n, static_cast<std::size_t>(kObsDim)}, std::move(data));
}

Tensor observation_batch(const std::vector<Observation>& obs) {
    std::vector<const Observation*> ptrs;
    ptrs.reserve(obs.size());
    for (const auto& o : obs) ptrs.push_back(&o);
    return observation_batch(ptrs);
}

RolloutBuffer collect_rollout(const PolicyValueNet& policy, Domain& domain, int horizon,
                              Rng& rng) {
    if (horizon < 1) throw TensorError("collect_rollout: horizon must be >= 1");
    NoGradGuard no_grad;
    RolloutBuffer buf;
    buf.observations.reserve(horizon);

    Observation obs = domain.reset();
    double episode_return = 0.0;
    for (int t = 0; t < horizon; ++t) {
        Tensor x = Tensor::constant({static_cast<std::size_t>(kObsDim)}, obs.pixels);
        auto f = policy.forward(x);
        const auto& logp = f.log_prob.data();

        // categorical sample from exp(logp)
        double u = rng.uniform();
        double acc = 0.0;
        int action = policy.n_actions() - 1;
        for (int a = 0; a < policy.n_actions(); ++a) {
            acc += std::exp(logp[a]);
            if (u < acc) {
                action = a;
                break;
            }
        }

        StepResult res = domain.step(action);
        buf.observations.push_back(obs);
        buf.actions.push_back(action);
        buf.log_probs.push_back(logp[action]);
        buf.rewards.push_back(res.reward);
        buf.values.push_back(f.value.data()[0]);
        buf.dones.push_back(res.done ? 1 : 0);
        episode_return += res.reward;

        if (res.done) {
            buf.episode_returns.push_back(episode_return);
            episode_return = 0.0;
            obs = domain.reset();
        } else {
            obs = res.observation;
        }
    }

    Tensor x = Tensor::constant({static_cast<std::size_t>(kObsDim)}, obs.pixels);
    buf.bootstrap_value = policy.forward(x).value.data()[0];
    return buf;
}

void gae(RolloutBuffer& buffer, double gamma, double gae_lambda, double bootstrap_value) {
    std::size_t n = buffer.size();
    if (buffer.values.size() != n || buffer.rewards.size() != n)
        throw TensorError("gae: values and rewards must be populated");
    buffer.advantages.assign(n, 0.0);
    buffer.returns.assign(n, 0.0);
    double adv = 0.0;
    for (std::size_t i = n; i-- > 0;) {
        double not_done = buffer.dones[i] ? 0.0 : 1.0;
        double next_value = (i + 1 < n) ? buffer.values[i + 1] : bootstrap_value;
        double delta = buffer.rewards[i] + gamma * next_value * not_done - buffer.values[i];
        adv = delta + gamma * gae_lambda * not_done * adv;
        buffer.advantages[i] = adv;
        buffer.returns[i] = adv + buffer.values[i];
    }
}

Tensor ppo_policy_loss(const Tensor& logp_new, const Tensor& logp_old, const Tensor& advantages,
                       double eps) {
    Tensor ratio = ops::exp(ops::sub(logp_new, logp_old));
    Tensor surr1 = ops::mul(ratio, advantages);
    Tensor surr2 = ops::mul(ops::clip(ratio, 1.0 - eps, 1.0 + eps), advantages);
    return ops::scalar_mul(ops::mean(ops::min(surr1, surr2)), -1.0);
}

Tensor value_loss(const Tensor& values, const Tensor& returns) {
    return ops::mean(ops::square(ops::sub(values, returns)));
}

Tensor entropy(const Tensor& log_prob) {
    double n = static_cast<double>(log_prob.rows());
    return ops::scalar_mul(ops::sum(ops::mul(ops::exp(log_prob), log_prob)), -1.0 / n);
}

UpdateStats ppo_update(PolicyValueNet& policy, const RolloutBuffer& buffer,
                       const PPOConfig& config, RmsPropState& opt_state, Rng& rng,
                       const AuxLossHook& aux) {
    std::size_t n = buffer.size();
    if (buffer.advantages.size() != n)
        throw TensorError("ppo_update: advantages not computed (run gae first)");

    UpdateStats stats;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < n; start += config.minibatch) {
            std::size_t end = std::min(n, start + config.minibatch);
            std::size_t m = end - start;

            std::vector<const Observation*> obs(m);
            std::vector<std::size_t> act(m);
            std::vector<double> logp_old(m), adv(m), ret(m);
            for (std::size_t i = 0; i < m; ++i) {
                std::size_t idx = order[start + i];
                obs[i] = &buffer.observations[idx];
                act[i] = static_cast<std::size_t>(buffer.actions[idx]);
                logp_old[i] = buffer.log_probs[idx];
                adv[i] = buffer.advantages[idx];
                ret[i] = buffer.returns[idx];
            }
            if (config.normalize_adv) {
                double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / m;
                double var = 0.0;
                for (double a : adv) var += (a - mean) * (a - mean);
                double sd = std::sqrt(var / m);
                if (sd >= 1e-8)
                    for (auto& a : adv) a = (a - mean) / sd;
            }

            auto f = policy.forward(observation_batch(obs));
            Tensor logp_taken = ops::gather(f.log_prob, act);
            Tensor l_policy = ppo_policy_loss(logp_taken, Tensor::constant({m}, logp_old),
                                              Tensor::constant({m}, adv), config.clip_eps);
            Tensor l_value = value_loss(f.value, Tensor::constant({m, 1}, ret));
            Tensor ent = entropy(f.log_prob);
            Tensor loss = ops::add(l_policy, ops::scalar_mul(l_value, config.value_coef));
            if (config.entropy_coef != 0.0)
                loss = ops::sub(loss, ops::scalar_mul(ent, config.entropy_coef));
            if (aux) {
                Tensor extra = aux(f.rep);
                if (extra.defined()) {
                    stats.loss_aux += extra.item();
                    loss = ops::add(loss, extra);
                }
            }

            if (config.lr > 0.0) {
                GradMap grads = backward(loss, policy.params());
                rmsprop_step(policy.params(), grads, opt_state, config.lr,
                             StepDirection::Descent);
            }

            stats.loss_policy += l_policy.item();
            stats.loss_value += l_value.item();
            stats.entropy += ent.item();
            stats.minibatches += 1;
        }
    }
    if (stats.minibatches > 0) {
        stats.loss_policy /= stats.minibatches;
        stats.loss_value /= stats.minibatches;
        stats.entropy /= stats.minibatches;
        stats.loss_aux /= stats.minibatches;
    }
    return stats;
}

}  // namespace wappo
