#include "wappo/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace wappo {

std::string mode_name(TrainMode mode) {
    switch (mode) {
        case TrainMode::Wappo: return "wappo";
        case TrainMode::Ppo: return "ppo";
        case TrainMode::Rdr: return "rdr";
    }
    throw TensorError("unknown train mode");
}

TrainMode parse_mode(const std::string& name) {
    if (name == "wappo") return TrainMode::Wappo;
    if (name == "ppo") return TrainMode::Ppo;
    if (name == "rdr") return TrainMode::Rdr;
    throw TensorError("unknown train mode: " + name);
}

const Observation& TargetBuffer::sample(Rng& rng) const {
    if (observations_.empty()) throw TensorError("target buffer is empty");
    return observations_[rng.uniform_int(observations_.size())];
}

void TargetBuffer::push(Observation obs) {
    if (observations_.size() >= capacity_)
        throw TensorError("target buffer capacity exceeded");
    observations_.push_back(std::move(obs));
}

void fill_target_buffer(Domain& target, TargetBuffer& buffer, std::size_t n, Rng& rng) {
    if (n > buffer.capacity()) throw TensorError("fill_target_buffer: n exceeds capacity");
    buffer.clear();
    if (n == 0) return;
    Observation obs = target.reset();
    for (std::size_t i = 0; i < n; ++i) {
        buffer.push(obs);
        int action = static_cast<int>(rng.uniform_int(target.action_count()));
        StepResult res = target.step(action);
        obs = res.done ? target.reset() : res.observation;
    }
}

TransferBatch assemble_transfer_batch(const RolloutBuffer& rollout, const TargetBuffer& buffer,
                                      std::size_t m, Rng& rng) {
    if (rollout.size() < m) throw TensorError("assemble_transfer_batch: rollout shorter than m");
    if (buffer.empty()) throw TensorError("assemble_transfer_batch: target buffer is empty");

    std::vector<std::size_t> order(rollout.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    TransferBatch batch;
    for (std::size_t i = 0; i < m; ++i) {
        std::size_t idx = order[i];
        batch.source_indices.push_back(idx);
        batch.source_obs.push_back(&rollout.observations[idx]);
        batch.source_actions.push_back(rollout.actions[idx]);
        batch.source_rewards.push_back(rollout.rewards[idx]);
        batch.target_obs.push_back(&buffer.sample(rng));
    }
    return batch;
}

EvalStats evaluate_policy(const PolicyValueNet& policy, Domain& domain, int episodes) {
    if (episodes < 1) throw TensorError("evaluate_policy: episodes must be >= 1");
    NoGradGuard no_grad;
    std::vector<double> returns;
    returns.reserve(episodes);
    for (int e = 0; e < episodes; ++e) {
        Observation obs = domain.reset();
        double ret = 0.0;
        while (true) {
            Tensor x = Tensor::constant({static_cast<std::size_t>(kObsDim)}, obs.pixels);
            PolicyValueNet::Forward fwd = policy.forward(x);
            const auto& logp = fwd.log_prob.data();
            int action = 0;
            for (int a = 1; a < policy.n_actions(); ++a)
                if (logp[a] > logp[action]) action = a;
            StepResult res = domain.step(action);
            ret += res.reward;
            if (res.done) break;
            obs = res.observation;
        }
        returns.push_back(ret);
    }
    EvalStats stats;
    stats.mean = std::accumulate(returns.begin(), returns.end(), 0.0) / returns.size();
    double var = 0.0;
    for (double r : returns) var += (r - stats.mean) * (r - stats.mean);
    stats.stddev = std::sqrt(var / returns.size());
    return stats;
}

TrainResult wappo_train(const WappoConfig& config, Domain& source, Domain& target) {
    // Fixed stream layout, independent of mode, so that modes differing only
    // in inactive loss terms share the exact parameter trajectory.
    Rng root(config.seed);
    std::uint64_t s_policy = root.next_u64();
    std::uint64_t s_critic = root.next_u64();
    std::uint64_t s_env = root.next_u64();
    std::uint64_t s_shuffle = root.next_u64();
    std::uint64_t s_critic_batch = root.next_u64();
    std::uint64_t s_conf_target = root.next_u64();
    std::uint64_t s_buffer = root.next_u64();
    std::uint64_t s_eval = root.next_u64();

    Rng env_rng(s_env), shuffle_rng(s_shuffle), critic_batch_rng(s_critic_batch),
        conf_target_rng(s_conf_target), buffer_rng(s_buffer);

    TrainResult result;
    result.policy = std::make_unique<PolicyValueNet>(kObsDim, source.action_count(), s_policy);
    result.critic = std::make_unique<CriticNet>(PolicyValueNet::kRepDim,
                                                config.confusion.hidden_layers,
                                                config.confusion.hidden_width, s_critic);
    PolicyValueNet& policy = *result.policy;
    CriticNet& critic = *result.critic;
    RmsPropState opt_policy, opt_critic;

    TargetBuffer target_buffer(config.target_buffer_capacity);
    bool needs_target = config.mode != TrainMode::Ppo;
    if (needs_target)
        fill_target_buffer(target, target_buffer, config.target_buffer_capacity, buffer_rng);

    auto features_of = [&](const std::vector<const Observation*>& obs, bool attached) {
        Tensor batch = observation_batch(obs);
        if (attached) return policy.features(batch);
        NoGradGuard no_grad;
        return policy.features(batch);
    };
    auto sample_targets = [&](std::size_t m, Rng& rng) {
        std::vector<const Observation*> obs(m);
        for (auto& o : obs) o = &target_buffer.sample(rng);
        return obs;
    };

    double last_src_return = 0.0, last_tgt_eval = 0.0;
    long env_steps = 0;
    int update = 0;

    try {
        while (env_steps < config.total_timesteps) {
            auto t0 = std::chrono::steady_clock::now();
            RolloutBuffer rollout =
                collect_rollout(policy, source, config.ppo.horizon, env_rng);
            env_steps += config.ppo.horizon;

            std::size_t m = std::min<std::size_t>(config.ppo.minibatch, rollout.size());

            // Critic inner loop (Wasserstein adversary), wappo mode only.
            double critic_obj = 0.0;
            if (config.mode == TrainMode::Wappo) {
                if (config.refresh_target_buffer)
                    fill_target_buffer(target, target_buffer, config.target_buffer_capacity,
                                       buffer_rng);
                for (int j = 0; j < config.confusion.n_critic; ++j) {
                    TransferBatch tb =
                        assemble_transfer_batch(rollout, target_buffer, m, critic_batch_rng);
                    Tensor src_reps = features_of(tb.source_obs, /*attached=*/false);
                    Tensor tgt_reps = features_of(tb.target_obs, /*attached=*/false);
                    critic_obj = critic_update_step(critic, src_reps, tgt_reps, opt_critic,
                                                    config.confusion.critic_lr,
                                                    config.confusion.clip_c);
                    result.events.push_back(TrainEvent::CriticStep);
                    result.critic_max_abs_w.push_back(max_abs_param(critic.params()));
                }
            }

            gae(rollout, config.ppo.gamma, config.ppo.gae_lambda, rollout.bootstrap_value);

            double conf_sum = 0.0;
            int conf_count = 0;
            AuxLossHook hook = nullptr;
            if (config.mode == TrainMode::Wappo && config.confusion.lambda > 0.0) {
                hook = [&](const Tensor& src_reps) -> Tensor {
                    auto tgt_obs = sample_targets(src_reps.rows(), conf_target_rng);
                    Tensor tgt_reps = policy.features(observation_batch(tgt_obs));
                    Tensor conf = confusion_loss(critic, src_reps, tgt_reps);
                    conf_sum += conf.item();
                    conf_count += 1;
                    return ops::scalar_mul(conf, config.confusion.lambda);
                };
            } else if (config.mode == TrainMode::Rdr) {
                hook = [&](const Tensor& src_reps) -> Tensor {
                    auto tgt_obs = sample_targets(src_reps.rows(), conf_target_rng);
                    Tensor tgt_reps = policy.features(observation_batch(tgt_obs));
                    Tensor loss = rdr_loss(src_reps, tgt_reps);
                    conf_sum += loss.item();
                    conf_count += 1;
                    return ops::scalar_mul(loss, config.rdr_weight);
                };
            }

            UpdateStats stats =
                ppo_update(policy, rollout, config.ppo, opt_policy, shuffle_rng, hook);
            result.events.push_back(TrainEvent::RlUpdate);

            double w_est = 0.0;
            if (config.mode == TrainMode::Wappo) {
                TransferBatch tb =
                    assemble_transfer_batch(rollout, target_buffer, m, critic_batch_rng);
                w_est = wasserstein_estimate(critic, features_of(tb.source_obs, false),
                                             features_of(tb.target_obs, false));
            }

            if (!rollout.episode_returns.empty())
                last_src_return =
                    std::accumulate(rollout.episode_returns.begin(),
                                    rollout.episode_returns.end(), 0.0) /
                    rollout.episode_returns.size();

            bool last_update = env_steps >= config.total_timesteps;
            if (update % config.eval_every == 0 || last_update) {
                auto tgt_eval = target.fresh(s_eval ^ 0xe7a1ull);
                last_tgt_eval =
                    evaluate_policy(policy, *tgt_eval, config.eval_episodes).mean;
            }

            auto t1 = std::chrono::steady_clock::now();
            TrainLogRow row;
            row.update = update;
            row.env_steps = env_steps;
            row.src_return_mean = last_src_return;
            row.tgt_return_mean = last_tgt_eval;
            row.loss_policy = stats.loss_policy;
            row.loss_value = stats.loss_value;
            row.loss_conf = conf_count > 0 ? conf_sum / conf_count : 0.0;
            row.w_estimate = w_est;
            row.critic_obj = critic_obj;
            row.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
            result.log.rows.push_back(row);
            ++update;
        }
    } catch (const TensorError& e) {
        result.aborted = true;
        result.abort_reason = e.what();
        return result;
    }

    auto src_eval = source.fresh(s_eval ^ 0x5a1ull);
    auto tgt_eval = target.fresh(s_eval ^ 0xe7a1ull);
    result.final_src_return =
        evaluate_policy(policy, *src_eval, config.final_eval_episodes).mean;
    result.final_tgt_return =
        evaluate_policy(policy, *tgt_eval, config.final_eval_episodes).mean;
    return result;
}

}  // namespace wappo
