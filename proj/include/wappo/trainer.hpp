#pragma once

#include "wappo/confusion.hpp"
#include "wappo/env.hpp"
#include "wappo/ppo.hpp"

#include <memory>
#include <string>
#include <vector>

namespace wappo {

enum class TrainMode { Wappo, Ppo, Rdr };

std::string mode_name(TrainMode mode);
TrainMode parse_mode(const std::string& name);

struct WappoConfig {
    PPOConfig ppo;
    ConfusionConfig confusion;
    TrainMode mode = TrainMode::Wappo;
    std::size_t target_buffer_capacity = 5000;
    bool refresh_target_buffer = false;  // refill each update instead of once up front
    double rdr_weight = 10.0;
    int eval_episodes = 5;
    int final_eval_episodes = 20;
    int eval_every = 5;  // updates between greedy evals
    long total_timesteps = 150000;
    std::uint64_t seed = 0;
};

// Fixed-capacity store of target-domain observations. Never holds rewards
// or actions; sampling is uniform with replacement.
class TargetBuffer {
public:
    explicit TargetBuffer(std::size_t capacity) : capacity_(capacity) {}
    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return observations_.size(); }
    bool empty() const { return observations_.empty(); }
    const Observation& at(std::size_t i) const { return observations_[i]; }
    const Observation& sample(Rng& rng) const;
    void clear() { observations_.clear(); }
    void push(Observation obs);

private:
    std::size_t capacity_;
    std::vector<Observation> observations_;
};

// Collects n observations from the target domain under a uniform-random
// policy. Rewards are dropped on the floor.
void fill_target_buffer(Domain& target, TargetBuffer& buffer, std::size_t n, Rng& rng);

// The dataset quadruples: source timestep-aligned fields plus
// index-aligned but content-unpaired target observations.
struct TransferBatch {
    std::vector<std::size_t> source_indices;       // into the rollout
    std::vector<const Observation*> source_obs;    // x_s
    std::vector<int> source_actions;               // a_s
    std::vector<double> source_rewards;            // r_s
    std::vector<const Observation*> target_obs;    // x_t, sampled with replacement
};

TransferBatch assemble_transfer_batch(const RolloutBuffer& rollout, const TargetBuffer& buffer,
                                      std::size_t m, Rng& rng);

struct TrainLogRow {
    int update = 0;
    long env_steps = 0;
    double src_return_mean = 0.0;
    double tgt_return_mean = 0.0;
    double loss_policy = 0.0;
    double loss_value = 0.0;
    double loss_conf = 0.0;
    double w_estimate = 0.0;
    double critic_obj = 0.0;
    double wall_ms = 0.0;
};

struct TrainLog {
    std::vector<TrainLogRow> rows;
};

enum class TrainEvent { CriticStep, RlUpdate };

struct EvalStats {
    double mean = 0.0;
    double stddev = 0.0;
};

// Greedy (argmax) evaluation; no learning, no stored experience.
EvalStats evaluate_policy(const PolicyValueNet& policy, Domain& domain, int episodes);

struct TrainResult {
    std::unique_ptr<PolicyValueNet> policy;
    std::unique_ptr<CriticNet> critic;
    TrainLog log;
    std::vector<TrainEvent> events;           // critic/RL interleave trace
    std::vector<double> critic_max_abs_w;     // after every critic step
    double final_src_return = 0.0;
    double final_tgt_return = 0.0;
    bool aborted = false;                     // NaN abort; params hold last good state
    std::string abort_reason;
};

// Algorithm-1 style training: per outer iteration, collect a source rollout,
// run n_critic critic steps on fresh transfer batches (wappo mode), then the
// PPO epoch loop with the mode's auxiliary loss.
TrainResult wappo_train(const WappoConfig& config, Domain& source, Domain& target);

}  // namespace wappo
