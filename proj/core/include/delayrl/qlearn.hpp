#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "delayrl/delay.hpp"
#include "delayrl/env.hpp"
#include "delayrl/nn.hpp"
#include "delayrl/rng.hpp"

namespace delayrl {

/// Uniform action with probability eps, otherwise the greedy action with
/// lowest-index tie-breaking.
int epsilon_greedy(std::span<const double> q_values, double eps, Rng& rng);

/// Linear anneal from start to end over anneal_steps, constant afterwards.
struct EpsilonSchedule {
    double start = 1.0;
    double end = 0.05;
    long anneal_steps = 1;

    double value(long step) const {
        if (step >= anneal_steps) return end;
        return start + (end - start) * static_cast<double>(step) / static_cast<double>(anneal_steps);
    }
};

/// Exact tabular Q-function with per-pair visit counts for scheduled
/// learning rates: lr(s, a) = base / (1 + visits)^power.
class TabularQ {
public:
    TabularQ(int num_states, int num_actions);

    double value(int s, int a) const { return q_[static_cast<std::size_t>(s) * num_actions_ + a]; }
    std::vector<double> values(int s) const;
    int num_states() const { return num_states_; }
    int num_actions() const { return num_actions_; }

    void set(int s, int a, double v) { q_[static_cast<std::size_t>(s) * num_actions_ + a] = v; }
    long visits(int s, int a) const {
        return visits_[static_cast<std::size_t>(s) * num_actions_ + a];
    }
    void count_visit(int s, int a) { ++visits_[static_cast<std::size_t>(s) * num_actions_ + a]; }

    /// Matrix serialization: `tabq <S> <A>` then one row of values per
    /// state; exact round-trip. Visit counts are not persisted.
    std::string to_string() const;
    static TabularQ from_string(const std::string& text);

private:
    int num_states_;
    int num_actions_;
    std::vector<double> q_;
    std::vector<long> visits_;
};

/// Classic Q-learning backup:
/// q[s][a] += lr * (r + gamma * max_a' q[s'][a'] * (1 - terminated) - q[s][a]).
void tabular_q_update(TabularQ& q, const TransitionRecord& rec, double gamma, double lr);

/// Backup with the visit-count learning-rate schedule.
void tabular_q_update_scheduled(TabularQ& q, const TransitionRecord& rec, double gamma,
                                double lr_base, double lr_power);

/// Fixed-capacity FIFO replay buffer.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(TransitionRecord rec);
    std::size_t size() const { return data_.size(); }
    std::size_t capacity() const { return capacity_; }
    const TransitionRecord& sample(Rng& rng) const;
    const TransitionRecord& operator[](std::size_t i) const { return data_[i]; }
    /// True when the record is still retained (FIFO by insertion order).
    bool contains_insertion(std::size_t insertion_index) const;
    std::size_t total_insertions() const { return inserted_; }

private:
    std::size_t capacity_;
    std::vector<TransitionRecord> data_;
    std::size_t write_pos_ = 0;
    std::size_t inserted_ = 0;
};

/// Fixed-width feature encoding: one-hot for discrete states, bounds
/// normalization to [-1, 1] for continuous ones.
class StateEncoder {
public:
    explicit StateEncoder(const EnvSpec& spec);

    int dim() const { return dim_; }
    void encode(const StateValue& s, std::vector<double>& out) const;
    std::vector<double> encode(const StateValue& s) const;

private:
    StateKind kind_;
    int dim_;
    std::vector<double> lo_, hi_;
};

/// Encoding of an augmented state: base features followed by one-hot
/// encodings of the queued actions, oldest first.
class AugmentedEncoder {
public:
    AugmentedEncoder(const EnvSpec& spec, int delay);

    int dim() const { return base_.dim() + delay_ * num_actions_; }
    void encode(const AugmentedState& I, std::vector<double>& out) const;
    std::vector<double> encode(const AugmentedState& I) const;

private:
    StateEncoder base_;
    int delay_;
    int num_actions_;
};

struct DqnConfig {
    std::vector<int> hidden = {64, 64};
    double learning_rate = 1e-3;
    double gamma = 0.99;
    int batch_size = 64;
    std::size_t replay_capacity = 50'000;
    int target_sync_period = 500;  // updates between target refreshes
};

/// Double DQN: online/target Mlp pair plus replay. The encoder maps stored
/// StateValues to network inputs.
class DqnAgent {
public:
    using Encoder = std::function<void(const StateValue&, std::vector<double>&)>;

    DqnAgent(int input_dim, int num_actions, const DqnConfig& config, Encoder encoder,
             Rng& init_rng);

    std::vector<double> q_values(const StateValue& s) const;

    void observe(TransitionRecord rec) { replay_.push(std::move(rec)); }
    ReplayBuffer& replay() { return replay_; }
    const ReplayBuffer& replay() const { return replay_; }

    /// Samples a batch from replay, runs one DDQN step, handles periodic
    /// target syncs. No-op (returns 0 loss) until a full batch is available.
    double update(Rng& rng);

    const Mlp& online() const { return online_; }
    const Mlp& target() const { return target_; }
    Mlp& online() { return online_; }
    void set_online(Mlp net);
    long updates_done() const { return updates_; }
    const DqnConfig& config() const { return cfg_; }

    void sync_target() { target_ = online_; }

    friend double ddqn_update(DqnAgent& agent, std::span<const TransitionRecord> batch);

private:
    DqnConfig cfg_;
    int num_actions_;
    Encoder encode_;
    Mlp online_;
    Mlp target_;
    ReplayBuffer replay_;
    AdamState adam_;
    long updates_ = 0;

    // scratch
    mutable std::vector<double> input_;
    mutable MlpWorkspace ws_;
};

/// One Adam step on the mean squared error against the van Hasselt target
/// r + gamma * Q_target(s', argmax_a Q_online(s', a)) with terminal
/// masking. Returns the pre-step loss. Does not count toward the agent's
/// periodic target sync (callers using update() get that automatically).
double ddqn_update(DqnAgent& agent, std::span<const TransitionRecord> batch);

}  // namespace delayrl
