#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <vector>

#include "delayrl/env.hpp"
#include "delayrl/rng.hpp"
#include "delayrl/state.hpp"

namespace delayrl {

/// What a controller sees in a d-step delayed environment: the most recent
/// observation plus the d actions submitted since it was made.
struct AugmentedState {
    StateValue base_state;
    std::vector<int> action_queue;  // oldest first

    bool operator==(const AugmentedState&) const = default;
    std::string to_string() const;
};

/// A reconstructed non-delayed transition, pairing a state with the action
/// that was actually applied to it. Emitted in non-delayed time order.
struct TransitionRecord {
    StateValue s;
    int a = 0;
    StateValue s_next;
    double reward = 0.0;
    bool terminated = false;
};

struct DelayedStep {
    AugmentedState state;
    double reward = 0.0;  // the newly revealed (d-steps-old) reward
    bool episode_done = false;
};

using QueueInit = std::function<int(Rng&)>;

/// Wraps an environment so that observations lag actions by a constant
/// number of steps. Actions are applied to the hidden current state as soon
/// as they are submitted; what the caller gets back is the observation from
/// d steps earlier. Episode termination is signaled immediately (the
/// wrapper never lets a dead episode be acted on), at which point every
/// still-delayed transition is released for draining.
class DelayedEnv {
public:
    /// queue_init supplies the d priming actions on every reset (default
    /// uniform over actions). Priming actions are genuinely executed.
    DelayedEnv(std::unique_ptr<Environment> env, int delay, QueueInit queue_init = {});

    const EnvSpec& spec() const { return env_->spec(); }
    int delay() const { return delay_; }
    Environment& env() { return *env_; }

    /// Starts an episode: resets the underlying environment and primes the
    /// action queue. If priming itself terminates the episode (possible in
    /// episodic tasks with long delays) the reset retries with fresh draws;
    /// transitions from abandoned attempts are still drainable.
    AugmentedState reset(std::uint64_t seed);

    /// Submits an action. Throws std::logic_error once the episode is done.
    DelayedStep step(int action);

    /// Returns and clears every fully revealed transition since last drain.
    std::vector<TransitionRecord> drain_transitions();

    /// Transitions that happened but have not been revealed yet (at most d).
    std::size_t pending_count() const { return pending_.size(); }

    /// Releases still-delayed transitions, e.g. at the end of a run.
    void flush_pending();

    bool episode_done() const { return done_; }

    /// The hidden current state of the underlying environment.
    const StateValue& hidden_state() const { return hidden_; }

    AugmentedState augmented_state() const;

private:
    std::unique_ptr<Environment> env_;
    int delay_;
    QueueInit queue_init_;
    Rng rng_{0};

    StateValue observed_;
    StateValue hidden_;
    std::deque<TransitionRecord> pending_;
    std::vector<TransitionRecord> drained_;
    bool done_ = true;
};

}  // namespace delayrl
