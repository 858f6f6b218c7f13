#include "delayrl/delay.hpp"

#include <stdexcept>

namespace delayrl {

std::string AugmentedState::to_string() const {
    std::string out = base_state.to_string() + "|";
    for (std::size_t i = 0; i < action_queue.size(); ++i) {
        if (i) out.push_back(',');
        out += std::to_string(action_queue[i]);
    }
    return out;
}

DelayedEnv::DelayedEnv(std::unique_ptr<Environment> env, int delay, QueueInit queue_init)
    : env_(std::move(env)), delay_(delay), queue_init_(std::move(queue_init)) {
    if (delay < 0) throw std::invalid_argument("DelayedEnv: delay must be nonnegative");
    if (!queue_init_) {
        const int actions = env_->spec().action_count;
        queue_init_ = [actions](Rng& rng) { return rng.uniform_int(actions); };
    }
}

AugmentedState DelayedEnv::reset(std::uint64_t seed) {
    rng_ = Rng::derive(seed, 0x64656c6179);
    constexpr int kMaxAttempts = 100;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        pending_.clear();
        observed_ = env_->reset(rng_.next_u64());
        hidden_ = observed_;
        done_ = false;
        bool died = false;
        for (int i = 0; i < delay_ && !died; ++i) {
            const int a = queue_init_(rng_);
            const StepOutcome out = env_->step(a);
            pending_.push_back({hidden_, a, out.state, out.reward, out.terminated});
            hidden_ = out.state;
            died = out.terminated;
        }
        if (!died) return augmented_state();
        // The episode ended before control could begin. Keep the transitions
        // (they are valid training data) and try again.
        flush_pending();
    }
    throw std::runtime_error("DelayedEnv: queue priming kept terminating the episode");
}

DelayedStep DelayedEnv::step(int action) {
    if (done_) throw std::logic_error("DelayedEnv: step() on a finished episode");
    const StepOutcome out = env_->step(action);
    pending_.push_back({hidden_, action, out.state, out.reward, out.terminated});
    hidden_ = out.state;

    TransitionRecord revealed = pending_.front();
    pending_.pop_front();
    observed_ = revealed.s_next;
    drained_.push_back(std::move(revealed));

    DelayedStep result;
    result.reward = drained_.back().reward;
    result.episode_done = out.terminated;
    result.state = augmented_state();
    if (out.terminated) {
        done_ = true;
        flush_pending();
    }
    return result;
}

std::vector<TransitionRecord> DelayedEnv::drain_transitions() {
    std::vector<TransitionRecord> out;
    out.swap(drained_);
    return out;
}

void DelayedEnv::flush_pending() {
    for (auto& rec : pending_) drained_.push_back(std::move(rec));
    pending_.clear();
}

AugmentedState DelayedEnv::augmented_state() const {
    AugmentedState aug;
    aug.base_state = observed_;
    aug.action_queue.reserve(pending_.size());
    for (const auto& rec : pending_) aug.action_queue.push_back(rec.a);
    return aug;
}

}  // namespace delayrl
