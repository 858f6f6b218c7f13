#pragma once

#include <stdexcept>
#include <vector>

#include "delayrl/env.hpp"

namespace delayrl {

/// One stochastic outcome of applying an action: the event semantics
/// (teleports, falls, goal bonuses) stay attached to the sampled branch, so
/// stepping and the exported tensor derive from the same enumeration.
struct Branch {
    double prob;
    int next;
    double reward;
    bool terminated = false;
};

/// Base for the discrete environments. Subclasses enumerate branches(s, a)
/// and everything else (stepping, tabular export) follows.
class DiscreteEnv : public Environment {
public:
    const EnvSpec& spec() const override { return spec_; }

    StateValue reset(std::uint64_t seed) override {
        rng_ = Rng::derive(seed, 0x656e76);
        state_ = initial_state();
        done_ = false;
        return StateValue::discrete(state_);
    }

    StepOutcome step(int action) override {
        if (done_) throw std::logic_error(spec_.name + ": step() on a finished episode");
        if (action < 0 || action >= spec_.action_count)
            throw std::invalid_argument(spec_.name + ": invalid action");
        const auto bs = branches(state_, action);
        const double u = rng_.uniform();
        double acc = 0.0;
        const Branch* chosen = &bs.back();
        for (const auto& b : bs) {
            acc += b.prob;
            if (u < acc) {
                chosen = &b;
                break;
            }
        }
        state_ = chosen->next;
        done_ = chosen->terminated;
        return {StateValue::discrete(state_), chosen->reward, chosen->terminated};
    }

    TabularMdp as_tabular(double discount) const override {
        TabularMdp mdp(spec_.num_states, spec_.action_count, discount);
        for (int s = 0; s < spec_.num_states; ++s) {
            if (terminal_state(s)) {
                mdp.set_terminal(s, true);
                for (int a = 0; a < spec_.action_count; ++a)
                    mdp.set_row(s, a, {{s, 1.0}});
                continue;
            }
            for (int a = 0; a < spec_.action_count; ++a) {
                double expected_reward = 0.0;
                for (const auto& b : branches(s, a)) {
                    mdp.add_prob(s, a, b.next, b.prob);
                    expected_reward += b.prob * b.reward;
                }
                mdp.set_reward(s, a, expected_reward);
            }
        }
        mdp.set_initial_state(initial_state());
        return mdp;
    }

    int current_state() const { return state_; }

protected:
    virtual std::vector<Branch> branches(int s, int a) const = 0;
    virtual int initial_state() const = 0;
    virtual bool terminal_state(int) const { return false; }

    EnvSpec spec_;
    Rng rng_{0};
    int state_ = 0;
    bool done_ = true;
};

}  // namespace delayrl
