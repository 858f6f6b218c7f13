#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "delayrl/delay.hpp"
#include "delayrl/mdp.hpp"
#include "delayrl/models.hpp"
#include "delayrl/qlearn.hpp"
#include "delayrl/rng.hpp"

namespace delayrl {

/// Planning defaults: 50 simulated paths per decision, risk weight 0.01.
/// The "fast" preset trades accuracy for speed with 20 paths.
inline constexpr int kDefaultPlanningPaths = 50;
inline constexpr int kFastPlanningPaths = 20;
inline constexpr double kDefaultRiskWeight = 0.01;

/// State-action value function over base (non-augmented) states.
class QFunction {
public:
    virtual ~QFunction() = default;
    virtual int num_actions() const = 0;
    virtual std::vector<double> values(const StateValue& s) const = 0;
    double value(const StateValue& s, int a) const { return values(s)[a]; }
};

/// Exact q* lookups from a ValueSolution.
class ExactQ final : public QFunction {
public:
    explicit ExactQ(const ValueSolution& sol) : sol_(&sol) {}
    int num_actions() const override { return static_cast<int>(sol_->q_star[0].size()); }
    std::vector<double> values(const StateValue& s) const override {
        return sol_->q_star[s.index()];
    }

private:
    const ValueSolution* sol_;
};

class TabularQView final : public QFunction {
public:
    explicit TabularQView(const TabularQ& q) : q_(&q) {}
    int num_actions() const override { return q_->num_actions(); }
    std::vector<double> values(const StateValue& s) const override {
        return q_->values(s.index());
    }

private:
    const TabularQ* q_;
};

class DqnQView final : public QFunction {
public:
    explicit DqnQView(const DqnAgent& agent, int num_actions)
        : agent_(&agent), num_actions_(num_actions) {}
    int num_actions() const override { return num_actions_; }
    std::vector<double> values(const StateValue& s) const override {
        return agent_->q_values(s);
    }

private:
    const DqnAgent* agent_;
    int num_actions_;
};

/// Value function over augmented states, for the baseline that solves the
/// augmented problem directly.
class AugmentedQFunction {
public:
    virtual ~AugmentedQFunction() = default;
    virtual int num_actions() const = 0;
    virtual std::vector<double> values(const AugmentedState& I) const = 0;
};

/// Exact solution of a built augmented MDP, addressed through the shared
/// index arithmetic.
class ExactAmdpQ final : public AugmentedQFunction {
public:
    ExactAmdpQ(const ValueSolution& sol, const AmdpIndexer& indexer)
        : sol_(&sol), indexer_(indexer) {}
    int num_actions() const override { return static_cast<int>(sol_->q_star[0].size()); }
    std::vector<double> values(const AugmentedState& I) const override {
        const long idx = indexer_.encode(I.base_state.index(), I.action_queue);
        return sol_->q_star[idx];
    }

private:
    const ValueSolution* sol_;
    AmdpIndexer indexer_;
};

/// DQN over encoded augmented states.
class DqnAmdpQ final : public AugmentedQFunction {
public:
    DqnAmdpQ(const DqnAgent& agent, const AugmentedEncoder& encoder, int num_actions)
        : agent_(&agent), encoder_(&encoder), num_actions_(num_actions) {}
    int num_actions() const override { return num_actions_; }
    std::vector<double> values(const AugmentedState& I) const override {
        return agent_->q_values(StateValue::continuous(encoder_->encode(I)));
    }

private:
    const DqnAgent* agent_;
    const AugmentedEncoder* encoder_;
    int num_actions_;
};

/// Per-action sample mean and sample standard deviation ((M-1) denominator;
/// defined as 0 for a single sample) of simulated Q-values.
struct RiskStats {
    std::vector<double> mean;
    std::vector<double> stddev;
    int samples = 0;
};

/// samples[a] holds the M Q-value draws for action a; every action needs at
/// least one sample.
RiskStats risk_stats(const std::vector<std::vector<double>>& samples);

/// Auditable record of one decision.
struct DecisionTrace {
    std::string policy;
    AugmentedState input;
    RiskStats stats;
    int action = 0;
    std::vector<StateValue> sampled_states;  // simulated target states, when kept
    std::vector<std::uint8_t> sampled_terminal;
    int fallbacks = 0;

    /// One line: policy, augmented state, per-action mean/std, action.
    std::string to_line() const;
};

/// Stochastic model-based simulation policy: draws num_paths target-state
/// estimates by rolling the queued actions through the model, scores each
/// action by sample mean minus risk_weight times sample standard deviation
/// of its Q-values (terminal estimates contribute 0), and picks the argmax
/// with lowest-index tie-breaking.
int smbs_select(const QFunction& q, const DynamicsModel& model, const AugmentedState& I,
                int num_paths, double risk_weight, Rng& rng, DecisionTrace* trace = nullptr,
                UnseenFallback fallback = UnseenFallback::Uniform);

/// Deterministic planning baseline: propagates the single most likely
/// target state through the model and acts greedily on it.
int delayed_q_select(const QFunction& q, const DynamicsModel& model, const AugmentedState& I,
                     DecisionTrace* trace = nullptr,
                     UnseenFallback fallback = UnseenFallback::Uniform);

/// Greedy policy of a Q-function over augmented states.
int amdp_select(const AugmentedQFunction& q_aug, const AugmentedState& I,
                DecisionTrace* trace = nullptr);

/// Exact counterpart of the sampling policy: pushes the observed state's
/// point mass through the queued actions' transition matrices, then scores
/// actions by exact conditional mean minus risk_weight times exact
/// (population) standard deviation of q. risk_weight 0 is the exact
/// expected-Q policy.
int exact_expected_q_select(const QFunction& q, const TabularMdp& mdp, const AugmentedState& I,
                            double risk_weight, DecisionTrace* trace = nullptr);

}  // namespace delayrl
