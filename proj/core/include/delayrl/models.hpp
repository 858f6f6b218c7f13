#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "delayrl/delay.hpp"
#include "delayrl/mdp.hpp"
#include "delayrl/nn.hpp"
#include "delayrl/rng.hpp"
#include "delayrl/state.hpp"

namespace delayrl {

struct SampleOutcome {
    StateValue state;
    bool terminated = false;
};

/// Raised for a tabular (s, a) pair with no observed mass and no smoothing.
class UnseenPairError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Probabilistic one-step model of the environment dynamics.
class DynamicsModel {
public:
    virtual ~DynamicsModel() = default;

    /// Draws from the model's conditional next-state distribution; nullopt
    /// when the pair has no support.
    virtual std::optional<SampleOutcome> try_sample_next(const StateValue& s, int a,
                                                         Rng& rng) const = 0;

    /// Most likely next state: tabular argmax (lowest index on ties) or the
    /// Gaussian mean.
    virtual std::optional<SampleOutcome> try_mode_next(const StateValue& s, int a) const = 0;

    /// State count for discrete models (0 for continuous); used by the
    /// uniform fallback during planning.
    virtual int num_states() const { return 0; }
};

/// Strict variants: throw UnseenPairError instead of returning nullopt.
SampleOutcome sample_next(const DynamicsModel& model, const StateValue& s, int a, Rng& rng);
SampleOutcome mode_next(const DynamicsModel& model, const StateValue& s, int a);

enum class UnseenFallback {
    Error,    // propagate UnseenPairError
    Uniform,  // substitute a uniform draw over states and keep going
};

struct RolloutResult {
    StateValue state;
    bool terminated = false;
    int fallbacks = 0;  // uniform substitutions along the way
};

/// Chains sample_next through the queued actions. Stops early when a
/// sampled step terminates; downstream Q-values of a terminal result are 0
/// by convention.
RolloutResult rollout_sample(const DynamicsModel& model, const StateValue& start,
                             std::span<const int> actions, Rng& rng,
                             UnseenFallback fallback = UnseenFallback::Uniform);

/// Chains mode_next (the deterministic-planning propagation).
RolloutResult rollout_mode(const DynamicsModel& model, const StateValue& start,
                           std::span<const int> actions,
                           UnseenFallback fallback = UnseenFallback::Uniform);

/// Transition-frequency model for discrete tasks. Probabilities are
/// (N + smoothing) / sum(N + smoothing). A state is predicted terminal when
/// the majority of observed arrivals there were terminal.
class TabularModel : public DynamicsModel {
public:
    TabularModel(int num_states, int num_actions, double smoothing = 0.0);

    /// Increments transition and arrival counts.
    void fit_update(std::span<const TransitionRecord> batch);

    std::uint64_t count(int s, int a, int next) const;
    std::uint64_t total(int s, int a) const;
    double prob(int s, int a, int next) const;
    std::vector<double> probs(int s, int a) const;
    bool arrival_terminal(int s) const;

    std::optional<SampleOutcome> try_sample_next(const StateValue& s, int a,
                                                 Rng& rng) const override;
    std::optional<SampleOutcome> try_mode_next(const StateValue& s, int a) const override;
    int num_states() const override { return num_states_; }
    int num_actions() const { return num_actions_; }
    double smoothing() const { return smoothing_; }

    /// Text format mirrors the mdp serialization with counts in place of
    /// probabilities; exact round-trip.
    void write(std::ostream& out) const;
    std::string to_string() const;
    static TabularModel read(std::istream& in);
    static TabularModel from_string(const std::string& text);

private:
    std::size_t idx(int s, int a) const {
        return (static_cast<std::size_t>(s) * num_actions_ + a) * num_states_;
    }

    int num_states_;
    int num_actions_;
    double smoothing_;
    std::vector<std::uint64_t> counts_;          // dense S*A*S
    std::vector<std::uint64_t> row_totals_;      // S*A
    std::vector<std::uint64_t> arrivals_;        // per state
    std::vector<std::uint64_t> terminal_arrivals_;
};

/// Gaussian network model for continuous tasks: an Mlp maps
/// (state ++ one-hot action) to per-dimension state-delta means and
/// log-stds plus a termination logit. Log-stds are clamped to
/// [logstd_lo, logstd_hi].
class GaussianDynamicsModel : public DynamicsModel {
public:
    GaussianDynamicsModel(int state_dim, int num_actions, std::vector<int> hidden, Rng& init_rng,
                          double learning_rate = 1e-3, double logstd_lo = -5.0,
                          double logstd_hi = 2.0);

    /// One Adam step on the batch: Gaussian negative log-likelihood of the
    /// state deltas plus binary cross-entropy on termination. Returns the
    /// pre-step mean loss.
    double fit_update(std::span<const TransitionRecord> batch);

    struct Prediction {
        std::vector<double> mean_delta;
        std::vector<double> stddev;
        double termination_prob;
    };
    Prediction predict(const StateValue& s, int a) const;

    std::optional<SampleOutcome> try_sample_next(const StateValue& s, int a,
                                                 Rng& rng) const override;
    std::optional<SampleOutcome> try_mode_next(const StateValue& s, int a) const override;

    const Mlp& network() const { return net_; }
    Mlp& network() { return net_; }
    /// Replaces the network (e.g. from a snapshot); optimizer state resets.
    void set_network(Mlp net);
    AdamState& optimizer() { return adam_; }
    int state_dim() const { return state_dim_; }

private:
    void encode(const StateValue& s, int a, std::vector<double>& out) const;

    int state_dim_;
    int num_actions_;
    double logstd_lo_, logstd_hi_;
    Mlp net_;
    AdamState adam_;
};

/// The true dynamics of an exact MDP, exposed through the model interface;
/// the oracle model used by the theorem checks.
class ExactTabularDynamics : public DynamicsModel {
public:
    explicit ExactTabularDynamics(const TabularMdp& mdp) : mdp_(&mdp) {}

    std::optional<SampleOutcome> try_sample_next(const StateValue& s, int a,
                                                 Rng& rng) const override;
    std::optional<SampleOutcome> try_mode_next(const StateValue& s, int a) const override;
    int num_states() const override { return mdp_->num_states(); }

private:
    const TabularMdp* mdp_;
};

}  // namespace delayrl
