#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "delayrl/delay.hpp"
#include "delayrl/mdp.hpp"
#include "delayrl/rng.hpp"

namespace delayrl {

/// Exact law of the target state given an augmented state: the observed
/// state's point mass pushed through the per-action transition matrices of
/// the queued actions, in order. Throws std::invalid_argument when the
/// chained products exceed work_cap multiply-adds.
std::vector<double> target_state_distribution(const TabularMdp& mdp, const AugmentedState& I,
                                              double work_cap = 1e9);

/// Affine reward shift (used to meet positive-reward assumptions on
/// benchmark tasks whose rewards include zeros). Rejects MDPs with terminal
/// states, whose rewards are pinned at zero.
TabularMdp shift_rewards(const TabularMdp& mdp, double delta);

struct Theorem1Report {
    int delay = 0;
    long states_checked = 0;
    /// Worst shortfall of the simulation policy's action under the exact
    /// augmented Q-function, across all reachable augmented states.
    double max_value_gap = 0.0;
    struct Mismatch {
        long aug_index;
        int smbs_action;
        int amdp_action;
        double value_gap;
    };
    std::vector<Mismatch> mismatches;
    bool ok() const { return mismatches.empty(); }
    std::string summary() const;
};

/// Mechanized equivalence check for deterministic MDPs: solves the base and
/// augmented problems exactly, enumerates every reachable augmented state,
/// and compares the simulation policy (exact q*, exact model) against the
/// exact augmented-optimal policy. Truly tied actions may be ordered
/// differently by the two solvers' rounding; a state counts as mismatched
/// only when the simulation policy's action is worse than the augmented
/// optimum by more than value_tol.
Theorem1Report verify_theorem1(const TabularMdp& mdp, int delay, int num_paths,
                               double risk_weight, double value_tol = 1e-6,
                               long state_cap = 1'000'000);

struct Theorem2Report {
    double delta = 0.0;
    int num_paths = 0;  // M
    long trials = 0;
    double empirical_frequency = 0.0;
    double bound = 0.0;               // |A| / delta^2
    double expected_v_given_i = 0.0;  // E[V*(s) | I]
    std::vector<double> population_mean;  // exact conditional mean of q* per action
    std::vector<double> population_std;   // exact conditional std of q* per action
    double event_threshold = 0.0;         // E[V*|I]/|A| - (delta/sqrt(M)) max_a std
    std::string summary() const;
};

/// Measures, over independent M-sample draws of the simulated mean Q-value,
/// how often max_a of the sample mean falls at or below the bound's
/// threshold, and reports it next to |A|/delta^2. Requires strictly
/// positive rewards.
Theorem2Report verify_theorem2(const TabularMdp& mdp, const AugmentedState& I, double delta,
                               int num_paths, long trials, Rng& rng);

}  // namespace delayrl
