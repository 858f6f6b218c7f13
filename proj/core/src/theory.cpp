#include "delayrl/theory.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

#include "delayrl/models.hpp"
#include "delayrl/policies.hpp"
#include "delayrl/textio.hpp"

namespace delayrl {

std::vector<double> target_state_distribution(const TabularMdp& mdp, const AugmentedState& I,
                                              double work_cap) {
    const int S = mdp.num_states();
    const double d = static_cast<double>(I.action_queue.size());
    if (d * S * S > work_cap)
        throw std::invalid_argument("target_state_distribution: work cap exceeded");
    std::vector<double> dist(S, 0.0);
    dist[I.base_state.index()] = 1.0;
    std::vector<double> next(S, 0.0);
    for (int a : I.action_queue) {
        std::fill(next.begin(), next.end(), 0.0);
        for (int s = 0; s < S; ++s) {
            const double p = dist[s];
            if (p == 0.0) continue;
            for (const auto& e : mdp.row(s, a)) next[e.next] += p * e.prob;
        }
        std::swap(dist, next);
    }
    return dist;
}

TabularMdp shift_rewards(const TabularMdp& mdp, double delta) {
    for (int s = 0; s < mdp.num_states(); ++s)
        if (mdp.terminal(s))
            throw std::invalid_argument(
                "shift_rewards: terminal states pin rewards at zero; shift is undefined");
    TabularMdp out = mdp;
    for (int s = 0; s < mdp.num_states(); ++s)
        for (int a = 0; a < mdp.num_actions(); ++a)
            out.set_reward(s, a, mdp.reward(s, a) + delta);
    return out;
}

std::string Theorem1Report::summary() const {
    std::string s = "theorem1: d=" + std::to_string(delay) + " states=" +
                    std::to_string(states_checked) + " mismatches=" +
                    std::to_string(mismatches.size()) + " max_value_gap=" +
                    format_double(max_value_gap);
    return s;
}

Theorem1Report verify_theorem1(const TabularMdp& mdp, int delay, int num_paths,
                               double risk_weight, double value_tol, long state_cap) {
    if (!mdp.deterministic())
        throw std::invalid_argument(
            "verify_theorem1: determinism violation, the input MDP has stochastic rows");

    const TabularMdp amdp = build_amdp(mdp, delay, state_cap);
    const AmdpIndexer indexer(mdp.num_states(), mdp.num_actions(), delay);
    const ValueSolution base_sol = value_iteration(mdp);
    const ValueSolution aug_sol = value_iteration(amdp);
    const ExactQ exact_q(base_sol);
    const ExactTabularDynamics exact_model(mdp);

    // Reachable augmented states: breadth-first from every initial
    // augmented state under every action.
    const long N = indexer.num_augmented();
    std::vector<std::uint8_t> seen(N, 0);
    std::deque<long> frontier;
    for (long i = 0; i < N; ++i) {
        if (amdp.initial_dist()[i] > 0.0) {
            seen[i] = 1;
            frontier.push_back(i);
        }
    }
    while (!frontier.empty()) {
        const long i = frontier.front();
        frontier.pop_front();
        for (int a = 0; a < amdp.num_actions(); ++a) {
            const long j = amdp.successor(static_cast<int>(i), a);
            if (!seen[j]) {
                seen[j] = 1;
                frontier.push_back(j);
            }
        }
    }

    Theorem1Report report;
    report.delay = delay;
    Rng rng(0x7468656f72656d31ULL);
    std::vector<int> queue;
    for (long i = 0; i < N; ++i) {
        if (!seen[i]) continue;
        ++report.states_checked;
        int base;
        indexer.decode(i, base, queue);
        const AugmentedState I{StateValue::discrete(base), queue};
        const int smbs_action =
            smbs_select(exact_q, exact_model, I, num_paths, risk_weight, rng);
        const auto& q_row = aug_sol.q_star[i];
        const int amdp_action = argmax_lowest(q_row);
        const double gap = q_row[amdp_action] - q_row[smbs_action];
        report.max_value_gap = std::max(report.max_value_gap, gap);
        if (gap > value_tol)
            report.mismatches.push_back({i, smbs_action, amdp_action, gap});
    }
    return report;
}

std::string Theorem2Report::summary() const {
    return "theorem2: delta=" + format_double(delta) + " M=" + std::to_string(num_paths) +
           " trials=" + std::to_string(trials) + " frequency=" +
           format_double(empirical_frequency) + " bound=" + format_double(bound);
}

Theorem2Report verify_theorem2(const TabularMdp& mdp, const AugmentedState& I, double delta,
                               int num_paths, long trials, Rng& rng) {
    if (!(delta > 0.0)) throw std::invalid_argument("verify_theorem2: delta must be positive");
    if (num_paths < 1 || trials < 1)
        throw std::invalid_argument("verify_theorem2: positive path and trial counts required");
    for (int s = 0; s < mdp.num_states(); ++s)
        for (int a = 0; a < mdp.num_actions(); ++a)
            if (!(mdp.reward(s, a) > 0.0))
                throw std::invalid_argument(
                    "verify_theorem2: the bound assumes a positive reward function");

    const int S = mdp.num_states();
    const int A = mdp.num_actions();
    const ValueSolution sol = value_iteration(mdp);
    const std::vector<double> dist = target_state_distribution(mdp, I);

    Theorem2Report report;
    report.delta = delta;
    report.num_paths = num_paths;
    report.trials = trials;
    report.bound = static_cast<double>(A) / (delta * delta);
    report.population_mean.assign(A, 0.0);
    report.population_std.assign(A, 0.0);
    std::vector<double> second(A, 0.0);
    for (int s = 0; s < S; ++s) {
        const double p = dist[s];
        if (p == 0.0) continue;
        report.expected_v_given_i += p * sol.v_star[s];
        for (int a = 0; a < A; ++a) {
            const double q = sol.q_star[s][a];
            report.population_mean[a] += p * q;
            second[a] += p * q * q;
        }
    }
    double max_std = 0.0;
    for (int a = 0; a < A; ++a) {
        const double var = std::max(0.0, second[a] - report.population_mean[a] * report.population_mean[a]);
        report.population_std[a] = std::sqrt(var);
        max_std = std::max(max_std, report.population_std[a]);
    }
    report.event_threshold =
        report.expected_v_given_i / A - delta / std::sqrt(static_cast<double>(num_paths)) * max_std;

    long hits = 0;
    std::vector<double> mean(A);
    for (long t = 0; t < trials; ++t) {
        std::fill(mean.begin(), mean.end(), 0.0);
        for (int i = 0; i < num_paths; ++i) {
            const int s = rng.categorical(dist);
            for (int a = 0; a < A; ++a) mean[a] += sol.q_star[s][a];
        }
        double best = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < A; ++a) best = std::max(best, mean[a] / num_paths);
        if (best <= report.event_threshold) ++hits;
    }
    report.empirical_frequency = static_cast<double>(hits) / static_cast<double>(trials);
    return report;
}

}  // namespace delayrl
