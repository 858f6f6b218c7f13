#include "delayrl/policies.hpp"

#include <cmath>
#include <stdexcept>

#include "delayrl/textio.hpp"
#include "delayrl/theory.hpp"

namespace delayrl {

RiskStats risk_stats(const std::vector<std::vector<double>>& samples) {
    if (samples.empty()) throw std::invalid_argument("risk_stats: no actions");
    RiskStats stats;
    const int M = static_cast<int>(samples[0].size());
    if (M < 1) throw std::invalid_argument("risk_stats: empty sample list");
    stats.samples = M;
    for (const auto& xs : samples) {
        if (static_cast<int>(xs.size()) != M)
            throw std::invalid_argument("risk_stats: ragged sample lists");
        bool constant = true;
        double sum = 0.0;
        for (double x : xs) {
            sum += x;
            constant = constant && x == xs[0];
        }
        if (constant) {
            // Exact: identical samples must yield their value and zero
            // spread, free of summation rounding (ties depend on it).
            stats.mean.push_back(xs[0]);
            stats.stddev.push_back(0.0);
            continue;
        }
        const double mean = sum / M;
        double sq = 0.0;
        for (double x : xs) sq += (x - mean) * (x - mean);
        const double sd = M > 1 ? std::sqrt(sq / (M - 1)) : 0.0;
        stats.mean.push_back(mean);
        stats.stddev.push_back(sd);
    }
    return stats;
}

std::string DecisionTrace::to_line() const {
    std::string line = policy + " I=" + input.to_string();
    line += " mean=" + join_doubles(stats.mean, ',');
    line += " std=" + join_doubles(stats.stddev, ',');
    line += " action=" + std::to_string(action);
    return line;
}

namespace {

int finish_decision(const char* policy, const AugmentedState& I, RiskStats stats,
                    double risk_weight, int fallbacks, DecisionTrace* trace) {
    std::vector<double> score(stats.mean.size());
    for (std::size_t a = 0; a < score.size(); ++a)
        score[a] = stats.mean[a] - risk_weight * stats.stddev[a];
    const int action = argmax_lowest(score);
    if (trace) {
        trace->policy = policy;
        trace->input = I;
        trace->stats = std::move(stats);
        trace->action = action;
        trace->fallbacks = fallbacks;
    }
    return action;
}

}  // namespace

int smbs_select(const QFunction& q, const DynamicsModel& model, const AugmentedState& I,
                int num_paths, double risk_weight, Rng& rng, DecisionTrace* trace,
                UnseenFallback fallback) {
    if (num_paths < 1) throw std::invalid_argument("smbs_select: need at least one path");
    if (risk_weight < 0.0) throw std::invalid_argument("smbs_select: negative risk weight");
    const int A = q.num_actions();
    std::vector<std::vector<double>> samples(A, std::vector<double>(num_paths));
    int fallbacks = 0;
    if (trace) {
        trace->sampled_states.clear();
        trace->sampled_terminal.clear();
    }
    for (int i = 0; i < num_paths; ++i) {
        const RolloutResult rr = rollout_sample(model, I.base_state, I.action_queue, rng, fallback);
        fallbacks += rr.fallbacks;
        if (rr.terminated) {
            for (int a = 0; a < A; ++a) samples[a][i] = 0.0;
        } else {
            const auto qs = q.values(rr.state);
            for (int a = 0; a < A; ++a) samples[a][i] = qs[a];
        }
        if (trace) {
            trace->sampled_states.push_back(rr.state);
            trace->sampled_terminal.push_back(rr.terminated ? 1 : 0);
        }
    }
    return finish_decision("smbs", I, risk_stats(samples), risk_weight, fallbacks, trace);
}

int delayed_q_select(const QFunction& q, const DynamicsModel& model, const AugmentedState& I,
                     DecisionTrace* trace, UnseenFallback fallback) {
    const RolloutResult rr = rollout_mode(model, I.base_state, I.action_queue, fallback);
    const int A = q.num_actions();
    RiskStats stats;
    stats.samples = 1;
    stats.mean = rr.terminated ? std::vector<double>(A, 0.0) : q.values(rr.state);
    stats.stddev.assign(A, 0.0);
    if (trace) {
        trace->sampled_states = {rr.state};
        trace->sampled_terminal = {static_cast<std::uint8_t>(rr.terminated ? 1 : 0)};
    }
    return finish_decision("delayed_q", I, std::move(stats), 0.0, rr.fallbacks, trace);
}

int amdp_select(const AugmentedQFunction& q_aug, const AugmentedState& I, DecisionTrace* trace) {
    RiskStats stats;
    stats.samples = 1;
    stats.mean = q_aug.values(I);
    stats.stddev.assign(stats.mean.size(), 0.0);
    if (trace) {
        trace->sampled_states.clear();
        trace->sampled_terminal.clear();
    }
    return finish_decision("amdp", I, std::move(stats), 0.0, 0, trace);
}

int exact_expected_q_select(const QFunction& q, const TabularMdp& mdp, const AugmentedState& I,
                            double risk_weight, DecisionTrace* trace) {
    if (risk_weight < 0.0) throw std::invalid_argument("exact_expected_q_select: negative risk weight");
    const std::vector<double> dist = target_state_distribution(mdp, I);
    const int A = q.num_actions();
    RiskStats stats;
    stats.samples = 0;  // population quantities, not a sample
    stats.mean.assign(A, 0.0);
    stats.stddev.assign(A, 0.0);
    std::vector<double> second(A, 0.0);
    for (int s = 0; s < mdp.num_states(); ++s) {
        const double p = dist[s];
        if (p == 0.0) continue;
        // Terminal target states contribute value 0, matching the sampling
        // policy's convention.
        if (mdp.terminal(s)) continue;
        const auto qs = q.values(StateValue::discrete(s));
        for (int a = 0; a < A; ++a) {
            stats.mean[a] += p * qs[a];
            second[a] += p * qs[a] * qs[a];
        }
    }
    for (int a = 0; a < A; ++a) {
        const double var = std::max(0.0, second[a] - stats.mean[a] * stats.mean[a]);
        stats.stddev[a] = std::sqrt(var);
    }
    if (trace) {
        trace->sampled_states.clear();
        trace->sampled_terminal.clear();
    }
    return finish_decision("exact_expected_q", I, std::move(stats), risk_weight, 0, trace);
}

}  // namespace delayrl
