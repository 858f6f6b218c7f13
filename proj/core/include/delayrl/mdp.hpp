#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace delayrl {

/// One transition-row entry: probability of landing in `next`.
struct TransitionEntry {
    int next;
    double prob;
    bool operator==(const TransitionEntry&) const = default;
};

/// Exact finite MDP (S, A, P, r, mu) with discount. Transition rows are
/// stored sparsely, entries sorted by next-state index; the row for (s, a)
/// is rows()[s * num_actions + a].
class TabularMdp {
public:
    TabularMdp() = default;
    TabularMdp(int num_states, int num_actions, double discount);

    int num_states() const { return num_states_; }
    int num_actions() const { return num_actions_; }
    double discount() const { return discount_; }

    std::span<const TransitionEntry> row(int s, int a) const {
        const auto& r = rows_[row_index(s, a)];
        return {r.data(), r.size()};
    }
    /// Replaces the row for (s, a); entries are merged and sorted.
    void set_row(int s, int a, std::vector<TransitionEntry> entries);
    /// Adds probability mass to P[s][a][next].
    void add_prob(int s, int a, int next, double prob);
    double prob(int s, int a, int next) const;

    double reward(int s, int a) const { return rewards_[row_index(s, a)]; }
    void set_reward(int s, int a, double r) { rewards_[row_index(s, a)] = r; }

    const std::vector<double>& initial_dist() const { return initial_dist_; }
    void set_initial_dist(std::vector<double> mu);
    /// Point-mass initial distribution.
    void set_initial_state(int s);

    bool terminal(int s) const { return terminal_[s] != 0; }
    void set_terminal(int s, bool t) { terminal_[s] = t ? 1 : 0; }
    const std::vector<std::uint8_t>& terminal_flags() const { return terminal_; }

    /// True when every row is a point mass.
    bool deterministic() const;
    /// The unique successor of (s, a); only valid for deterministic rows.
    int successor(int s, int a) const;

    int row_index(int s, int a) const { return s * num_actions_ + a; }

    bool operator==(const TabularMdp&) const = default;

private:
    int num_states_ = 0;
    int num_actions_ = 0;
    double discount_ = 0.0;
    std::vector<std::vector<TransitionEntry>> rows_;
    std::vector<double> rewards_;
    std::vector<double> initial_dist_;
    std::vector<std::uint8_t> terminal_;
};

/// Returns human-readable descriptions of every invariant violation:
/// row sums off 1 (tolerance 1e-9), entries outside [0,1], initial
/// distribution not summing to 1, terminal states that do not self-loop
/// with probability 1 and reward 0. Empty result means the MDP is valid.
std::vector<std::string> validate(const TabularMdp& mdp);

struct ValueSolution {
    std::vector<double> v_star;               // per state
    std::vector<std::vector<double>> q_star;  // [state][action]
    long iterations = 0;
    double residual = 0.0;  // sup-norm Bellman residual of q_star
};

/// Raised when value iteration hits its iteration cap before reaching tol.
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Exact value iteration. The returned action values lie within tol/2 of
/// the fixed point in sup-norm, so the reported Bellman residual is well
/// under tol. Deterministic given inputs. Throws ConvergenceError at the
/// iteration cap.
ValueSolution value_iteration(const TabularMdp& mdp, double tol = 1e-9,
                              long max_iterations = 1'000'000);

enum class TieBreak { LowestIndex };

/// Greedy action per state; ties resolved by the rule (default lowest index).
std::vector<int> greedy_policy(const ValueSolution& sol,
                               TieBreak tie_break = TieBreak::LowestIndex);

/// argmax with lowest-index tie-breaking, the convention used by every
/// policy in this project.
int argmax_lowest(std::span<const double> values);

/// Index arithmetic for the augmented state space S x A^d: state-major,
/// queue head next, queue tail least significant.
class AmdpIndexer {
public:
    AmdpIndexer(int num_states, int num_actions, int delay);

    long num_augmented() const { return count_; }
    int delay() const { return delay_; }

    long encode(int base_state, std::span<const int> queue) const;
    /// Inverse of encode; queue is written oldest-action first.
    void decode(long index, int& base_state, std::vector<int>& queue) const;

private:
    int num_states_;
    int num_actions_;
    int delay_;
    long count_;
};

/// Builds the augmented MDP over S x A^d. Under action a the queue head is
/// applied to the base state, a joins the queue tail, and the reward is the
/// base reward of (s, head). The initial distribution spreads the base
/// initial distribution uniformly over all action queues. Augmented states
/// with a terminal base state are terminal (self-loop, reward 0).
/// Throws std::invalid_argument when |S| * |A|^d exceeds state_cap.
TabularMdp build_amdp(const TabularMdp& mdp, int delay, long state_cap = 1'000'000);

/// Text serialization. Header `mdp <S> <A> <gamma>`, then one line per
/// (s, a) — state-major — holding the S next-state probabilities followed
/// by the reward, then `init <mu...>` and `terminal <0|1...>` lines.
/// Values are printed with enough digits for exact round-trip.
void write_mdp(std::ostream& out, const TabularMdp& mdp);
std::string mdp_to_string(const TabularMdp& mdp);
TabularMdp read_mdp(std::istream& in);
TabularMdp mdp_from_string(const std::string& text);

}  // namespace delayrl
