#include "delayrl/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "delayrl/textio.hpp"

namespace delayrl {

namespace {
constexpr double kRowSumTol = 1e-9;
}

TabularMdp::TabularMdp(int num_states, int num_actions, double discount)
    : num_states_(num_states),
      num_actions_(num_actions),
      discount_(discount),
      rows_(static_cast<std::size_t>(num_states) * num_actions),
      rewards_(static_cast<std::size_t>(num_states) * num_actions, 0.0),
      initial_dist_(num_states, num_states > 0 ? 1.0 / num_states : 0.0),
      terminal_(num_states, 0) {
    if (num_states <= 0 || num_actions <= 0)
        throw std::invalid_argument("TabularMdp: state and action counts must be positive");
    if (!(discount > 0.0 && discount < 1.0))
        throw std::invalid_argument("TabularMdp: discount must lie in (0,1)");
}

void TabularMdp::set_row(int s, int a, std::vector<TransitionEntry> entries) {
    std::sort(entries.begin(), entries.end(),
              [](const auto& l, const auto& r) { return l.next < r.next; });
    std::vector<TransitionEntry> merged;
    for (const auto& e : entries) {
        if (!merged.empty() && merged.back().next == e.next)
            merged.back().prob += e.prob;
        else
            merged.push_back(e);
    }
    rows_[row_index(s, a)] = std::move(merged);
}

void TabularMdp::add_prob(int s, int a, int next, double prob) {
    if (prob == 0.0) return;
    auto& row = rows_[row_index(s, a)];
    auto it = std::lower_bound(row.begin(), row.end(), next,
                               [](const TransitionEntry& e, int n) { return e.next < n; });
    if (it != row.end() && it->next == next)
        it->prob += prob;
    else
        row.insert(it, {next, prob});
}

double TabularMdp::prob(int s, int a, int next) const {
    const auto& row = rows_[row_index(s, a)];
    auto it = std::lower_bound(row.begin(), row.end(), next,
                               [](const TransitionEntry& e, int n) { return e.next < n; });
    return (it != row.end() && it->next == next) ? it->prob : 0.0;
}

void TabularMdp::set_initial_dist(std::vector<double> mu) {
    if (static_cast<int>(mu.size()) != num_states_)
        throw std::invalid_argument("initial distribution size mismatch");
    initial_dist_ = std::move(mu);
}

void TabularMdp::set_initial_state(int s) {
    initial_dist_.assign(num_states_, 0.0);
    initial_dist_[s] = 1.0;
}

bool TabularMdp::deterministic() const {
    for (const auto& row : rows_)
        if (row.size() != 1 || row[0].prob != 1.0) return false;
    return true;
}

int TabularMdp::successor(int s, int a) const {
    const auto& row = rows_[row_index(s, a)];
    if (row.size() != 1)
        throw std::logic_error("successor() called on a stochastic row");
    return row[0].next;
}

std::vector<std::string> validate(const TabularMdp& mdp) {
    std::vector<std::string> violations;
    const int S = mdp.num_states();
    const int A = mdp.num_actions();
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            double sum = 0.0;
            for (const auto& e : mdp.row(s, a)) {
                if (e.prob < 0.0 || e.prob > 1.0) {
                    violations.push_back("P[" + std::to_string(s) + "][" + std::to_string(a) +
                                         "][" + std::to_string(e.next) + "] = " +
                                         format_double(e.prob) + " outside [0,1]");
                }
                if (e.next < 0 || e.next >= S) {
                    violations.push_back("P[" + std::to_string(s) + "][" + std::to_string(a) +
                                         "] references invalid state " + std::to_string(e.next));
                }
                sum += e.prob;
            }
            if (std::abs(sum - 1.0) > kRowSumTol) {
                violations.push_back("row (" + std::to_string(s) + "," + std::to_string(a) +
                                     ") sums to " + format_double(sum));
            }
        }
        if (mdp.terminal(s)) {
            for (int a = 0; a < A; ++a) {
                if (mdp.prob(s, a, s) != 1.0)
                    violations.push_back("terminal state " + std::to_string(s) +
                                         " does not self-loop under action " + std::to_string(a));
                if (mdp.reward(s, a) != 0.0)
                    violations.push_back("terminal state " + std::to_string(s) +
                                         " has nonzero reward under action " + std::to_string(a));
            }
        }
    }
    double mu_sum = 0.0;
    for (int s = 0; s < S; ++s) {
        const double m = mdp.initial_dist()[s];
        if (m < 0.0 || m > 1.0)
            violations.push_back("initial_dist[" + std::to_string(s) + "] = " + format_double(m) +
                                 " outside [0,1]");
        mu_sum += m;
    }
    if (std::abs(mu_sum - 1.0) > kRowSumTol)
        violations.push_back("initial distribution sums to " + format_double(mu_sum));
    return violations;
}

ValueSolution value_iteration(const TabularMdp& mdp, double tol, long max_iterations) {
    if (!(tol > 0.0)) throw std::invalid_argument("value_iteration: tol must be positive");
    const int S = mdp.num_states();
    const int A = mdp.num_actions();
    const double gamma = mdp.discount();

    std::vector<double> v(S, 0.0);
    std::vector<double> v_next(S, 0.0);
    std::vector<std::vector<double>> q(S, std::vector<double>(A, 0.0));

    // One Bellman backup of v into (q, v_next); returns sup |v_next - v|.
    const auto backup = [&](const std::vector<double>& vin) {
        double diff = 0.0;
        for (int s = 0; s < S; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < A; ++a) {
                double acc = mdp.reward(s, a);
                for (const auto& e : mdp.row(s, a)) acc += gamma * e.prob * vin[e.next];
                q[s][a] = acc;
                if (acc > best) best = acc;
            }
            v_next[s] = best;
            diff = std::max(diff, std::abs(best - vin[s]));
        }
        return diff;
    };

    long iterations = 0;
    double diff = 0.0;
    for (;;) {
        diff = backup(v);
        ++iterations;
        std::swap(v, v_next);
        // diff bounds the distance to the fixed point by gamma*diff/(1-gamma);
        // stop once that is within tol/2 so results at tolerance tol and
        // tol/10 agree to tol.
        if (diff * gamma / (1.0 - gamma) <= 0.5 * tol) break;
        if (iterations >= max_iterations)
            throw ConvergenceError("value_iteration: no convergence within " +
                                   std::to_string(max_iterations) + " iterations (residual " +
                                   format_double(diff) + ")");
    }

    // Final backup so q is consistent with v and the reported residual is
    // the measured one, not a bound.
    const double residual = backup(v);
    ValueSolution sol;
    sol.q_star = q;
    sol.v_star.resize(S);
    for (int s = 0; s < S; ++s) {
        double best = q[s][0];
        for (int a = 1; a < A; ++a) best = std::max(best, q[s][a]);
        sol.v_star[s] = best;
    }
    sol.iterations = iterations + 1;
    sol.residual = residual;
    return sol;
}

int argmax_lowest(std::span<const double> values) {
    int best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = static_cast<int>(i);
    return best;
}

std::vector<int> greedy_policy(const ValueSolution& sol, TieBreak) {
    std::vector<int> policy(sol.q_star.size());
    for (std::size_t s = 0; s < sol.q_star.size(); ++s)
        policy[s] = argmax_lowest(sol.q_star[s]);
    return policy;
}

AmdpIndexer::AmdpIndexer(int num_states, int num_actions, int delay)
    : num_states_(num_states), num_actions_(num_actions), delay_(delay) {
    if (delay < 0) throw std::invalid_argument("AmdpIndexer: delay must be nonnegative");
    long c = num_states;
    for (int i = 0; i < delay; ++i) {
        if (c > (1L << 62) / num_actions)
            throw std::invalid_argument("AmdpIndexer: augmented state count overflows");
        c *= num_actions;
    }
    count_ = c;
}

long AmdpIndexer::encode(int base_state, std::span<const int> queue) const {
    long idx = base_state;
    for (int a : queue) idx = idx * num_actions_ + a;
    return idx;
}

void AmdpIndexer::decode(long index, int& base_state, std::vector<int>& queue) const {
    queue.assign(delay_, 0);
    for (int i = delay_ - 1; i >= 0; --i) {
        queue[i] = static_cast<int>(index % num_actions_);
        index /= num_actions_;
    }
    base_state = static_cast<int>(index);
}

TabularMdp build_amdp(const TabularMdp& mdp, int delay, long state_cap) {
    const int S = mdp.num_states();
    const int A = mdp.num_actions();
    const AmdpIndexer ix(S, A, delay);
    if (ix.num_augmented() > state_cap)
        throw std::invalid_argument("build_amdp: augmented state count " +
                                    std::to_string(ix.num_augmented()) + " exceeds cap " +
                                    std::to_string(state_cap));

    const long N = ix.num_augmented();
    TabularMdp out(static_cast<int>(N), A, mdp.discount());

    std::vector<int> queue;
    std::vector<int> next_queue(std::max(delay, 1));
    for (long i = 0; i < N; ++i) {
        int s;
        ix.decode(i, s, queue);
        if (mdp.terminal(s)) {
            out.set_terminal(static_cast<int>(i), true);
            for (int a = 0; a < A; ++a) {
                out.set_row(static_cast<int>(i), a, {{static_cast<int>(i), 1.0}});
                out.set_reward(static_cast<int>(i), a, 0.0);
            }
            continue;
        }
        for (int a = 0; a < A; ++a) {
            const int head = delay > 0 ? queue[0] : a;
            // Queue shifts left, the new action joins at the tail.
            for (int k = 0; k + 1 < delay; ++k) next_queue[k] = queue[k + 1];
            if (delay > 0) next_queue[delay - 1] = a;
            std::vector<TransitionEntry> row;
            for (const auto& e : mdp.row(s, head)) {
                const long j = ix.encode(e.next, {next_queue.data(), static_cast<size_t>(delay)});
                row.push_back({static_cast<int>(j), e.prob});
            }
            out.set_row(static_cast<int>(i), a, std::move(row));
            out.set_reward(static_cast<int>(i), a, mdp.reward(s, head));
        }
    }

    // omega': base initial distribution spread uniformly over action queues.
    long queues = 1;
    for (int k = 0; k < delay; ++k) queues *= A;
    std::vector<double> omega(N, 0.0);
    for (long i = 0; i < N; ++i) {
        int s;
        ix.decode(i, s, queue);
        omega[i] = mdp.initial_dist()[s] / static_cast<double>(queues);
    }
    out.set_initial_dist(std::move(omega));
    return out;
}

void write_mdp(std::ostream& out, const TabularMdp& mdp) {
    const int S = mdp.num_states();
    const int A = mdp.num_actions();
    out << "mdp " << S << ' ' << A << ' ' << format_double(mdp.discount()) << '\n';
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            for (int next = 0; next < S; ++next) {
                out << format_double(mdp.prob(s, a, next)) << ' ';
            }
            out << format_double(mdp.reward(s, a)) << '\n';
        }
    }
    out << "init";
    for (int s = 0; s < S; ++s) out << ' ' << format_double(mdp.initial_dist()[s]);
    out << "\nterminal";
    for (int s = 0; s < S; ++s) out << ' ' << (mdp.terminal(s) ? 1 : 0);
    out << '\n';
}

std::string mdp_to_string(const TabularMdp& mdp) {
    std::ostringstream oss;
    write_mdp(oss, mdp);
    return oss.str();
}

TabularMdp read_mdp(std::istream& in) {
    std::string tag;
    int S = 0, A = 0;
    double gamma = 0.0;
    if (!(in >> tag >> S >> A >> gamma) || tag != "mdp")
        throw std::runtime_error("read_mdp: malformed header");
    TabularMdp mdp(S, A, gamma);
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            std::vector<TransitionEntry> row;
            for (int next = 0; next < S; ++next) {
                double p;
                if (!(in >> p)) throw std::runtime_error("read_mdp: truncated row");
                if (p != 0.0) row.push_back({next, p});
            }
            double r;
            if (!(in >> r)) throw std::runtime_error("read_mdp: missing reward");
            mdp.set_row(s, a, std::move(row));
            mdp.set_reward(s, a, r);
        }
    }
    while (in >> tag) {
        if (tag == "init") {
            std::vector<double> mu(S);
            for (int s = 0; s < S; ++s)
                if (!(in >> mu[s])) throw std::runtime_error("read_mdp: truncated init line");
            mdp.set_initial_dist(std::move(mu));
        } else if (tag == "terminal") {
            for (int s = 0; s < S; ++s) {
                int t;
                if (!(in >> t)) throw std::runtime_error("read_mdp: truncated terminal line");
                mdp.set_terminal(s, t != 0);
            }
        } else {
            throw std::runtime_error("read_mdp: unknown section '" + tag + "'");
        }
    }
    return mdp;
}

TabularMdp mdp_from_string(const std::string& text) {
    std::istringstream iss(text);
    return read_mdp(iss);
}

}  // namespace delayrl
