#include "delayrl/models.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "delayrl/textio.hpp"

namespace delayrl {

SampleOutcome sample_next(const DynamicsModel& model, const StateValue& s, int a, Rng& rng) {
    auto out = model.try_sample_next(s, a, rng);
    if (!out) throw UnseenPairError("sample_next: no support at the queried state-action pair");
    return *out;
}

SampleOutcome mode_next(const DynamicsModel& model, const StateValue& s, int a) {
    auto out = model.try_mode_next(s, a);
    if (!out) throw UnseenPairError("mode_next: no support at the queried state-action pair");
    return *out;
}

namespace {

SampleOutcome uniform_state(const DynamicsModel& model, Rng& rng) {
    const int n = model.num_states();
    if (n <= 0)
        throw UnseenPairError("rollout: unseen pair and no discrete fallback available");
    return {StateValue::discrete(rng.uniform_int(n)), false};
}

template <typename NextFn>
RolloutResult rollout_impl(const DynamicsModel& model, const StateValue& start,
                           std::span<const int> actions, UnseenFallback fallback, Rng* rng,
                           NextFn&& next_fn) {
    RolloutResult result{start, false, 0};
    for (int a : actions) {
        std::optional<SampleOutcome> out = next_fn(result.state, a);
        if (!out) {
            if (fallback == UnseenFallback::Error)
                throw UnseenPairError("rollout: unseen state-action pair");
            if (!rng)
                throw UnseenPairError("rollout_mode: unseen pair cannot fall back without rng");
            out = uniform_state(model, *rng);
            ++result.fallbacks;
        }
        result.state = out->state;
        if (out->terminated) {
            result.terminated = true;
            break;
        }
    }
    return result;
}

}  // namespace

RolloutResult rollout_sample(const DynamicsModel& model, const StateValue& start,
                             std::span<const int> actions, Rng& rng, UnseenFallback fallback) {
    return rollout_impl(model, start, actions, fallback, &rng,
                        [&](const StateValue& s, int a) { return model.try_sample_next(s, a, rng); });
}

RolloutResult rollout_mode(const DynamicsModel& model, const StateValue& start,
                           std::span<const int> actions, UnseenFallback fallback) {
    // The mode rollout is deterministic; an unseen pair with Uniform
    // fallback substitutes the lowest-index state to stay deterministic.
    return rollout_impl(model, start, actions, fallback, nullptr,
                        [&](const StateValue& s, int a) -> std::optional<SampleOutcome> {
                            auto out = model.try_mode_next(s, a);
                            if (!out && fallback == UnseenFallback::Uniform && model.num_states() > 0)
                                return SampleOutcome{StateValue::discrete(0), false};
                            return out;
                        });
}

TabularModel::TabularModel(int num_states, int num_actions, double smoothing)
    : num_states_(num_states),
      num_actions_(num_actions),
      smoothing_(smoothing),
      counts_(static_cast<std::size_t>(num_states) * num_actions * num_states, 0),
      row_totals_(static_cast<std::size_t>(num_states) * num_actions, 0),
      arrivals_(num_states, 0),
      terminal_arrivals_(num_states, 0) {
    if (num_states <= 0 || num_actions <= 0)
        throw std::invalid_argument("TabularModel: positive state and action counts required");
    if (smoothing < 0.0) throw std::invalid_argument("TabularModel: smoothing must be >= 0");
}

void TabularModel::fit_update(std::span<const TransitionRecord> batch) {
    for (const auto& rec : batch) {
        if (!rec.s.is_discrete() || !rec.s_next.is_discrete())
            throw std::invalid_argument("TabularModel: continuous record");
        const int s = rec.s.index(), next = rec.s_next.index();
        counts_[idx(s, rec.a) + next] += 1;
        row_totals_[static_cast<std::size_t>(s) * num_actions_ + rec.a] += 1;
        arrivals_[next] += 1;
        if (rec.terminated) terminal_arrivals_[next] += 1;
    }
}

std::uint64_t TabularModel::count(int s, int a, int next) const { return counts_[idx(s, a) + next]; }

std::uint64_t TabularModel::total(int s, int a) const {
    return row_totals_[static_cast<std::size_t>(s) * num_actions_ + a];
}

double TabularModel::prob(int s, int a, int next) const {
    const double denom = static_cast<double>(total(s, a)) + smoothing_ * num_states_;
    if (denom == 0.0) return 0.0;
    return (static_cast<double>(count(s, a, next)) + smoothing_) / denom;
}

std::vector<double> TabularModel::probs(int s, int a) const {
    std::vector<double> out(num_states_);
    const double denom = static_cast<double>(total(s, a)) + smoothing_ * num_states_;
    if (denom == 0.0) return out;
    const std::uint64_t* row = counts_.data() + idx(s, a);
    for (int next = 0; next < num_states_; ++next)
        out[next] = (static_cast<double>(row[next]) + smoothing_) / denom;
    return out;
}

bool TabularModel::arrival_terminal(int s) const {
    return 2 * terminal_arrivals_[s] > arrivals_[s];
}

std::optional<SampleOutcome> TabularModel::try_sample_next(const StateValue& s, int a,
                                                           Rng& rng) const {
    const int si = s.index();
    const std::uint64_t tot = total(si, a);
    if (tot == 0 && smoothing_ == 0.0) return std::nullopt;
    int next;
    if (smoothing_ == 0.0) {
        // Draw proportionally to raw counts.
        std::uint64_t target = static_cast<std::uint64_t>(rng.uniform() * static_cast<double>(tot));
        if (target >= tot) target = tot - 1;
        const std::uint64_t* row = counts_.data() + idx(si, a);
        std::uint64_t acc = 0;
        next = num_states_ - 1;
        for (int j = 0; j < num_states_; ++j) {
            acc += row[j];
            if (target < acc) {
                next = j;
                break;
            }
        }
    } else {
        const auto p = probs(si, a);
        next = rng.categorical(p);
    }
    return SampleOutcome{StateValue::discrete(next), arrival_terminal(next)};
}

std::optional<SampleOutcome> TabularModel::try_mode_next(const StateValue& s, int a) const {
    const int si = s.index();
    if (total(si, a) == 0 && smoothing_ == 0.0) return std::nullopt;
    const std::uint64_t* row = counts_.data() + idx(si, a);
    int best = 0;
    for (int j = 1; j < num_states_; ++j)
        if (row[j] > row[best]) best = j;
    return SampleOutcome{StateValue::discrete(best), arrival_terminal(best)};
}

void TabularModel::write(std::ostream& out) const {
    out << "counts " << num_states_ << ' ' << num_actions_ << ' ' << format_double(smoothing_)
        << '\n';
    for (int s = 0; s < num_states_; ++s) {
        for (int a = 0; a < num_actions_; ++a) {
            const std::uint64_t* row = counts_.data() + idx(s, a);
            for (int j = 0; j < num_states_; ++j) {
                if (j) out << ' ';
                out << row[j];
            }
            out << '\n';
        }
    }
    out << "arrivals";
    for (int s = 0; s < num_states_; ++s) out << ' ' << arrivals_[s];
    out << "\nterminal_arrivals";
    for (int s = 0; s < num_states_; ++s) out << ' ' << terminal_arrivals_[s];
    out << '\n';
}

std::string TabularModel::to_string() const {
    std::ostringstream oss;
    write(oss);
    return oss.str();
}

TabularModel TabularModel::read(std::istream& in) {
    std::string tag;
    int S = 0, A = 0;
    double smoothing = 0.0;
    if (!(in >> tag >> S >> A >> smoothing) || tag != "counts")
        throw std::runtime_error("TabularModel::read: malformed header");
    TabularModel model(S, A, smoothing);
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            std::uint64_t* row = model.counts_.data() + model.idx(s, a);
            std::uint64_t tot = 0;
            for (int j = 0; j < S; ++j) {
                if (!(in >> row[j])) throw std::runtime_error("TabularModel::read: truncated row");
                tot += row[j];
            }
            model.row_totals_[static_cast<std::size_t>(s) * A + a] = tot;
        }
    }
    while (in >> tag) {
        auto read_vec = [&](std::vector<std::uint64_t>& v) {
            for (int s = 0; s < S; ++s)
                if (!(in >> v[s])) throw std::runtime_error("TabularModel::read: truncated section");
        };
        if (tag == "arrivals") read_vec(model.arrivals_);
        else if (tag == "terminal_arrivals") read_vec(model.terminal_arrivals_);
        else throw std::runtime_error("TabularModel::read: unknown section '" + tag + "'");
    }
    return model;
}

TabularModel TabularModel::from_string(const std::string& text) {
    std::istringstream iss(text);
    return read(iss);
}

GaussianDynamicsModel::GaussianDynamicsModel(int state_dim, int num_actions,
                                             std::vector<int> hidden, Rng& init_rng,
                                             double learning_rate, double logstd_lo,
                                             double logstd_hi)
    : state_dim_(state_dim),
      num_actions_(num_actions),
      logstd_lo_(logstd_lo),
      logstd_hi_(logstd_hi) {
    std::vector<int> sizes;
    sizes.push_back(state_dim + num_actions);
    for (int h : hidden) sizes.push_back(h);
    sizes.push_back(2 * state_dim + 1);  // mean deltas, log-stds, termination logit
    net_ = Mlp::create(std::move(sizes), init_rng);
    adam_ = AdamState::create(net_, learning_rate);
}

void GaussianDynamicsModel::set_network(Mlp net) {
    const double lr = adam_.learning_rate;
    net_ = std::move(net);
    adam_ = AdamState::create(net_, lr);
}

void GaussianDynamicsModel::encode(const StateValue& s, int a, std::vector<double>& out) const {
    out.assign(state_dim_ + num_actions_, 0.0);
    const auto& v = s.vec();
    std::copy(v.begin(), v.end(), out.begin());
    out[state_dim_ + a] = 1.0;
}

double GaussianDynamicsModel::fit_update(std::span<const TransitionRecord> batch) {
    if (batch.empty()) throw std::invalid_argument("fit_update: empty batch");
    MlpGradients grads = MlpGradients::zeros_like(net_);
    MlpWorkspace ws;
    std::vector<double> input;
    double total_loss = 0.0;
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * log(2*pi)

    for (const auto& rec : batch) {
        if (rec.s.is_discrete())
            throw std::invalid_argument("GaussianDynamicsModel: discrete record");
        encode(rec.s, rec.a, input);
        forward(net_, input, ws);
        const auto& out = ws.activations.back();
        auto& upstream = ws.deltas.back();

        double loss = 0.0;
        for (int k = 0; k < state_dim_; ++k) {
            const double delta = rec.s_next.vec()[k] - rec.s.vec()[k];
            const double mean = out[k];
            const double raw_logstd = out[state_dim_ + k];
            const double logstd = std::clamp(raw_logstd, logstd_lo_, logstd_hi_);
            const double inv_var = std::exp(-2.0 * logstd);
            const double err = delta - mean;
            loss += 0.5 * err * err * inv_var + logstd + kHalfLog2Pi;
            upstream[k] = -err * inv_var * inv_n;
            double g_logstd = 1.0 - err * err * inv_var;
            if (raw_logstd <= logstd_lo_ || raw_logstd >= logstd_hi_) g_logstd = 0.0;
            upstream[state_dim_ + k] = g_logstd * inv_n;
        }
        const double logit = out[2 * state_dim_];
        const double y = rec.terminated ? 1.0 : 0.0;
        // softplus(logit) - y*logit, numerically stable form.
        const double bce =
            std::max(logit, 0.0) - logit * y + std::log1p(std::exp(-std::abs(logit)));
        loss += bce;
        const double sigmoid = 1.0 / (1.0 + std::exp(-logit));
        upstream[2 * state_dim_] = (sigmoid - y) * inv_n;

        total_loss += loss;
        backward_pass(net_, grads, ws);
    }
    adam_step(adam_, net_, grads);
    return total_loss * inv_n;
}

GaussianDynamicsModel::Prediction GaussianDynamicsModel::predict(const StateValue& s,
                                                                 int a) const {
    std::vector<double> input;
    encode(s, a, input);
    const auto out = forward(net_, input);
    Prediction p;
    p.mean_delta.resize(state_dim_);
    p.stddev.resize(state_dim_);
    for (int k = 0; k < state_dim_; ++k) {
        p.mean_delta[k] = out[k];
        p.stddev[k] = std::exp(std::clamp(out[state_dim_ + k], logstd_lo_, logstd_hi_));
    }
    p.termination_prob = 1.0 / (1.0 + std::exp(-out[2 * state_dim_]));
    return p;
}

std::optional<SampleOutcome> GaussianDynamicsModel::try_sample_next(const StateValue& s, int a,
                                                                    Rng& rng) const {
    const Prediction p = predict(s, a);
    std::vector<double> next(state_dim_);
    for (int k = 0; k < state_dim_; ++k)
        next[k] = s.vec()[k] + p.mean_delta[k] + p.stddev[k] * rng.normal();
    const bool term = rng.uniform() < p.termination_prob;
    return SampleOutcome{StateValue::continuous(std::move(next)), term};
}

std::optional<SampleOutcome> GaussianDynamicsModel::try_mode_next(const StateValue& s,
                                                                  int a) const {
    const Prediction p = predict(s, a);
    std::vector<double> next(state_dim_);
    for (int k = 0; k < state_dim_; ++k) next[k] = s.vec()[k] + p.mean_delta[k];
    return SampleOutcome{StateValue::continuous(std::move(next)), p.termination_prob > 0.5};
}

std::optional<SampleOutcome> ExactTabularDynamics::try_sample_next(const StateValue& s, int a,
                                                                   Rng& rng) const {
    const auto row = mdp_->row(s.index(), a);
    if (row.empty()) return std::nullopt;
    const double u = rng.uniform();
    double acc = 0.0;
    int next = row.back().next;
    for (const auto& e : row) {
        acc += e.prob;
        if (u < acc) {
            next = e.next;
            break;
        }
    }
    return SampleOutcome{StateValue::discrete(next), mdp_->terminal(next)};
}

std::optional<SampleOutcome> ExactTabularDynamics::try_mode_next(const StateValue& s,
                                                                 int a) const {
    const auto row = mdp_->row(s.index(), a);
    if (row.empty()) return std::nullopt;
    const TransitionEntry* best = &row[0];
    for (const auto& e : row)
        if (e.prob > best->prob) best = &e;  // first max wins: lowest index
    return SampleOutcome{StateValue::discrete(best->next), mdp_->terminal(best->next)};
}

}  // namespace delayrl
