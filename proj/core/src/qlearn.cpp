#include "delayrl/qlearn.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "delayrl/mdp.hpp"
#include "delayrl/textio.hpp"

namespace delayrl {

int epsilon_greedy(std::span<const double> q_values, double eps, Rng& rng) {
    if (eps < 0.0 || eps > 1.0) throw std::invalid_argument("epsilon_greedy: eps outside [0,1]");
    if (eps > 0.0 && rng.uniform() < eps)
        return rng.uniform_int(static_cast<int>(q_values.size()));
    return argmax_lowest(q_values);
}

TabularQ::TabularQ(int num_states, int num_actions)
    : num_states_(num_states),
      num_actions_(num_actions),
      q_(static_cast<std::size_t>(num_states) * num_actions, 0.0),
      visits_(static_cast<std::size_t>(num_states) * num_actions, 0) {
    if (num_states <= 0 || num_actions <= 0)
        throw std::invalid_argument("TabularQ: positive state and action counts required");
}

std::vector<double> TabularQ::values(int s) const {
    const auto* row = q_.data() + static_cast<std::size_t>(s) * num_actions_;
    return std::vector<double>(row, row + num_actions_);
}

std::string TabularQ::to_string() const {
    std::ostringstream oss;
    oss << "tabq " << num_states_ << ' ' << num_actions_ << '\n';
    for (int s = 0; s < num_states_; ++s) {
        for (int a = 0; a < num_actions_; ++a) {
            if (a) oss << ' ';
            oss << format_double(value(s, a));
        }
        oss << '\n';
    }
    return oss.str();
}

TabularQ TabularQ::from_string(const std::string& text) {
    std::istringstream in(text);
    std::string tag;
    int S = 0, A = 0;
    if (!(in >> tag >> S >> A) || tag != "tabq")
        throw std::runtime_error("TabularQ::from_string: malformed header");
    TabularQ q(S, A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            double v;
            if (!(in >> v)) throw std::runtime_error("TabularQ::from_string: truncated matrix");
            q.set(s, a, v);
        }
    return q;
}

void tabular_q_update(TabularQ& q, const TransitionRecord& rec, double gamma, double lr) {
    const int s = rec.s.index(), next = rec.s_next.index();
    double bootstrap = 0.0;
    if (!rec.terminated) {
        bootstrap = q.value(next, 0);
        for (int a = 1; a < q.num_actions(); ++a) bootstrap = std::max(bootstrap, q.value(next, a));
    }
    const double target = rec.reward + gamma * bootstrap;
    const double old = q.value(s, rec.a);
    q.set(s, rec.a, old + lr * (target - old));
}

void tabular_q_update_scheduled(TabularQ& q, const TransitionRecord& rec, double gamma,
                                double lr_base, double lr_power) {
    q.count_visit(rec.s.index(), rec.a);
    const double n = static_cast<double>(q.visits(rec.s.index(), rec.a));
    const double lr = lr_base / std::pow(1.0 + n, lr_power);
    tabular_q_update(q, rec, gamma, lr);
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
    data_.reserve(capacity);
}

void ReplayBuffer::push(TransitionRecord rec) {
    if (data_.size() < capacity_) {
        data_.push_back(std::move(rec));
    } else {
        data_[write_pos_] = std::move(rec);
    }
    write_pos_ = (write_pos_ + 1) % capacity_;
    ++inserted_;
}

const TransitionRecord& ReplayBuffer::sample(Rng& rng) const {
    return data_[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(data_.size())))];
}

bool ReplayBuffer::contains_insertion(std::size_t insertion_index) const {
    if (insertion_index >= inserted_) return false;
    return inserted_ - insertion_index <= data_.size();
}

StateEncoder::StateEncoder(const EnvSpec& spec) : kind_(spec.state_kind) {
    if (kind_ == StateKind::Discrete) {
        dim_ = spec.num_states;
    } else {
        dim_ = spec.state_dim;
        lo_ = spec.state_lo;
        hi_ = spec.state_hi;
    }
}

void StateEncoder::encode(const StateValue& s, std::vector<double>& out) const {
    out.assign(dim_, 0.0);
    if (kind_ == StateKind::Discrete) {
        out[s.index()] = 1.0;
    } else {
        const auto& v = s.vec();
        for (int k = 0; k < dim_; ++k)
            out[k] = 2.0 * (v[k] - lo_[k]) / (hi_[k] - lo_[k]) - 1.0;
    }
}

std::vector<double> StateEncoder::encode(const StateValue& s) const {
    std::vector<double> out;
    encode(s, out);
    return out;
}

AugmentedEncoder::AugmentedEncoder(const EnvSpec& spec, int delay)
    : base_(spec), delay_(delay), num_actions_(spec.action_count) {}

void AugmentedEncoder::encode(const AugmentedState& I, std::vector<double>& out) const {
    if (static_cast<int>(I.action_queue.size()) != delay_)
        throw std::invalid_argument("AugmentedEncoder: queue length mismatch");
    out.assign(dim(), 0.0);
    std::vector<double> base;
    base_.encode(I.base_state, base);
    std::copy(base.begin(), base.end(), out.begin());
    for (int k = 0; k < delay_; ++k)
        out[base_.dim() + k * num_actions_ + I.action_queue[k]] = 1.0;
}

std::vector<double> AugmentedEncoder::encode(const AugmentedState& I) const {
    std::vector<double> out;
    encode(I, out);
    return out;
}

DqnAgent::DqnAgent(int input_dim, int num_actions, const DqnConfig& config, Encoder encoder,
                   Rng& init_rng)
    : cfg_(config), num_actions_(num_actions), encode_(std::move(encoder)),
      replay_(config.replay_capacity) {
    std::vector<int> sizes;
    sizes.push_back(input_dim);
    for (int h : cfg_.hidden) sizes.push_back(h);
    sizes.push_back(num_actions);
    online_ = Mlp::create(std::move(sizes), init_rng);
    target_ = online_;
    adam_ = AdamState::create(online_, cfg_.learning_rate);
}

std::vector<double> DqnAgent::q_values(const StateValue& s) const {
    encode_(s, input_);
    forward(online_, input_, ws_);
    return ws_.activations.back();
}

void DqnAgent::set_online(Mlp net) {
    online_ = std::move(net);
    target_ = online_;
    adam_ = AdamState::create(online_, cfg_.learning_rate);
}

double DqnAgent::update(Rng& rng) {
    if (replay_.size() < static_cast<std::size_t>(cfg_.batch_size)) return 0.0;
    std::vector<TransitionRecord> batch;
    batch.reserve(cfg_.batch_size);
    for (int i = 0; i < cfg_.batch_size; ++i) batch.push_back(replay_.sample(rng));
    const double loss = ddqn_update(*this, batch);
    if (cfg_.target_sync_period > 0 && updates_ % cfg_.target_sync_period == 0) sync_target();
    return loss;
}

double ddqn_update(DqnAgent& agent, std::span<const TransitionRecord> batch) {
    if (batch.empty()) throw std::invalid_argument("ddqn_update: empty batch");
    MlpGradients grads = MlpGradients::zeros_like(agent.online_);
    MlpWorkspace ws;
    std::vector<double> input;
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    double total_loss = 0.0;

    for (const auto& rec : batch) {
        double target = rec.reward;
        if (!rec.terminated) {
            agent.encode_(rec.s_next, input);
            forward(agent.online_, input, ws);
            const int best = argmax_lowest(ws.activations.back());
            forward(agent.target_, input, ws);
            target += agent.cfg_.gamma * ws.activations.back()[best];
        }
        agent.encode_(rec.s, input);
        forward(agent.online_, input, ws);
        const double pred = ws.activations.back()[rec.a];
        const double err = pred - target;
        total_loss += err * err;
        auto& upstream = ws.deltas.back();
        std::fill(upstream.begin(), upstream.end(), 0.0);
        upstream[rec.a] = 2.0 * err * inv_n;
        backward_pass(agent.online_, grads, ws);
    }
    adam_step(agent.adam_, agent.online_, grads);
    ++agent.updates_;
    return total_loss * inv_n;
}

}  // namespace delayrl
