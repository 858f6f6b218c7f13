#include "delayrl/nn.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "delayrl/textio.hpp"

namespace delayrl {

Mlp Mlp::create(std::vector<int> sizes, Rng& rng) {
    if (sizes.size() < 2) throw std::invalid_argument("Mlp: need at least input and output sizes");
    Mlp net;
    net.layer_sizes = std::move(sizes);
    for (std::size_t l = 0; l + 1 < net.layer_sizes.size(); ++l) {
        const int fan_in = net.layer_sizes[l];
        const int fan_out = net.layer_sizes[l + 1];
        if (fan_in <= 0 || fan_out <= 0) throw std::invalid_argument("Mlp: layer sizes must be positive");
        const double bound = std::sqrt(6.0 / fan_in);
        std::vector<double> w(static_cast<std::size_t>(fan_out) * fan_in);
        for (double& x : w) x = rng.uniform(-bound, bound);
        net.weights.push_back(std::move(w));
        net.biases.emplace_back(fan_out, 0.0);
    }
    return net;
}

std::size_t Mlp::num_params() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
}

MlpGradients MlpGradients::zeros_like(const Mlp& net) {
    MlpGradients g;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        g.weights.emplace_back(net.weights[l].size(), 0.0);
        g.biases.emplace_back(net.biases[l].size(), 0.0);
    }
    return g;
}

void MlpGradients::clear() {
    for (auto& w : weights) std::fill(w.begin(), w.end(), 0.0);
    for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
}

void MlpGradients::scale(double factor) {
    for (auto& w : weights)
        for (double& x : w) x *= factor;
    for (auto& b : biases)
        for (double& x : b) x *= factor;
}

namespace {

void ensure_workspace(const Mlp& net, MlpWorkspace& ws) {
    const std::size_t L = net.weights.size();
    ws.activations.resize(L + 1);
    ws.deltas.resize(L);
    for (std::size_t l = 0; l <= L; ++l) ws.activations[l].resize(net.layer_sizes[l]);
    for (std::size_t l = 0; l < L; ++l) ws.deltas[l].resize(net.layer_sizes[l + 1]);
}

}  // namespace

void forward(const Mlp& net, std::span<const double> input, MlpWorkspace& ws) {
    if (static_cast<int>(input.size()) != net.input_dim())
        throw std::invalid_argument("forward: input dimension mismatch");
    ensure_workspace(net, ws);
    std::copy(input.begin(), input.end(), ws.activations[0].begin());
    const std::size_t L = net.weights.size();
    for (std::size_t l = 0; l < L; ++l) {
        const int in_dim = net.layer_sizes[l];
        const int out_dim = net.layer_sizes[l + 1];
        const double* w = net.weights[l].data();
        const double* x = ws.activations[l].data();
        double* y = ws.activations[l + 1].data();
        const bool relu = l + 1 < L;
        for (int o = 0; o < out_dim; ++o) {
            const double* row = w + static_cast<std::size_t>(o) * in_dim;
            double acc = net.biases[l][o];
            for (int i = 0; i < in_dim; ++i) acc += row[i] * x[i];
            y[o] = relu && acc < 0.0 ? 0.0 : acc;
        }
    }
}

std::vector<double> forward(const Mlp& net, std::span<const double> input) {
    MlpWorkspace ws;
    forward(net, input, ws);
    return ws.activations.back();
}

void backward_accumulate(const Mlp& net, std::span<const double> input,
                         std::span<const double> upstream_gradient, MlpGradients& grads,
                         MlpWorkspace& ws) {
    if (static_cast<int>(upstream_gradient.size()) != net.output_dim())
        throw std::invalid_argument("backward: upstream gradient dimension mismatch");
    forward(net, input, ws);
    std::copy(upstream_gradient.begin(), upstream_gradient.end(), ws.deltas.back().begin());
    backward_pass(net, grads, ws);
}

void backward_pass(const Mlp& net, MlpGradients& grads, MlpWorkspace& ws) {
    const std::size_t L = net.weights.size();
    for (std::size_t l = L; l-- > 0;) {
        const int in_dim = net.layer_sizes[l];
        const int out_dim = net.layer_sizes[l + 1];
        const double* x = ws.activations[l].data();
        const double* delta = ws.deltas[l].data();
        double* gw = grads.weights[l].data();
        double* gb = grads.biases[l].data();
        for (int o = 0; o < out_dim; ++o) {
            const double d = delta[o];
            if (d != 0.0) {
                double* grow = gw + static_cast<std::size_t>(o) * in_dim;
                for (int i = 0; i < in_dim; ++i) grow[i] += d * x[i];
            }
            gb[o] += d;
        }
        if (l == 0) break;
        // Propagate through the layer and the ReLU at its input.
        const double* w = net.weights[l].data();
        double* prev = ws.deltas[l - 1].data();
        std::fill(prev, prev + in_dim, 0.0);
        for (int o = 0; o < out_dim; ++o) {
            const double d = delta[o];
            if (d == 0.0) continue;
            const double* row = w + static_cast<std::size_t>(o) * in_dim;
            for (int i = 0; i < in_dim; ++i) prev[i] += d * row[i];
        }
        for (int i = 0; i < in_dim; ++i)
            if (x[i] <= 0.0) prev[i] = 0.0;  // ReLU gate (x is post-activation)
    }
}

MlpGradients backward(const Mlp& net, std::span<const double> input,
                      std::span<const double> upstream_gradient) {
    MlpGradients grads = MlpGradients::zeros_like(net);
    MlpWorkspace ws;
    backward_accumulate(net, input, upstream_gradient, grads, ws);
    return grads;
}

AdamState AdamState::create(const Mlp& net, double learning_rate) {
    AdamState s;
    s.learning_rate = learning_rate;
    s.first_moment = MlpGradients::zeros_like(net);
    s.second_moment = MlpGradients::zeros_like(net);
    return s;
}

namespace {

void adam_update_span(std::span<double> p, std::span<const double> g, std::span<double> m,
                      std::span<double> v, const AdamState& s, double corr1, double corr2) {
    for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
        v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
        const double m_hat = m[i] / corr1;
        const double v_hat = v[i] / corr2;
        p[i] -= s.learning_rate * m_hat / (std::sqrt(v_hat) + s.epsilon);
    }
}

}  // namespace

void adam_step(AdamState& state, Mlp& params, const MlpGradients& grads) {
    ++state.step_count;
    const double corr1 = 1.0 - std::pow(state.beta1, state.step_count);
    const double corr2 = 1.0 - std::pow(state.beta2, state.step_count);
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        adam_update_span(params.weights[l], grads.weights[l], state.first_moment.weights[l],
                         state.second_moment.weights[l], state, corr1, corr2);
        adam_update_span(params.biases[l], grads.biases[l], state.first_moment.biases[l],
                         state.second_moment.biases[l], state, corr1, corr2);
    }
}

void write_mlp(std::ostream& out, const Mlp& net) {
    out << "mlp " << net.layer_sizes.size();
    for (int s : net.layer_sizes) out << ' ' << s;
    out << '\n';
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        out << join_doubles(net.weights[l]) << '\n';
        out << join_doubles(net.biases[l]) << '\n';
    }
}

std::string mlp_to_string(const Mlp& net) {
    std::ostringstream oss;
    write_mlp(oss, net);
    return oss.str();
}

Mlp read_mlp(std::istream& in) {
    std::string tag;
    std::size_t n = 0;
    if (!(in >> tag >> n) || tag != "mlp" || n < 2)
        throw std::runtime_error("read_mlp: malformed header");
    Mlp net;
    net.layer_sizes.resize(n);
    for (auto& s : net.layer_sizes)
        if (!(in >> s)) throw std::runtime_error("read_mlp: truncated shape header");
    for (std::size_t l = 0; l + 1 < n; ++l) {
        const std::size_t wn =
            static_cast<std::size_t>(net.layer_sizes[l]) * net.layer_sizes[l + 1];
        std::vector<double> w(wn);
        for (auto& x : w)
            if (!(in >> x)) throw std::runtime_error("read_mlp: truncated weights");
        std::vector<double> b(net.layer_sizes[l + 1]);
        for (auto& x : b)
            if (!(in >> x)) throw std::runtime_error("read_mlp: truncated biases");
        net.weights.push_back(std::move(w));
        net.biases.push_back(std::move(b));
    }
    return net;
}

Mlp mlp_from_string(const std::string& text) {
    std::istringstream iss(text);
    return read_mlp(iss);
}

}  // namespace delayrl
