#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "delayrl/rng.hpp"

namespace delayrl {

/// Dense multilayer perceptron, ReLU hidden activations, identity output,
/// 64-bit floats throughout. weights[l] is (layer_sizes[l+1] x
/// layer_sizes[l]) row-major.
struct Mlp {
    std::vector<int> layer_sizes;
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    /// He-style init: weights uniform in +-sqrt(6 / fan_in), biases zero.
    static Mlp create(std::vector<int> sizes, Rng& rng);

    int input_dim() const { return layer_sizes.front(); }
    int output_dim() const { return layer_sizes.back(); }
    int num_layers() const { return static_cast<int>(weights.size()); }
    std::size_t num_params() const;
};

/// Parameter-shaped container, used for gradients and Adam moments.
struct MlpGradients {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    static MlpGradients zeros_like(const Mlp& net);
    void clear();
    void scale(double factor);
};

/// Reusable buffers for forward/backward passes.
struct MlpWorkspace {
    std::vector<std::vector<double>> activations;  // [0] = input, post-ReLU elsewhere
    std::vector<std::vector<double>> deltas;
};

std::vector<double> forward(const Mlp& net, std::span<const double> input);
void forward(const Mlp& net, std::span<const double> input, MlpWorkspace& ws);

/// Exact reverse-mode gradients of dot(output, upstream_gradient) with
/// respect to every parameter.
MlpGradients backward(const Mlp& net, std::span<const double> input,
                      std::span<const double> upstream_gradient);

/// Accumulating fast path: runs forward into ws, then adds the gradients of
/// dot(output, upstream) into grads. Returns the forward output values
/// through ws.activations.back().
void backward_accumulate(const Mlp& net, std::span<const double> input,
                         std::span<const double> upstream_gradient, MlpGradients& grads,
                         MlpWorkspace& ws);

/// Backward pass over activations already present in ws from a forward()
/// of the same net and input; the upstream gradient must be loaded into
/// ws.deltas.back() by the caller. Gradients accumulate into grads.
void backward_pass(const Mlp& net, MlpGradients& grads, MlpWorkspace& ws);

struct AdamState {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long step_count = 0;
    MlpGradients first_moment;
    MlpGradients second_moment;

    static AdamState create(const Mlp& net, double learning_rate = 1e-3);
};

/// One Adam step with bias correction; updates params in place.
void adam_step(AdamState& state, Mlp& params, const MlpGradients& grads);

/// Snapshot format: `mlp <n> <sizes...>` header, then the flat parameter
/// list (per layer: weights row-major, then biases) with exact round-trip.
void write_mlp(std::ostream& out, const Mlp& net);
std::string mlp_to_string(const Mlp& net);
Mlp read_mlp(std::istream& in);
Mlp mlp_from_string(const std::string& text);

}  // namespace delayrl
