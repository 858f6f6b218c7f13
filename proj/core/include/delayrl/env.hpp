#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "delayrl/mdp.hpp"
#include "delayrl/rng.hpp"
#include "delayrl/state.hpp"

namespace delayrl {

/// Discount used for every exported TabularMdp unless overridden.
inline constexpr double kDefaultDiscount = 0.99;

enum class StateKind { Discrete, Continuous };

struct EnvSpec {
    std::string name;
    double randomness = 0.0;
    StateKind state_kind = StateKind::Discrete;
    int num_states = 0;  // discrete
    int state_dim = 0;   // continuous
    std::vector<double> state_lo;
    std::vector<double> state_hi;
    int action_count = 0;
    bool episodic = false;
    double reward_min = 0.0;
    double reward_max = 0.0;
};

struct StepOutcome {
    StateValue state;
    double reward = 0.0;
    bool terminated = false;
};

class Environment {
public:
    virtual ~Environment() = default;

    virtual const EnvSpec& spec() const = 0;

    /// Starts a new episode; all randomness below is a pure function of seed.
    virtual StateValue reset(std::uint64_t seed) = 0;

    /// Advances one step. Throws std::logic_error on a finished episode.
    virtual StepOutcome step(int action) = 0;

    /// Exact transition tensor and expected rewards of the dynamics.
    /// Throws std::logic_error for continuous environments.
    virtual TabularMdp as_tabular(double discount = kDefaultDiscount) const;
};

std::unique_ptr<Environment> stormy_road_new(double r);
std::unique_ptr<Environment> frozen_lake_new(int size, double r);
/// Optional fixed initial state replaces the default randomized reset.
std::unique_ptr<Environment> cartpole_new(double r,
                                          std::optional<std::array<double, 4>> initial_state = {});
std::unique_ptr<Environment> puddle_world_new(double r,
                                              std::optional<std::array<double, 2>> start = {});
std::unique_ptr<Environment> cliff_new(double slip);

/// Factory by name: stormy_road, frozen_lake4, frozen_lake8, cartpole,
/// puddle_world, cliff. The randomness parameter is environment-specific
/// (storm shift / slip probability / noise scale).
std::unique_ptr<Environment> make_env(const std::string& name, double randomness);

bool is_discrete(const EnvSpec& spec);

}  // namespace delayrl
