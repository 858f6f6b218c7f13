#include <stdexcept>

#include "delayrl/env.hpp"

namespace delayrl {

TabularMdp Environment::as_tabular(double) const {
    throw std::logic_error(spec().name + ": no exact tabular form for a continuous environment");
}

bool is_discrete(const EnvSpec& spec) { return spec.state_kind == StateKind::Discrete; }

std::unique_ptr<Environment> make_env(const std::string& name, double randomness) {
    if (name == "stormy_road") return stormy_road_new(randomness);
    if (name == "frozen_lake4") return frozen_lake_new(4, randomness);
    if (name == "frozen_lake8") return frozen_lake_new(8, randomness);
    if (name == "cartpole") return cartpole_new(randomness);
    if (name == "puddle_world") return puddle_world_new(randomness);
    if (name == "cliff") return cliff_new(randomness);
    throw std::invalid_argument("unknown environment '" + name + "'");
}

}  // namespace delayrl
