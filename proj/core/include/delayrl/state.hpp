#pragma once

#include <cassert>
#include <string>
#include <variant>
#include <vector>

#include "delayrl/textio.hpp"

namespace delayrl {

/// Observation value: either a discrete state index or a continuous vector.
class StateValue {
public:
    StateValue() : value_(0) {}

    static StateValue discrete(int index) { return StateValue(index); }
    static StateValue continuous(std::vector<double> v) { return StateValue(std::move(v)); }

    bool is_discrete() const { return std::holds_alternative<int>(value_); }

    int index() const {
        assert(is_discrete());
        return std::get<int>(value_);
    }

    const std::vector<double>& vec() const {
        assert(!is_discrete());
        return std::get<std::vector<double>>(value_);
    }

    bool operator==(const StateValue& other) const = default;

    std::string to_string() const {
        if (is_discrete()) return std::to_string(index());
        return "[" + join_doubles(vec(), ',') + "]";
    }

private:
    explicit StateValue(int index) : value_(index) {}
    explicit StateValue(std::vector<double> v) : value_(std::move(v)) {}

    std::variant<int, std::vector<double>> value_;
};

}  // namespace delayrl
