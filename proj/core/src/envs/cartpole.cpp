#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <optional>

#include "delayrl/env.hpp"

namespace delayrl {
namespace {

// Classic cart-pole physics with explicit Euler integration. The action
// force gets zero-mean Gaussian noise with standard deviation r * |force|.
constexpr double kGravity = 9.8;
constexpr double kCartMass = 1.0;
constexpr double kPoleMass = 0.1;
constexpr double kTotalMass = kCartMass + kPoleMass;
constexpr double kHalfLength = 0.5;
constexpr double kPoleMassLength = kPoleMass * kHalfLength;
constexpr double kForceMag = 10.0;
constexpr double kTau = 0.02;
constexpr double kAngleLimit = 12.0 * 2.0 * M_PI / 360.0;
constexpr double kXLimit = 2.4;
constexpr int kMaxSteps = 500;
constexpr double kVelLimit = 10.0;  // physical clamp, keeps states in bounds

class CartpoleEnv final : public Environment {
public:
    CartpoleEnv(double r, std::optional<std::array<double, 4>> initial_state)
        : r_(r), initial_state_(initial_state) {
        if (r < 0.0) throw std::invalid_argument("cartpole: r must be nonnegative");
        spec_.name = "cartpole";
        spec_.randomness = r;
        spec_.state_kind = StateKind::Continuous;
        spec_.state_dim = 4;
        spec_.state_lo = {-2.0 * kXLimit, -kVelLimit, -2.0 * kAngleLimit, -kVelLimit};
        spec_.state_hi = {+2.0 * kXLimit, +kVelLimit, +2.0 * kAngleLimit, +kVelLimit};
        spec_.action_count = 2;
        spec_.episodic = true;
        spec_.reward_min = 1.0;
        spec_.reward_max = 1.0;
    }

    const EnvSpec& spec() const override { return spec_; }

    StateValue reset(std::uint64_t seed) override {
        rng_ = Rng::derive(seed, 0x6370);
        if (initial_state_) {
            std::copy(initial_state_->begin(), initial_state_->end(), state_);
        } else {
            for (double& v : state_) v = rng_.uniform(-0.05, 0.05);
        }
        steps_ = 0;
        done_ = false;
        return observation();
    }

    StepOutcome step(int action) override {
        if (done_) throw std::logic_error("cartpole: step() on a finished episode");
        if (action < 0 || action >= 2) throw std::invalid_argument("cartpole: invalid action");

        double force = action == 1 ? kForceMag : -kForceMag;
        if (r_ > 0.0) force += rng_.normal(0.0, r_ * kForceMag);

        const double x = state_[0], x_dot = state_[1];
        const double theta = state_[2], theta_dot = state_[3];
        const double cos_t = std::cos(theta), sin_t = std::sin(theta);
        const double temp = (force + kPoleMassLength * theta_dot * theta_dot * sin_t) / kTotalMass;
        const double theta_acc = (kGravity * sin_t - cos_t * temp) /
                                 (kHalfLength * (4.0 / 3.0 - kPoleMass * cos_t * cos_t / kTotalMass));
        const double x_acc = temp - kPoleMassLength * theta_acc * cos_t / kTotalMass;

        state_[0] = x + kTau * x_dot;
        state_[1] = std::clamp(x_dot + kTau * x_acc, -kVelLimit, kVelLimit);
        state_[2] = theta + kTau * theta_dot;
        state_[3] = std::clamp(theta_dot + kTau * theta_acc, -kVelLimit, kVelLimit);

        ++steps_;
        const bool failed = std::abs(state_[0]) > kXLimit || std::abs(state_[2]) > kAngleLimit;
        done_ = failed || steps_ >= kMaxSteps;
        return {observation(), 1.0, done_};
    }

private:
    StateValue observation() const {
        return StateValue::continuous({state_[0], state_[1], state_[2], state_[3]});
    }

    EnvSpec spec_;
    double r_;
    std::optional<std::array<double, 4>> initial_state_;
    Rng rng_{0};
    double state_[4] = {0, 0, 0, 0};
    int steps_ = 0;
    bool done_ = true;
};

}  // namespace

std::unique_ptr<Environment> cartpole_new(double r,
                                          std::optional<std::array<double, 4>> initial_state) {
    return std::make_unique<CartpoleEnv>(r, initial_state);
}

}  // namespace delayrl
