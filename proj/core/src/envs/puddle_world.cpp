#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <optional>

#include "delayrl/env.hpp"

namespace delayrl {
namespace {

// Unit square, goal at (1,1). Two capsule puddles around axis-aligned
// segments, radius 0.1; stepping inside costs 400 * penetration depth on
// top of the -1 step cost. Moves are 0.05 along an axis plus Gaussian noise
// with standard deviation r on each coordinate, clipped to the square.
constexpr double kStep = 0.05;
constexpr double kGoalRadius = 0.05;
constexpr double kPuddleRadius = 0.10;
constexpr double kPuddleCost = 400.0;
constexpr int kMaxSteps = 2000;

struct Segment {
    double ax, ay, bx, by;
};
constexpr Segment kPuddles[2] = {
    {0.10, 0.75, 0.45, 0.75},
    {0.45, 0.40, 0.45, 0.80},
};

double dist_to_segment(double px, double py, const Segment& seg) {
    const double dx = seg.bx - seg.ax, dy = seg.by - seg.ay;
    const double len2 = dx * dx + dy * dy;
    double t = ((px - seg.ax) * dx + (py - seg.ay) * dy) / len2;
    t = std::clamp(t, 0.0, 1.0);
    const double cx = seg.ax + t * dx, cy = seg.ay + t * dy;
    return std::hypot(px - cx, py - cy);
}

double puddle_penalty(double x, double y) {
    double total = 0.0;
    for (const auto& seg : kPuddles) {
        const double depth = kPuddleRadius - dist_to_segment(x, y, seg);
        if (depth > 0.0) total += kPuddleCost * depth;
    }
    return total;
}

bool at_goal(double x, double y) { return std::hypot(x - 1.0, y - 1.0) <= kGoalRadius; }

class PuddleWorldEnv final : public Environment {
public:
    PuddleWorldEnv(double r, std::optional<std::array<double, 2>> start)
        : r_(r), start_(start) {
        if (r < 0.0) throw std::invalid_argument("puddle_world: r must be nonnegative");
        if (start && at_goal((*start)[0], (*start)[1]))
            throw std::invalid_argument("puddle_world: fixed start inside the goal zone");
        spec_.name = "puddle_world";
        spec_.randomness = r;
        spec_.state_kind = StateKind::Continuous;
        spec_.state_dim = 2;
        spec_.state_lo = {0.0, 0.0};
        spec_.state_hi = {1.0, 1.0};
        spec_.action_count = 4;
        spec_.episodic = true;
        spec_.reward_min = -1.0 - 2.0 * kPuddleCost * kPuddleRadius;
        spec_.reward_max = -1.0;
    }

    const EnvSpec& spec() const override { return spec_; }

    StateValue reset(std::uint64_t seed) override {
        rng_ = Rng::derive(seed, 0x7077);
        if (start_) {
            x_ = (*start_)[0];
            y_ = (*start_)[1];
        } else {
            do {
                x_ = rng_.uniform();
                y_ = rng_.uniform();
            } while (at_goal(x_, y_));
        }
        steps_ = 0;
        done_ = false;
        return observation();
    }

    StepOutcome step(int action) override {
        if (done_) throw std::logic_error("puddle_world: step() on a finished episode");
        if (action < 0 || action >= 4) throw std::invalid_argument("puddle_world: invalid action");
        // 0 left, 1 right, 2 down, 3 up.
        double dx = action == 0 ? -kStep : action == 1 ? +kStep : 0.0;
        double dy = action == 2 ? -kStep : action == 3 ? +kStep : 0.0;
        if (r_ > 0.0) {
            dx += rng_.normal(0.0, r_);
            dy += rng_.normal(0.0, r_);
        }
        x_ = std::clamp(x_ + dx, 0.0, 1.0);
        y_ = std::clamp(y_ + dy, 0.0, 1.0);
        ++steps_;
        const double reward = -1.0 - puddle_penalty(x_, y_);
        done_ = at_goal(x_, y_) || steps_ >= kMaxSteps;
        return {observation(), reward, done_};
    }

private:
    StateValue observation() const { return StateValue::continuous({x_, y_}); }

    EnvSpec spec_;
    double r_;
    std::optional<std::array<double, 2>> start_;
    Rng rng_{0};
    double x_ = 0.0, y_ = 0.0;
    int steps_ = 0;
    bool done_ = true;
};

}  // namespace

std::unique_ptr<Environment> puddle_world_new(double r,
                                              std::optional<std::array<double, 2>> start) {
    return std::make_unique<PuddleWorldEnv>(r, start);
}

}  // namespace delayrl
