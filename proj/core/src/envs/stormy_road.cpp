#include <cmath>
#include <memory>

#include "discrete_env.hpp"

namespace delayrl {
namespace {

// Positions -12..12 mapped to indices 0..24. |p| <= 10 is road, |p| in
// {11, 12} is swamp. Actions steer by {-2, -1, +1, +2} cells; after the
// displacement the storm shifts the car one cell left or right with
// probability r each. In the swamp the storm has no grip: steering toward
// the road recovers to the nearest road cell with probability 0.9 (strong)
// or 0.5 (mild); steering away never recovers.
constexpr int kMaxPos = 12;
constexpr int kRoadEdge = 10;
constexpr double kRoadReward = 1.0;
constexpr double kSwampReward = -10.0;
constexpr double kStrongRecovery = 0.9;
constexpr double kMildRecovery = 0.5;
constexpr int kDisplacement[4] = {-2, -1, +1, +2};

int clamp_pos(int p) { return std::max(-kMaxPos, std::min(kMaxPos, p)); }
int to_index(int p) { return p + kMaxPos; }
int to_pos(int s) { return s - kMaxPos; }
bool on_road(int p) { return std::abs(p) <= kRoadEdge; }

class StormyRoadEnv final : public DiscreteEnv {
public:
    explicit StormyRoadEnv(double r) {
        if (r < 0.0 || r > 0.5)
            throw std::invalid_argument("stormy_road: r must lie in [0, 0.5]");
        r_ = r;
        spec_.name = "stormy_road";
        spec_.randomness = r;
        spec_.state_kind = StateKind::Discrete;
        spec_.num_states = 2 * kMaxPos + 1;
        spec_.action_count = 4;
        spec_.episodic = false;
        spec_.reward_min = kSwampReward;
        spec_.reward_max = kRoadReward;
    }

protected:
    std::vector<Branch> branches(int s, int a) const override {
        const int p = to_pos(s);
        const double reward = on_road(p) ? kRoadReward : kSwampReward;
        std::vector<Branch> out;
        if (on_road(p)) {
            const int moved = clamp_pos(p + kDisplacement[a]);
            if (r_ > 0.0) {
                out.push_back({r_, to_index(clamp_pos(moved - 1)), reward});
                out.push_back({1.0 - 2.0 * r_, to_index(moved), reward});
                out.push_back({r_, to_index(clamp_pos(moved + 1)), reward});
            } else {
                out.push_back({1.0, to_index(moved), reward});
            }
        } else {
            // Swamp. Recovery probability depends on steering toward the road.
            const int toward = p < 0 ? +1 : -1;
            const int road_cell = p < 0 ? -kRoadEdge : kRoadEdge;
            const int d = kDisplacement[a];
            double recover = 0.0;
            if (d * toward == 2) recover = kStrongRecovery;
            else if (d * toward == 1) recover = kMildRecovery;
            if (recover > 0.0) out.push_back({recover, to_index(road_cell), reward});
            if (recover < 1.0) out.push_back({1.0 - recover, s, reward});
        }
        return out;
    }

    int initial_state() const override { return to_index(0); }

private:
    double r_;
};

}  // namespace

std::unique_ptr<Environment> stormy_road_new(double r) {
    return std::make_unique<StormyRoadEnv>(r);
}

}  // namespace delayrl
