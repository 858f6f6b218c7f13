#include <memory>
#include <vector>

#include "discrete_env.hpp"

namespace delayrl {
namespace {

// 4 x 12 grid, rows top to bottom. Start (3,0), goal (3,11), cliff cells
// (3,1)..(3,10). Actions: 0 up, 1 right, 2 down, 3 left. After the intended
// move (off-grid moves bounce) the agent slips one extra cell downward with
// probability `slip`, unless the move already resolved on the cliff or the
// goal. Entering the cliff costs -100 on top of the -1 step cost and
// teleports back to the start; the goal ends the episode.
constexpr int kRows = 4;
constexpr int kCols = 12;
constexpr int kStart = (kRows - 1) * kCols;
constexpr int kGoal = kRows * kCols - 1;
constexpr double kStepReward = -1.0;
constexpr double kCliffPenalty = -100.0;
constexpr int kDr[4] = {-1, 0, +1, 0};
constexpr int kDc[4] = {0, +1, 0, -1};

bool is_cliff(int s) { return s > kStart && s < kGoal; }

class CliffEnv final : public DiscreteEnv {
public:
    explicit CliffEnv(double slip) : slip_(slip) {
        if (slip < 0.0 || slip > 0.5)
            throw std::invalid_argument("cliff: slip must lie in [0, 0.5]");
        spec_.name = "cliff";
        spec_.randomness = slip;
        spec_.state_kind = StateKind::Discrete;
        spec_.num_states = kRows * kCols;
        spec_.action_count = 4;
        spec_.episodic = true;
        spec_.reward_min = kStepReward + kCliffPenalty;
        spec_.reward_max = kStepReward;
    }

protected:
    std::vector<Branch> branches(int s, int a) const override {
        const int moved = move(s, kDr[a], kDc[a]);
        if (is_cliff(moved) || moved == kGoal || slip_ == 0.0)
            return {resolve(moved, 1.0)};
        return {resolve(moved, 1.0 - slip_), resolve(move(moved, +1, 0), slip_)};
    }

    int initial_state() const override { return kStart; }

    bool terminal_state(int s) const override { return s == kGoal; }

private:
    static int move(int s, int dr, int dc) {
        const int row = s / kCols, col = s % kCols;
        const int nr = row + dr, nc = col + dc;
        if (nr < 0 || nr >= kRows || nc < 0 || nc >= kCols) return s;
        return nr * kCols + nc;
    }

    static Branch resolve(int cell, double prob) {
        if (is_cliff(cell)) return {prob, kStart, kStepReward + kCliffPenalty, false};
        if (cell == kGoal) return {prob, kGoal, kStepReward, true};
        return {prob, cell, kStepReward, false};
    }

    double slip_;
};

}  // namespace

std::unique_ptr<Environment> cliff_new(double slip) {
    return std::make_unique<CliffEnv>(slip);
}

}  // namespace delayrl
