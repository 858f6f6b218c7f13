#include <array>
#include <memory>
#include <string>
#include <vector>

#include "discrete_env.hpp"

namespace delayrl {
namespace {

const char* const kMap4[] = {
    "SFFF",
    "FHFH",
    "FFFH",
    "HFFG",
};

const char* const kMap8[] = {
    "SFFFFFFF",
    "FFFFFFFF",
    "FFFHFFFF",
    "FFFFFHFF",
    "FFFHFFFF",
    "FHHFFFHF",
    "FHFFHFHF",
    "FFFHFFFG",
};

// Actions follow the usual grid convention: 0 left, 1 down, 2 right, 3 up.
constexpr int kDr[4] = {0, +1, 0, -1};
constexpr int kDc[4] = {-1, 0, +1, 0};

// Continuing task: holes and the goal both teleport back to the start, the
// goal pays +1 on arrival. Intended move succeeds with probability 1 - 2r,
// each perpendicular neighbor with probability r; moves off the grid bounce.
class FrozenLakeEnv final : public DiscreteEnv {
public:
    FrozenLakeEnv(int size, double r) : size_(size), r_(r) {
        if (size != 4 && size != 8)
            throw std::invalid_argument("frozen_lake: size must be 4 or 8");
        if (r < 0.0 || r > 1.0 / 3.0)
            throw std::invalid_argument("frozen_lake: r must lie in [0, 1/3]");
        const char* const* rows = size == 4 ? kMap4 : kMap8;
        cells_.assign(rows, rows + size);
        spec_.name = "frozen_lake" + std::to_string(size);
        spec_.randomness = r;
        spec_.state_kind = StateKind::Discrete;
        spec_.num_states = size * size;
        spec_.action_count = 4;
        spec_.episodic = false;
        spec_.reward_min = 0.0;
        spec_.reward_max = 1.0;
    }

protected:
    std::vector<Branch> branches(int s, int a) const override {
        std::vector<Branch> out;
        const double p_intended = 1.0 - 2.0 * r_;
        append_move(out, s, a, p_intended);
        if (r_ > 0.0) {
            // Perpendicular slips: the two actions orthogonal to a.
            const int perp1 = (a + 1) % 4;
            const int perp2 = (a + 3) % 4;
            append_move(out, s, perp1, r_);
            append_move(out, s, perp2, r_);
        }
        return out;
    }

    int initial_state() const override { return 0; }

private:
    void append_move(std::vector<Branch>& out, int s, int dir, double prob) const {
        if (prob <= 0.0) return;
        const int row = s / size_, col = s % size_;
        int nr = row + kDr[dir], nc = col + kDc[dir];
        if (nr < 0 || nr >= size_ || nc < 0 || nc >= size_) {
            nr = row;
            nc = col;
        }
        const char cell = cells_[nr][nc];
        if (cell == 'H') {
            out.push_back({prob, 0, 0.0});
        } else if (cell == 'G') {
            out.push_back({prob, 0, 1.0});
        } else {
            out.push_back({prob, nr * size_ + nc, 0.0});
        }
    }

    int size_;
    double r_;
    std::vector<std::string> cells_;
};

}  // namespace

std::unique_ptr<Environment> frozen_lake_new(int size, double r) {
    return std::make_unique<FrozenLakeEnv>(size, r);
}

}  // namespace delayrl
