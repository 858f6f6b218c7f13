#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "delayrl/delay.hpp"
#include "delayrl/env.hpp"
#include "delayrl/models.hpp"
#include "delayrl/policies.hpp"
#include "delayrl/qlearn.hpp"

namespace delayrl {

enum class Method { Smbs, DelayedQ, Amdp };
enum class QKind { Dqn, Tabular };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

struct TrainConfig {
    std::string env_name = "frozen_lake4";
    double randomness = 0.0;
    int delay = 0;
    Method method = Method::Smbs;
    long total_steps = 100'000;
    int num_paths = kDefaultPlanningPaths;     // M, planning paths per decision
    double risk_weight = kDefaultRiskWeight;   // alpha
    std::uint64_t seed = 1;
    double discount = 0.99;

    QKind q_kind = QKind::Dqn;
    std::vector<int> hidden = {64, 64};
    double q_learning_rate = 1e-3;
    double model_learning_rate = 1e-3;
    int batch_size = 64;
    long replay_capacity = 50'000;
    int target_sync_period = 500;
    double eps_start = 1.0;
    double eps_end = 0.05;  // annealed over the first half of training
    double model_smoothing = 0.0;
    double tabular_q_lr_base = 0.5;
    double tabular_q_lr_power = 0.6;

    long warmup_steps = 1000;  // steps collected before updates begin
    long eval_period = 2000;
    long eval_steps = 2000;
    long final_eval_steps = 10'000;
};

/// Throws std::invalid_argument with a diagnostic for inconsistent configs.
void validate_config(const TrainConfig& cfg);

/// Persistable snapshot of trained components. q_text holds the base
/// Q-function (or the augmented one for the amdp method); model_text holds
/// tabular counts or the Gaussian network and is empty for amdp.
struct Checkpoint {
    std::string q_text;
    std::string model_text;

    bool operator==(const Checkpoint&) const = default;
};

/// Live policy components for one method, reconstructible from a
/// Checkpoint. The amdp method never instantiates a dynamics model and the
/// planning methods never instantiate an augmented Q-function.
struct PolicyBundle {
    Method method = Method::Smbs;
    QKind q_kind = QKind::Dqn;
    EnvSpec spec;
    int delay = 0;
    int num_paths = kDefaultPlanningPaths;
    double risk_weight = kDefaultRiskWeight;

    std::unique_ptr<StateEncoder> base_encoder;
    std::unique_ptr<AugmentedEncoder> aug_encoder;
    std::unique_ptr<TabularModel> tabular_model;
    std::unique_ptr<GaussianDynamicsModel> gaussian_model;
    std::unique_ptr<TabularQ> tabular_q;
    std::unique_ptr<DqnAgent> dqn_q;
    std::unique_ptr<DqnAgent> aug_dqn;
    std::unique_ptr<ReplayBuffer> model_replay;  // feeds Gaussian model updates

    const DynamicsModel* model() const;
    std::unique_ptr<QFunction> q_view() const;

    /// Greedy decision for the configured method.
    int select(const AugmentedState& I, Rng& rng, DecisionTrace* trace = nullptr) const;
};

/// Fresh, untrained components for the config.
PolicyBundle build_components(const TrainConfig& cfg, const EnvSpec& spec, Rng& init_rng);
/// Components restored from a snapshot.
PolicyBundle make_policy(const TrainConfig& cfg, const EnvSpec& spec, const Checkpoint& ck);
Checkpoint snapshot(const PolicyBundle& bundle);

struct EvalStats {
    /// Ranking score: mean completed-episode return for episodic tasks,
    /// mean per-step reward for continuing ones.
    double score = 0.0;
    double mean_step_reward = 0.0;
    long steps = 0;
    long episodes = 0;  // completed within the evaluation window
    double episode_return_mean = 0.0;
    double episode_return_std = 0.0;
    std::vector<double> episode_returns;

    bool operator==(const EvalStats&) const = default;
};

/// Greedy evaluation of a checkpoint over `steps` delayed steps.
EvalStats evaluate(const TrainConfig& cfg, const Checkpoint& ck, long steps, std::uint64_t seed);

struct RunRecord {
    TrainConfig config;
    std::vector<double> curve;  // score at every eval_period boundary
    int best_index = -1;
    double best_score = 0.0;
    std::uint64_t best_eval_seed = 0;
    Checkpoint checkpoint;        // highest-scoring periodic evaluation
    Checkpoint final_checkpoint;  // parameters at the end of training
    EvalStats final_eval;
    std::uint64_t final_eval_seed = 0;
    long total_env_steps = 0;  // raw underlying steps, queue priming included
    long total_records = 0;    // transition records consumed
    double wall_clock_seconds = 0.0;  // volatile; excluded from the canonical record
};

/// Runs the delayed training loop: collects with the configured method
/// wrapped in epsilon-greedy exploration, reconstructs non-delayed
/// transitions, interleaves model and Q updates, and checkpoints the best
/// periodic evaluation.
RunRecord train(const TrainConfig& cfg);

struct SeedGroupResult {
    std::vector<RunRecord> runs;
    std::vector<int> top_indices;
    double top_mean = 0.0;
    double top_stderr = 0.0;
};

/// Trains num_seeds independent runs (seeds cfg.seed, cfg.seed+1, ...) and
/// aggregates the top_k by final evaluation score. Runs execute in
/// parallel up to `jobs` threads.
SeedGroupResult run_seed_group(const TrainConfig& cfg, int num_seeds = 5, int top_k = 4,
                               int jobs = 1);

/// ----- Risk-preference study on the cliff task -----

inline const std::vector<double> kAlphaSweepGrid = {0.0, 0.1, 0.25, 0.5, 0.75, 1.0};

struct RiskStudyConfig {
    double slip = 0.2;
    std::vector<double> alphas = kAlphaSweepGrid;
    int episodes = 500;
    int delay = 5;
    int num_paths = kDefaultPlanningPaths;
    long max_episode_steps = 400;  // runaway episodes are truncated
    std::uint64_t seed = 1;
    double discount = 0.99;
};

struct RiskStudyAlphaResult {
    double alpha = 0.0;
    long episodes = 0;
    double mean_return = 0.0;
    double return_std = 0.0;
    double return_stderr = 0.0;
    double mean_distance_to_cliff = 0.0;     // rows above the bottom, visit-weighted
    std::vector<double> column_mean_distance;  // per grid column
    std::vector<long> occupancy;               // visits per cell, all episodes
    std::vector<long> episode_lengths;
    std::vector<double> episode_returns;
    std::vector<double> episode_mean_distances;  // per-episode visit-weighted distance
};

struct RiskStudyResult {
    RiskStudyConfig config;
    std::vector<RiskStudyAlphaResult> per_alpha;
};

/// Runs the simulation policy with the exact Q-function and exact dynamics
/// on the delayed cliff task across risk weights.
RiskStudyResult cliff_risk_study(const RiskStudyConfig& cfg);

}  // namespace delayrl
