#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "delayrl/trainer.hpp"

namespace delayrl {

/// ----- Run persistence -----
///
/// A run directory holds:
///   record.json  - the canonical RunRecord (deterministic; byte-identical
///                  across reruns of the same seeded config)
///   meta.json    - volatile details (wall clock)
///   q.txt, model.txt - the best checkpoint in the nn / tabular text formats

std::string run_record_to_json(const RunRecord& rec);
RunRecord run_record_from_json(const std::string& text);

/// Applies the fields present in a JSON object (the record.json "config"
/// schema; all keys optional) on top of base.
TrainConfig train_config_from_json(const std::string& text, TrainConfig base = {});
std::string train_config_to_json(const TrainConfig& cfg);

void save_run(const RunRecord& rec, const std::filesystem::path& dir);
RunRecord load_run(const std::filesystem::path& dir);
bool run_exists(const std::filesystem::path& dir);

/// runs/<env>/<method>/<d>/<r>/<seed> under the output root.
std::filesystem::path run_dir(const std::filesystem::path& root, const TrainConfig& cfg);

/// Output root: explicit argument, else the DELAYRL_OUT environment
/// variable, else the current directory.
std::filesystem::path resolve_out_root(const std::string& explicit_root);

/// ----- Experiment grids -----

struct ExperimentGrid {
    std::vector<std::string> envs;
    std::vector<double> randomness;
    std::vector<int> delays = {5, 15, 25};
    std::vector<Method> methods = {Method::Smbs, Method::DelayedQ, Method::Amdp};
    int num_seeds = 5;
    TrainConfig base;  // remaining hyperparameters; seed is the group base
};

std::vector<TrainConfig> expand_grid(const ExperimentGrid& grid);

/// Grid description: {"envs": [...], "randomness": [...], "delays": [...],
/// "methods": [...], "num_seeds": n, "base": {partial TrainConfig}}.
ExperimentGrid grid_from_json(const std::string& text);

struct SweepOutcome {
    int trained = 0;
    int skipped = 0;  // cells whose record.json already existed
    std::vector<std::filesystem::path> dirs;
};

/// Runs every grid cell not already on disk; cells run concurrently up to
/// `jobs` threads and each cell persists its own directory.
SweepOutcome run_sweep(const ExperimentGrid& grid, const std::filesystem::path& out_root,
                       int jobs = 1);

/// Loads every record.json below root (recursively).
std::vector<RunRecord> load_all_runs(const std::filesystem::path& root);

/// ----- Figure-shaped tables -----

struct Fig4Row {
    std::string env;
    double randomness = 0.0;
    int delay = 0;
    std::string method;
    int runs = 0;
    int top_k = 0;
    double mean = 0.0;
    double stderr_ = 0.0;
};

/// One row per complete (env, r, d, method) cell, aggregating the top 4 of
/// the cell's runs by final evaluation score.
std::vector<Fig4Row> emit_fig4_table(std::span<const RunRecord> records, int top_k = 4);
std::string fig4_to_csv(const std::vector<Fig4Row>& rows);

/// Risk-study persistence and tables.
std::string risk_study_to_json(const RiskStudyResult& result);
RiskStudyResult risk_study_from_json(const std::string& text);

/// Occupancy grid (one row per alpha and cell) and per-column mean
/// distance-to-cliff.
std::string cliff_occupancy_to_csv(const RiskStudyResult& result);
std::string cliff_distance_to_csv(const RiskStudyResult& result);

/// Per-alpha aggregate returns, one row per (slip, alpha).
std::string alpha_sweep_to_csv(std::span<const RiskStudyResult> results);

}  // namespace delayrl
