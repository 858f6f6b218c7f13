#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "delayrl/reporting.hpp"
#include "delayrl/theory.hpp"
#include "delayrl/trainer.hpp"

namespace fs = std::filesystem;
using namespace delayrl;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream oss;
    oss << in.rdbuf();
    return oss.str();
}

void spit(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::istringstream iss(csv);
    std::string tok;
    while (std::getline(iss, tok, ',')) out.push_back(std::stod(tok));
    return out;
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::istringstream iss(csv);
    std::string tok;
    while (std::getline(iss, tok, ',')) out.push_back(std::stoi(tok));
    return out;
}

struct TrainFlags {
    std::string config_file;
    std::string env;
    std::optional<double> randomness;
    std::optional<int> delay;
    std::string method;
    std::optional<long> steps;
    std::optional<int> paths;
    std::optional<double> alpha;
    std::optional<std::uint64_t> seed;
    std::string q_kind;
    std::string preset;
    std::string out_root;
};

TrainConfig resolve_train_config(const TrainFlags& f) {
    TrainConfig cfg;
    if (!f.config_file.empty()) cfg = train_config_from_json(slurp(f.config_file), cfg);
    if (!f.env.empty()) cfg.env_name = f.env;
    if (f.randomness) cfg.randomness = *f.randomness;
    if (f.delay) cfg.delay = *f.delay;
    if (!f.method.empty()) cfg.method = method_from_name(f.method);
    if (f.steps) cfg.total_steps = *f.steps;
    if (f.paths) cfg.num_paths = *f.paths;
    if (f.alpha) cfg.risk_weight = *f.alpha;
    if (f.seed) cfg.seed = *f.seed;
    if (!f.q_kind.empty()) {
        if (f.q_kind != "dqn" && f.q_kind != "tabular")
            throw std::invalid_argument("--q-kind must be dqn or tabular");
        cfg.q_kind = f.q_kind == "dqn" ? QKind::Dqn : QKind::Tabular;
    }
    if (!f.preset.empty()) {
        if (f.preset == "standard") cfg.num_paths = kDefaultPlanningPaths;
        else if (f.preset == "fast") cfg.num_paths = kFastPlanningPaths;
        else throw std::invalid_argument("--preset must be standard or fast");
    }
    return cfg;
}

int cmd_train(const TrainFlags& flags) {
    const TrainConfig cfg = resolve_train_config(flags);
    validate_config(cfg);
    const fs::path root = resolve_out_root(flags.out_root);
    const fs::path dir = run_dir(root, cfg);
    if (run_exists(dir)) {
        std::cout << "already trained: " << dir.string() << "\n";
        return 0;
    }
    const RunRecord rec = train(cfg);
    save_run(rec, dir);
    std::cout << "run " << dir.string() << "\n"
              << "best_score " << rec.best_score << "\n"
              << "final_score " << rec.final_eval.score << "\n";
    return 0;
}

int cmd_eval_run(const std::string& run_path, long steps, std::optional<std::uint64_t> seed,
                 bool use_final) {
    const RunRecord rec = load_run(run_path);
    const Checkpoint& ck = use_final ? rec.final_checkpoint : rec.checkpoint;
    const std::uint64_t eval_seed = seed ? *seed : rec.final_eval_seed;
    const long eval_steps = steps > 0 ? steps : rec.config.final_eval_steps;
    const EvalStats stats = evaluate(rec.config, ck, eval_steps, eval_seed);
    std::cout << "score " << stats.score << "\n"
              << "mean_step_reward " << stats.mean_step_reward << "\n"
              << "episodes " << stats.episodes << "\n"
              << "episode_return_mean " << stats.episode_return_mean << "\n"
              << "episode_return_std " << stats.episode_return_std << "\n";
    return 0;
}

int cmd_risk_study(double slip, const std::string& alphas_csv, int episodes, int delay, int paths,
                   long max_steps, std::uint64_t seed, const std::string& out_root) {
    RiskStudyConfig cfg;
    cfg.slip = slip;
    if (!alphas_csv.empty()) cfg.alphas = parse_double_list(alphas_csv);
    cfg.episodes = episodes;
    cfg.delay = delay;
    cfg.num_paths = paths;
    cfg.max_episode_steps = max_steps;
    cfg.seed = seed;
    const RiskStudyResult result = cliff_risk_study(cfg);
    const fs::path root = resolve_out_root(out_root);
    const fs::path file = root / ("riskstudy_slip" + format_compact(slip) + ".json");
    spit(file, risk_study_to_json(result));
    std::cout << "study " << file.string() << "\n";
    for (const auto& r : result.per_alpha)
        std::cout << "alpha " << r.alpha << " mean_return " << r.mean_return << " return_std "
                  << r.return_std << " mean_distance " << r.mean_distance_to_cliff << "\n";
    return 0;
}

int cmd_sweep(const std::string& grid_file, const std::string& out_root, int jobs) {
    const ExperimentGrid grid = grid_from_json(slurp(grid_file));
    const fs::path root = resolve_out_root(out_root);
    const SweepOutcome outcome = run_sweep(grid, root, jobs);
    std::cout << "trained " << outcome.trained << "\nskipped " << outcome.skipped << "\n";
    return 0;
}

int cmd_verify(int theorem, const std::string& env, double r, int d, int paths, double alpha,
               double delta, long trials, const std::string& queue_csv, double shift,
               std::uint64_t seed) {
    const auto probe = make_env(env, r);
    TabularMdp mdp = probe->as_tabular();
    if (theorem == 1) {
        const auto report = verify_theorem1(mdp, d, paths, alpha);
        std::cout << report.summary() << "\n";
        return report.ok() ? 0 : 1;
    }
    if (shift != 0.0) mdp = shift_rewards(mdp, shift);
    // Default augmented state: the most likely initial state with a seeded
    // random queue unless one is given.
    const int base = argmax_lowest(mdp.initial_dist());
    std::vector<int> queue;
    if (!queue_csv.empty()) {
        queue = parse_int_list(queue_csv);
    } else {
        Rng qrng = Rng::derive(seed, 0x712);
        for (int i = 0; i < d; ++i) queue.push_back(qrng.uniform_int(mdp.num_actions()));
    }
    Rng rng = Rng::derive(seed, 0x713);
    const auto report =
        verify_theorem2(mdp, {StateValue::discrete(base), queue}, delta, paths, trials, rng);
    std::cout << report.summary() << "\n";
    const double b = std::min(1.0, report.bound);
    const double se = std::sqrt(b * (1.0 - b) / static_cast<double>(report.trials));
    return report.empirical_frequency <= report.bound + 3.0 * se ? 0 : 1;
}

int cmd_plotdata(const std::string& kind, const std::string& runs_root,
                 const std::vector<std::string>& studies, const std::string& out,
                 const std::string& out_dir) {
    if (kind == "fig4") {
        const auto records = load_all_runs(fs::path(runs_root));
        if (records.empty()) {
            std::cerr << "no run records under " << runs_root << "\n";
            return 1;
        }
        const auto rows = emit_fig4_table(records);
        spit(out, fig4_to_csv(rows));
        std::cout << "wrote " << out << " (" << rows.size() << " rows)\n";
        return 0;
    }
    if (kind == "cliff_paths") {
        for (const auto& path : studies) {
            const RiskStudyResult study = risk_study_from_json(slurp(path));
            const std::string tag = format_compact(study.config.slip);
            const fs::path dir = out_dir.empty() ? fs::path(".") : fs::path(out_dir);
            spit(dir / ("cliff_occupancy_slip" + tag + ".csv"), cliff_occupancy_to_csv(study));
            spit(dir / ("cliff_distance_slip" + tag + ".csv"), cliff_distance_to_csv(study));
            std::cout << "wrote cliff tables for slip " << tag << "\n";
        }
        return studies.empty() ? 1 : 0;
    }
    if (kind == "alpha_sweep") {
        std::vector<RiskStudyResult> loaded;
        for (const auto& path : studies) loaded.push_back(risk_study_from_json(slurp(path)));
        if (loaded.empty()) {
            std::cerr << "alpha_sweep needs at least one --study file\n";
            return 1;
        }
        spit(out, alpha_sweep_to_csv(loaded));
        std::cout << "wrote " << out << "\n";
        return 0;
    }
    std::cerr << "unknown plotdata kind '" << kind << "'\n";
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"delayrl: risk-sensitive stochastic planning under constant delay"};
    app.require_subcommand(1);

    // train
    TrainFlags tf;
    auto* train_cmd = app.add_subcommand("train", "Train one configuration and persist the run");
    train_cmd->add_option("--config", tf.config_file, "JSON config file (flags override it)");
    train_cmd->add_option("--env", tf.env, "Environment name");
    double tf_r = 0.0;
    bool tf_r_set = false;
    train_cmd->add_option("--r", tf_r, "Environment randomness")->each([&](const std::string&) {
        tf_r_set = true;
    });
    int tf_d = 0;
    bool tf_d_set = false;
    train_cmd->add_option("--d", tf_d, "Delay steps")->each([&](const std::string&) {
        tf_d_set = true;
    });
    train_cmd->add_option("--method", tf.method, "smbs | delayed_q | amdp");
    long tf_steps = 0;
    train_cmd->add_option("--steps", tf_steps, "Total training steps");
    int tf_paths = 0;
    train_cmd->add_option("--paths", tf_paths, "Planning paths per decision (M)");
    double tf_alpha = -1.0;
    train_cmd->add_option("--alpha", tf_alpha, "Risk weight");
    std::uint64_t tf_seed = 0;
    bool tf_seed_set = false;
    train_cmd->add_option("--seed", tf_seed, "Run seed")->each([&](const std::string&) {
        tf_seed_set = true;
    });
    train_cmd->add_option("--q-kind", tf.q_kind, "dqn | tabular");
    train_cmd->add_option("--preset", tf.preset, "standard (M=50) | fast (M=20)");
    train_cmd->add_option("--out", tf.out_root, "Output root (default $DELAYRL_OUT or .)");

    // eval
    std::string eval_run;
    long eval_steps = 0;
    std::uint64_t eval_seed = 0;
    bool eval_seed_set = false, eval_final = false, eval_risk = false;
    double rs_slip = 0.2;
    std::string rs_alphas;
    int rs_episodes = 500, rs_delay = 5, rs_paths = kDefaultPlanningPaths;
    long rs_max_steps = 400;
    std::uint64_t rs_seed = 1;
    std::string eval_out;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a stored run or run the risk study");
    eval_cmd->add_option("--run", eval_run, "Run directory (from train/sweep)");
    eval_cmd->add_option("--steps", eval_steps, "Evaluation steps");
    eval_cmd->add_option("--seed", eval_seed, "Evaluation seed")->each([&](const std::string&) {
        eval_seed_set = true;
    });
    eval_cmd->add_flag("--final", eval_final, "Evaluate the final (not best) checkpoint");
    eval_cmd->add_flag("--risk-study", eval_risk,
                       "Run the exact-q cliff risk study instead of a checkpoint");
    eval_cmd->add_option("--slip", rs_slip, "Cliff slip probability (risk study)");
    eval_cmd->add_option("--alphas", rs_alphas, "Comma list of risk weights (risk study)");
    eval_cmd->add_option("--episodes", rs_episodes, "Episodes per risk weight (risk study)");
    eval_cmd->add_option("--d", rs_delay, "Delay steps (risk study)");
    eval_cmd->add_option("--paths", rs_paths, "Planning paths (risk study)");
    eval_cmd->add_option("--max-steps", rs_max_steps, "Episode cap (risk study)");
    eval_cmd->add_option("--study-seed", rs_seed, "Seed (risk study)");
    eval_cmd->add_option("--out", eval_out, "Output root for study files");

    // sweep
    std::string sweep_config, sweep_out;
    int sweep_jobs = 1;
    auto* sweep_cmd = app.add_subcommand("sweep", "Expand and run an experiment grid");
    sweep_cmd->add_option("--config", sweep_config, "Grid JSON file")->required();
    sweep_cmd->add_option("--out", sweep_out, "Output root (default $DELAYRL_OUT or .)");
    sweep_cmd->add_option("--jobs", sweep_jobs, "Concurrent runs");

    // verify
    int v_theorem = 1;
    std::string v_env = "frozen_lake4";
    double v_r = 0.0;
    int v_d = 1, v_paths = kDefaultPlanningPaths;
    double v_alpha = kDefaultRiskWeight, v_delta = 2.0, v_shift = 0.0;
    long v_trials = 10'000;
    std::string v_queue;
    std::uint64_t v_seed = 1;
    auto* verify_cmd = app.add_subcommand("verify", "Run the theorem checks");
    verify_cmd->add_option("--theorem", v_theorem, "1 or 2")->required();
    verify_cmd->add_option("--env", v_env, "Discrete environment name");
    verify_cmd->add_option("--r", v_r, "Environment randomness");
    verify_cmd->add_option("--d", v_d, "Delay steps");
    verify_cmd->add_option("--paths", v_paths, "Planning paths (M)");
    verify_cmd->add_option("--alpha", v_alpha, "Risk weight");
    verify_cmd->add_option("--delta", v_delta, "Chebyshev delta (theorem 2)");
    verify_cmd->add_option("--trials", v_trials, "Trials (theorem 2)");
    verify_cmd->add_option("--queue", v_queue, "Comma action list for the augmented state");
    verify_cmd->add_option("--shift", v_shift, "Reward shift applied before theorem 2");
    verify_cmd->add_option("--seed", v_seed, "Seed (theorem 2)");

    // plotdata
    std::string p_kind, p_runs, p_out = "table.csv", p_out_dir;
    std::vector<std::string> p_studies;
    auto* plot_cmd = app.add_subcommand("plotdata", "Aggregate runs into figure-ready tables");
    plot_cmd->add_option("--kind", p_kind, "fig4 | cliff_paths | alpha_sweep")->required();
    plot_cmd->add_option("--runs", p_runs, "Run-record root (fig4)");
    plot_cmd->add_option("--study", p_studies, "Risk-study JSON file(s)");
    plot_cmd->add_option("--out", p_out, "Output CSV path");
    plot_cmd->add_option("--out-dir", p_out_dir, "Output directory (cliff_paths)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train_cmd) {
            if (tf_r_set) tf.randomness = tf_r;
            if (tf_d_set) tf.delay = tf_d;
            if (tf_steps > 0) tf.steps = tf_steps;
            if (tf_paths > 0) tf.paths = tf_paths;
            if (tf_alpha >= 0.0) tf.alpha = tf_alpha;
            if (tf_seed_set) tf.seed = tf_seed;
            return cmd_train(tf);
        }
        if (*eval_cmd) {
            if (eval_risk)
                return cmd_risk_study(rs_slip, rs_alphas, rs_episodes, rs_delay, rs_paths,
                                      rs_max_steps, rs_seed, eval_out);
            if (eval_run.empty()) {
                std::cerr << "eval: need --run DIR or --risk-study\n";
                return 2;
            }
            return cmd_eval_run(eval_run, eval_steps,
                                eval_seed_set ? std::optional<std::uint64_t>(eval_seed)
                                              : std::nullopt,
                                eval_final);
        }
        if (*sweep_cmd) return cmd_sweep(sweep_config, sweep_out, sweep_jobs);
        if (*verify_cmd)
            return cmd_verify(v_theorem, v_env, v_r, v_d, v_paths, v_alpha, v_delta, v_trials,
                              v_queue, v_shift, v_seed);
        if (*plot_cmd) return cmd_plotdata(p_kind, p_runs, p_studies, p_out, p_out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
