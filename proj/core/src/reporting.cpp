#include "delayrl/reporting.hpp"

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <future>
#include <map>
#include <sstream>

#include <json.hpp>

#include "delayrl/textio.hpp"

namespace delayrl {

using nlohmann::json;

namespace {

json config_to_json(const TrainConfig& c) {
    return json{{"env", c.env_name},
                {"randomness", c.randomness},
                {"delay", c.delay},
                {"method", method_name(c.method)},
                {"total_steps", c.total_steps},
                {"num_paths", c.num_paths},
                {"risk_weight", c.risk_weight},
                {"seed", c.seed},
                {"discount", c.discount},
                {"q_kind", c.q_kind == QKind::Dqn ? "dqn" : "tabular"},
                {"hidden", c.hidden},
                {"q_learning_rate", c.q_learning_rate},
                {"model_learning_rate", c.model_learning_rate},
                {"batch_size", c.batch_size},
                {"replay_capacity", c.replay_capacity},
                {"target_sync_period", c.target_sync_period},
                {"eps_start", c.eps_start},
                {"eps_end", c.eps_end},
                {"model_smoothing", c.model_smoothing},
                {"tabular_q_lr_base", c.tabular_q_lr_base},
                {"tabular_q_lr_power", c.tabular_q_lr_power},
                {"warmup_steps", c.warmup_steps},
                {"eval_period", c.eval_period},
                {"eval_steps", c.eval_steps},
                {"final_eval_steps", c.final_eval_steps}};
}

TrainConfig config_from_json(const json& j, TrainConfig c = {}) {
    c.env_name = j.value("env", c.env_name);
    c.randomness = j.value("randomness", c.randomness);
    c.delay = j.value("delay", c.delay);
    if (j.contains("method")) c.method = method_from_name(j.at("method").get<std::string>());
    c.total_steps = j.value("total_steps", c.total_steps);
    c.num_paths = j.value("num_paths", c.num_paths);
    c.risk_weight = j.value("risk_weight", c.risk_weight);
    c.seed = j.value("seed", c.seed);
    c.discount = j.value("discount", c.discount);
    if (j.contains("q_kind"))
        c.q_kind = j.at("q_kind").get<std::string>() == "tabular" ? QKind::Tabular : QKind::Dqn;
    c.hidden = j.value("hidden", c.hidden);
    c.q_learning_rate = j.value("q_learning_rate", c.q_learning_rate);
    c.model_learning_rate = j.value("model_learning_rate", c.model_learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.replay_capacity = j.value("replay_capacity", c.replay_capacity);
    c.target_sync_period = j.value("target_sync_period", c.target_sync_period);
    c.eps_start = j.value("eps_start", c.eps_start);
    c.eps_end = j.value("eps_end", c.eps_end);
    c.model_smoothing = j.value("model_smoothing", c.model_smoothing);
    c.tabular_q_lr_base = j.value("tabular_q_lr_base", c.tabular_q_lr_base);
    c.tabular_q_lr_power = j.value("tabular_q_lr_power", c.tabular_q_lr_power);
    c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
    c.eval_period = j.value("eval_period", c.eval_period);
    c.eval_steps = j.value("eval_steps", c.eval_steps);
    c.final_eval_steps = j.value("final_eval_steps", c.final_eval_steps);
    return c;
}

json eval_to_json(const EvalStats& e) {
    return json{{"score", e.score},
                {"mean_step_reward", e.mean_step_reward},
                {"steps", e.steps},
                {"episodes", e.episodes},
                {"episode_return_mean", e.episode_return_mean},
                {"episode_return_std", e.episode_return_std},
                {"episode_returns", e.episode_returns}};
}

EvalStats eval_from_json(const json& j) {
    EvalStats e;
    e.score = j.at("score").get<double>();
    e.mean_step_reward = j.at("mean_step_reward").get<double>();
    e.steps = j.at("steps").get<long>();
    e.episodes = j.at("episodes").get<long>();
    e.episode_return_mean = j.at("episode_return_mean").get<double>();
    e.episode_return_std = j.at("episode_return_std").get<double>();
    e.episode_returns = j.at("episode_returns").get<std::vector<double>>();
    return e;
}

json record_to_json_obj(const RunRecord& rec) {
    return json{{"schema", "delayrl.run/1"},
                {"config", config_to_json(rec.config)},
                {"curve", rec.curve},
                {"best_index", rec.best_index},
                {"best_score", rec.best_score},
                {"best_eval_seed", rec.best_eval_seed},
                {"final_eval", eval_to_json(rec.final_eval)},
                {"final_eval_seed", rec.final_eval_seed},
                {"total_env_steps", rec.total_env_steps},
                {"total_records", rec.total_records}};
}

std::string format_randomness(double r) { return format_compact(r); }

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream oss;
    oss << in.rdbuf();
    return oss.str();
}

}  // namespace

TrainConfig train_config_from_json(const std::string& text, TrainConfig base) {
    return config_from_json(json::parse(text), std::move(base));
}

std::string train_config_to_json(const TrainConfig& cfg) {
    return config_to_json(cfg).dump(2) + "\n";
}

ExperimentGrid grid_from_json(const std::string& text) {
    const json j = json::parse(text);
    ExperimentGrid grid;
    grid.envs = j.at("envs").get<std::vector<std::string>>();
    grid.randomness = j.at("randomness").get<std::vector<double>>();
    if (j.contains("delays")) grid.delays = j.at("delays").get<std::vector<int>>();
    if (j.contains("methods")) {
        grid.methods.clear();
        for (const auto& name : j.at("methods"))
            grid.methods.push_back(method_from_name(name.get<std::string>()));
    }
    grid.num_seeds = j.value("num_seeds", grid.num_seeds);
    if (j.contains("base")) grid.base = config_from_json(j.at("base"), grid.base);
    return grid;
}

std::string run_record_to_json(const RunRecord& rec) {
    return record_to_json_obj(rec).dump(2) + "\n";
}

RunRecord run_record_from_json(const std::string& text) {
    const json j = json::parse(text);
    RunRecord rec;
    rec.config = config_from_json(j.at("config"));
    rec.curve = j.at("curve").get<std::vector<double>>();
    rec.best_index = j.at("best_index").get<int>();
    rec.best_score = j.at("best_score").get<double>();
    rec.best_eval_seed = j.at("best_eval_seed").get<std::uint64_t>();
    rec.final_eval = eval_from_json(j.at("final_eval"));
    rec.final_eval_seed = j.at("final_eval_seed").get<std::uint64_t>();
    rec.total_env_steps = j.at("total_env_steps").get<long>();
    rec.total_records = j.at("total_records").get<long>();
    return rec;
}

void save_run(const RunRecord& rec, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_file(dir / "record.json", run_record_to_json(rec));
    write_file(dir / "q.txt", rec.checkpoint.q_text);
    if (!rec.checkpoint.model_text.empty())
        write_file(dir / "model.txt", rec.checkpoint.model_text);
    if (!rec.final_checkpoint.q_text.empty()) {
        write_file(dir / "q_final.txt", rec.final_checkpoint.q_text);
        if (!rec.final_checkpoint.model_text.empty())
            write_file(dir / "model_final.txt", rec.final_checkpoint.model_text);
    }
    const json meta{{"wall_clock_seconds", rec.wall_clock_seconds}};
    write_file(dir / "meta.json", meta.dump(2) + "\n");
}

RunRecord load_run(const std::filesystem::path& dir) {
    RunRecord rec = run_record_from_json(read_file(dir / "record.json"));
    rec.checkpoint.q_text = read_file(dir / "q.txt");
    if (std::filesystem::exists(dir / "model.txt"))
        rec.checkpoint.model_text = read_file(dir / "model.txt");
    if (std::filesystem::exists(dir / "q_final.txt"))
        rec.final_checkpoint.q_text = read_file(dir / "q_final.txt");
    if (std::filesystem::exists(dir / "model_final.txt"))
        rec.final_checkpoint.model_text = read_file(dir / "model_final.txt");
    if (std::filesystem::exists(dir / "meta.json")) {
        const json meta = json::parse(read_file(dir / "meta.json"));
        rec.wall_clock_seconds = meta.value("wall_clock_seconds", 0.0);
    }
    return rec;
}

bool run_exists(const std::filesystem::path& dir) {
    return std::filesystem::exists(dir / "record.json");
}

std::filesystem::path run_dir(const std::filesystem::path& root, const TrainConfig& cfg) {
    return root / "runs" / cfg.env_name / method_name(cfg.method) / std::to_string(cfg.delay) /
           format_randomness(cfg.randomness) / std::to_string(cfg.seed);
}

std::filesystem::path resolve_out_root(const std::string& explicit_root) {
    if (!explicit_root.empty()) return explicit_root;
    if (const char* env = std::getenv("DELAYRL_OUT"); env && *env) return env;
    return ".";
}

std::vector<TrainConfig> expand_grid(const ExperimentGrid& grid) {
    std::vector<TrainConfig> cells;
    for (const auto& env : grid.envs)
        for (double r : grid.randomness)
            for (int d : grid.delays)
                for (Method m : grid.methods)
                    for (int s = 0; s < grid.num_seeds; ++s) {
                        TrainConfig cfg = grid.base;
                        cfg.env_name = env;
                        cfg.randomness = r;
                        cfg.delay = d;
                        cfg.method = m;
                        cfg.seed = grid.base.seed + static_cast<std::uint64_t>(s);
                        cells.push_back(std::move(cfg));
                    }
    return cells;
}

SweepOutcome run_sweep(const ExperimentGrid& grid, const std::filesystem::path& out_root,
                       int jobs) {
    const std::vector<TrainConfig> cells = expand_grid(grid);
    for (const auto& cfg : cells) validate_config(cfg);

    SweepOutcome outcome;
    std::vector<const TrainConfig*> todo;
    for (const auto& cfg : cells) {
        const auto dir = run_dir(out_root, cfg);
        outcome.dirs.push_back(dir);
        if (run_exists(dir)) {
            ++outcome.skipped;
        } else {
            todo.push_back(&cfg);
        }
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= todo.size()) return;
            const TrainConfig& cfg = *todo[i];
            const RunRecord rec = train(cfg);
            save_run(rec, run_dir(out_root, cfg));
        }
    };
    std::vector<std::future<void>> workers;
    const int n = std::max(1, std::min<int>(jobs, static_cast<int>(todo.size())));
    for (int j = 0; j < n; ++j) workers.push_back(std::async(std::launch::async, worker));
    for (auto& w : workers) w.get();
    outcome.trained = static_cast<int>(todo.size());
    return outcome;
}

std::vector<RunRecord> load_all_runs(const std::filesystem::path& root) {
    std::vector<RunRecord> out;
    if (!std::filesystem::exists(root)) return out;
    std::vector<std::filesystem::path> dirs;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(root))
        if (entry.is_regular_file() && entry.path().filename() == "record.json")
            dirs.push_back(entry.path().parent_path());
    std::sort(dirs.begin(), dirs.end());
    for (const auto& dir : dirs) out.push_back(load_run(dir));
    return out;
}

std::vector<Fig4Row> emit_fig4_table(std::span<const RunRecord> records, int top_k) {
    std::map<std::tuple<std::string, double, int, std::string>, std::vector<double>> cells;
    for (const auto& rec : records) {
        const auto key = std::make_tuple(rec.config.env_name, rec.config.randomness,
                                         rec.config.delay, method_name(rec.config.method));
        cells[key].push_back(rec.final_eval.score);
    }
    std::vector<Fig4Row> rows;
    for (auto& [key, scores] : cells) {
        std::sort(scores.begin(), scores.end(), std::greater<>());
        const int k = std::min<int>(top_k, static_cast<int>(scores.size()));
        double sum = 0.0;
        for (int i = 0; i < k; ++i) sum += scores[i];
        const double mean = sum / k;
        double sq = 0.0;
        for (int i = 0; i < k; ++i) sq += (scores[i] - mean) * (scores[i] - mean);
        const double sd = k > 1 ? std::sqrt(sq / (k - 1)) : 0.0;
        Fig4Row row;
        row.env = std::get<0>(key);
        row.randomness = std::get<1>(key);
        row.delay = std::get<2>(key);
        row.method = std::get<3>(key);
        row.runs = static_cast<int>(scores.size());
        row.top_k = k;
        row.mean = mean;
        row.stderr_ = sd / std::sqrt(static_cast<double>(k));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string fig4_to_csv(const std::vector<Fig4Row>& rows) {
    std::string out = "# schema: delayrl.fig4/1\n";
    out += "env,randomness,delay,method,runs,top_k,mean,stderr\n";
    for (const auto& r : rows) {
        out += r.env + "," + format_double(r.randomness) + "," + std::to_string(r.delay) + "," +
               r.method + "," + std::to_string(r.runs) + "," + std::to_string(r.top_k) + "," +
               format_double(r.mean) + "," + format_double(r.stderr_) + "\n";
    }
    return out;
}

namespace {

json risk_alpha_to_json(const RiskStudyAlphaResult& r) {
    return json{{"alpha", r.alpha},
                {"episodes", r.episodes},
                {"mean_return", r.mean_return},
                {"return_std", r.return_std},
                {"return_stderr", r.return_stderr},
                {"mean_distance_to_cliff", r.mean_distance_to_cliff},
                {"column_mean_distance", r.column_mean_distance},
                {"occupancy", r.occupancy},
                {"episode_lengths", r.episode_lengths},
                {"episode_returns", r.episode_returns},
                {"episode_mean_distances", r.episode_mean_distances}};
}

RiskStudyAlphaResult risk_alpha_from_json(const json& j) {
    RiskStudyAlphaResult r;
    r.alpha = j.at("alpha").get<double>();
    r.episodes = j.at("episodes").get<long>();
    r.mean_return = j.at("mean_return").get<double>();
    r.return_std = j.at("return_std").get<double>();
    r.return_stderr = j.at("return_stderr").get<double>();
    r.mean_distance_to_cliff = j.at("mean_distance_to_cliff").get<double>();
    r.column_mean_distance = j.at("column_mean_distance").get<std::vector<double>>();
    r.occupancy = j.at("occupancy").get<std::vector<long>>();
    r.episode_lengths = j.at("episode_lengths").get<std::vector<long>>();
    r.episode_returns = j.at("episode_returns").get<std::vector<double>>();
    r.episode_mean_distances = j.value("episode_mean_distances", std::vector<double>{});
    return r;
}

}  // namespace

std::string risk_study_to_json(const RiskStudyResult& result) {
    json alphas = json::array();
    for (const auto& r : result.per_alpha) alphas.push_back(risk_alpha_to_json(r));
    const json j{{"schema", "delayrl.riskstudy/1"},
                 {"slip", result.config.slip},
                 {"delay", result.config.delay},
                 {"episodes", result.config.episodes},
                 {"num_paths", result.config.num_paths},
                 {"max_episode_steps", result.config.max_episode_steps},
                 {"seed", result.config.seed},
                 {"discount", result.config.discount},
                 {"alphas", result.config.alphas},
                 {"results", alphas}};
    return j.dump(2) + "\n";
}

RiskStudyResult risk_study_from_json(const std::string& text) {
    const json j = json::parse(text);
    RiskStudyResult result;
    result.config.slip = j.at("slip").get<double>();
    result.config.delay = j.at("delay").get<int>();
    result.config.episodes = j.at("episodes").get<int>();
    result.config.num_paths = j.at("num_paths").get<int>();
    result.config.max_episode_steps = j.at("max_episode_steps").get<long>();
    result.config.seed = j.at("seed").get<std::uint64_t>();
    result.config.discount = j.at("discount").get<double>();
    result.config.alphas = j.at("alphas").get<std::vector<double>>();
    for (const auto& a : j.at("results")) result.per_alpha.push_back(risk_alpha_from_json(a));
    return result;
}

std::string cliff_occupancy_to_csv(const RiskStudyResult& result) {
    constexpr int kCols = 12;
    std::string out = "# schema: delayrl.cliff_occupancy/1\n";
    out += "slip,alpha,row,col,visits,mean_visits_per_episode\n";
    for (const auto& r : result.per_alpha) {
        for (std::size_t s = 0; s < r.occupancy.size(); ++s) {
            const long v = r.occupancy[s];
            out += format_double(result.config.slip) + "," + format_double(r.alpha) + "," +
                   std::to_string(s / kCols) + "," + std::to_string(s % kCols) + "," +
                   std::to_string(v) + "," +
                   format_double(static_cast<double>(v) / static_cast<double>(r.episodes)) + "\n";
        }
    }
    return out;
}

std::string cliff_distance_to_csv(const RiskStudyResult& result) {
    std::string out = "# schema: delayrl.cliff_distance/1\n";
    out += "slip,alpha,col,mean_distance_to_cliff,overall_mean_distance\n";
    for (const auto& r : result.per_alpha) {
        for (std::size_t c = 0; c < r.column_mean_distance.size(); ++c) {
            out += format_double(result.config.slip) + "," + format_double(r.alpha) + "," +
                   std::to_string(c) + "," + format_double(r.column_mean_distance[c]) + "," +
                   format_double(r.mean_distance_to_cliff) + "\n";
        }
    }
    return out;
}

std::string alpha_sweep_to_csv(std::span<const RiskStudyResult> results) {
    std::string out = "# schema: delayrl.alpha_sweep/1\n";
    out += "slip,alpha,episodes,mean_return,return_std,return_stderr\n";
    for (const auto& study : results) {
        for (const auto& r : study.per_alpha) {
            out += format_double(study.config.slip) + "," + format_double(r.alpha) + "," +
                   std::to_string(r.episodes) + "," + format_double(r.mean_return) + "," +
                   format_double(r.return_std) + "," + format_double(r.return_stderr) + "\n";
        }
    }
    return out;
}

}  // namespace delayrl
