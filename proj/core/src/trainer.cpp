#include "delayrl/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <future>
#include <numeric>
#include <stdexcept>

#include "delayrl/theory.hpp"

namespace delayrl {

namespace {

// Stream tags for deriving independent RNG streams from a run seed.
constexpr std::uint64_t kStreamInit = 1;
constexpr std::uint64_t kStreamExplore = 2;
constexpr std::uint64_t kStreamUpdate = 3;
constexpr std::uint64_t kStreamEpisode = 4;
constexpr std::uint64_t kStreamEval = 5;
constexpr std::uint64_t kStreamFinalEval = 6;
constexpr std::uint64_t kStreamEvalPolicy = 7;

std::uint64_t substream(std::uint64_t seed, std::uint64_t tag, std::uint64_t k) {
    return splitmix64(splitmix64(seed) ^ splitmix64(tag * 0x517cc1b727220a95ULL + k));
}

}  // namespace

std::string method_name(Method m) {
    switch (m) {
        case Method::Smbs: return "smbs";
        case Method::DelayedQ: return "delayed_q";
        case Method::Amdp: return "amdp";
    }
    return "?";
}

Method method_from_name(const std::string& name) {
    if (name == "smbs") return Method::Smbs;
    if (name == "delayed_q") return Method::DelayedQ;
    if (name == "amdp") return Method::Amdp;
    throw std::invalid_argument("unknown method '" + name + "' (expected smbs|delayed_q|amdp)");
}

void validate_config(const TrainConfig& cfg) {
    if (cfg.total_steps <= 0) throw std::invalid_argument("config: total_steps must be positive");
    if (cfg.delay < 0) throw std::invalid_argument("config: delay must be nonnegative");
    if (cfg.num_paths < 1) throw std::invalid_argument("config: num_paths must be >= 1");
    if (cfg.risk_weight < 0.0) throw std::invalid_argument("config: risk_weight must be >= 0");
    if (!(cfg.discount > 0.0 && cfg.discount < 1.0))
        throw std::invalid_argument("config: discount must lie in (0,1)");
    if (cfg.eval_period <= 0 || cfg.eval_steps <= 0 || cfg.final_eval_steps <= 0)
        throw std::invalid_argument("config: evaluation lengths must be positive");
    if (cfg.warmup_steps < 0) throw std::invalid_argument("config: warmup_steps must be >= 0");
    if (cfg.batch_size <= 0 || cfg.replay_capacity <= 0)
        throw std::invalid_argument("config: replay settings must be positive");
    const auto env = make_env(cfg.env_name, cfg.randomness);  // validates name and range
    const bool discrete = is_discrete(env->spec());
    if (cfg.q_kind == QKind::Tabular && !discrete)
        throw std::invalid_argument("config: tabular Q requires a discrete environment");
    if (cfg.method == Method::Amdp && cfg.q_kind != QKind::Dqn)
        throw std::invalid_argument("config: the amdp baseline trains a DQN over augmented states");
}

const DynamicsModel* PolicyBundle::model() const {
    if (tabular_model) return tabular_model.get();
    if (gaussian_model) return gaussian_model.get();
    return nullptr;
}

std::unique_ptr<QFunction> PolicyBundle::q_view() const {
    if (tabular_q) return std::make_unique<TabularQView>(*tabular_q);
    if (dqn_q) return std::make_unique<DqnQView>(*dqn_q, spec.action_count);
    return nullptr;
}

int PolicyBundle::select(const AugmentedState& I, Rng& rng, DecisionTrace* trace) const {
    switch (method) {
        case Method::Smbs: {
            const auto q = q_view();
            return smbs_select(*q, *model(), I, num_paths, risk_weight, rng, trace);
        }
        case Method::DelayedQ: {
            const auto q = q_view();
            return delayed_q_select(*q, *model(), I, trace);
        }
        case Method::Amdp: {
            const DqnAmdpQ q(*aug_dqn, *aug_encoder, spec.action_count);
            return amdp_select(q, I, trace);
        }
    }
    throw std::logic_error("PolicyBundle: unknown method");
}

namespace {

DqnConfig dqn_config_from(const TrainConfig& cfg) {
    DqnConfig dc;
    dc.hidden = cfg.hidden;
    dc.learning_rate = cfg.q_learning_rate;
    dc.gamma = cfg.discount;
    dc.batch_size = cfg.batch_size;
    dc.replay_capacity = static_cast<std::size_t>(cfg.replay_capacity);
    dc.target_sync_period = cfg.target_sync_period;
    return dc;
}

PolicyBundle bundle_skeleton(const TrainConfig& cfg, const EnvSpec& spec) {
    PolicyBundle b;
    b.method = cfg.method;
    b.q_kind = cfg.q_kind;
    b.spec = spec;
    b.delay = cfg.delay;
    b.num_paths = cfg.num_paths;
    b.risk_weight = cfg.risk_weight;
    b.base_encoder = std::make_unique<StateEncoder>(spec);
    return b;
}

void add_method_components(PolicyBundle& b, const TrainConfig& cfg, Rng& init_rng) {
    const EnvSpec& spec = b.spec;
    const bool discrete = is_discrete(spec);
    if (cfg.method == Method::Amdp) {
        b.aug_encoder = std::make_unique<AugmentedEncoder>(spec, cfg.delay);
        // Augmented transitions are stored pre-encoded, so the agent's
        // encoder just copies the vector through.
        auto identity = [](const StateValue& s, std::vector<double>& out) { out = s.vec(); };
        b.aug_dqn = std::make_unique<DqnAgent>(b.aug_encoder->dim(), spec.action_count,
                                               dqn_config_from(cfg), identity, init_rng);
        return;
    }
    if (discrete) {
        b.tabular_model =
            std::make_unique<TabularModel>(spec.num_states, spec.action_count, cfg.model_smoothing);
    } else {
        b.gaussian_model = std::make_unique<GaussianDynamicsModel>(
            spec.state_dim, spec.action_count, cfg.hidden, init_rng, cfg.model_learning_rate);
        b.model_replay = std::make_unique<ReplayBuffer>(static_cast<std::size_t>(cfg.replay_capacity));
    }
    if (cfg.q_kind == QKind::Tabular) {
        b.tabular_q = std::make_unique<TabularQ>(spec.num_states, spec.action_count);
    } else {
        const StateEncoder* enc = b.base_encoder.get();
        auto encode = [enc](const StateValue& s, std::vector<double>& out) { enc->encode(s, out); };
        b.dqn_q = std::make_unique<DqnAgent>(enc->dim(), spec.action_count, dqn_config_from(cfg),
                                             encode, init_rng);
    }
}

}  // namespace

PolicyBundle build_components(const TrainConfig& cfg, const EnvSpec& spec, Rng& init_rng) {
    PolicyBundle b = bundle_skeleton(cfg, spec);
    add_method_components(b, cfg, init_rng);
    return b;
}

Checkpoint snapshot(const PolicyBundle& b) {
    Checkpoint ck;
    if (b.tabular_q) ck.q_text = b.tabular_q->to_string();
    if (b.dqn_q) ck.q_text = mlp_to_string(b.dqn_q->online());
    if (b.aug_dqn) ck.q_text = mlp_to_string(b.aug_dqn->online());
    if (b.tabular_model) ck.model_text = b.tabular_model->to_string();
    if (b.gaussian_model) ck.model_text = mlp_to_string(b.gaussian_model->network());
    return ck;
}

PolicyBundle make_policy(const TrainConfig& cfg, const EnvSpec& spec, const Checkpoint& ck) {
    Rng throwaway(0);
    PolicyBundle b = build_components(cfg, spec, throwaway);
    if (b.tabular_q) *b.tabular_q = TabularQ::from_string(ck.q_text);
    if (b.dqn_q) b.dqn_q->set_online(mlp_from_string(ck.q_text));
    if (b.aug_dqn) b.aug_dqn->set_online(mlp_from_string(ck.q_text));
    if (b.tabular_model) *b.tabular_model = TabularModel::from_string(ck.model_text);
    if (b.gaussian_model) b.gaussian_model->set_network(mlp_from_string(ck.model_text));
    return b;
}

namespace {

/// Shared evaluation loop: greedy rollout for `steps` delayed steps.
EvalStats run_eval(const TrainConfig& cfg, const PolicyBundle& policy, long steps,
                   std::uint64_t seed) {
    auto env = make_env(cfg.env_name, cfg.randomness);
    const bool episodic = env->spec().episodic;
    DelayedEnv denv(std::move(env), cfg.delay);
    Rng policy_rng = Rng::derive(seed, kStreamEvalPolicy);

    EvalStats stats;
    stats.steps = steps;
    long episode = 0;
    AugmentedState I = denv.reset(substream(seed, kStreamEpisode, episode));
    double reward_sum = 0.0;
    double episode_return = 0.0;

    auto fold_records = [&]() {
        for (const auto& rec : denv.drain_transitions()) episode_return += rec.reward;
    };

    for (long t = 0; t < steps; ++t) {
        const int a = policy.select(I, policy_rng);
        const DelayedStep ds = denv.step(a);
        reward_sum += ds.reward;
        fold_records();
        I = ds.state;
        if (ds.episode_done) {
            stats.episode_returns.push_back(episode_return);
            episode_return = 0.0;
            ++episode;
            I = denv.reset(substream(seed, kStreamEpisode, episode));
        }
    }
    stats.mean_step_reward = reward_sum / static_cast<double>(steps);
    stats.episodes = static_cast<long>(stats.episode_returns.size());
    if (stats.episodes > 0) {
        double sum = 0.0;
        for (double r : stats.episode_returns) sum += r;
        stats.episode_return_mean = sum / stats.episodes;
        double sq = 0.0;
        for (double r : stats.episode_returns)
            sq += (r - stats.episode_return_mean) * (r - stats.episode_return_mean);
        stats.episode_return_std =
            stats.episodes > 1 ? std::sqrt(sq / (stats.episodes - 1)) : 0.0;
    }
    if (episodic) {
        // Mean completed-episode return; when the window closed no episode,
        // fall back to the accumulated partial return.
        denv.flush_pending();
        fold_records();
        stats.score = stats.episodes > 0 ? stats.episode_return_mean : episode_return;
    } else {
        stats.score = stats.mean_step_reward;
    }
    return stats;
}

}  // namespace

EvalStats evaluate(const TrainConfig& cfg, const Checkpoint& ck, long steps, std::uint64_t seed) {
    validate_config(cfg);
    if (steps <= 0) throw std::invalid_argument("evaluate: steps must be positive");
    const auto env = make_env(cfg.env_name, cfg.randomness);
    const PolicyBundle policy = make_policy(cfg, env->spec(), ck);
    return run_eval(cfg, policy, steps, seed);
}

RunRecord train(const TrainConfig& cfg) {
    validate_config(cfg);
    const auto start_time = std::chrono::steady_clock::now();

    auto env = make_env(cfg.env_name, cfg.randomness);
    const EnvSpec spec = env->spec();
    DelayedEnv denv(std::move(env), cfg.delay);

    Rng init_rng = Rng::derive(cfg.seed, kStreamInit);
    Rng explore_rng = Rng::derive(cfg.seed, kStreamExplore);
    Rng update_rng = Rng::derive(cfg.seed, kStreamUpdate);
    PolicyBundle bundle = build_components(cfg, spec, init_rng);

    const EpsilonSchedule eps{cfg.eps_start, cfg.eps_end,
                              std::max<long>(1, cfg.total_steps / 2)};

    RunRecord rec;
    rec.config = cfg;

    long episode = 0;
    long resets = 1;
    AugmentedState I = denv.reset(substream(cfg.seed, kStreamEpisode, episode));

    std::vector<double> aug_encoded;
    if (bundle.aug_encoder) aug_encoded = bundle.aug_encoder->encode(I);

    long eval_index = 0;
    for (long t = 0; t < cfg.total_steps; ++t) {
        int action;
        const double e = eps.value(t);
        if (e > 0.0 && explore_rng.uniform() < e) {
            action = explore_rng.uniform_int(spec.action_count);
        } else {
            action = bundle.select(I, explore_rng);
        }

        const DelayedStep ds = denv.step(action);

        for (auto& r : denv.drain_transitions()) {
            ++rec.total_records;
            if (bundle.tabular_model) bundle.tabular_model->fit_update({&r, 1});
            if (bundle.model_replay) bundle.model_replay->push(r);
            if (bundle.tabular_q)
                tabular_q_update_scheduled(*bundle.tabular_q, r, cfg.discount,
                                           cfg.tabular_q_lr_base, cfg.tabular_q_lr_power);
            if (bundle.dqn_q) bundle.dqn_q->observe(std::move(r));
        }
        if (bundle.aug_dqn) {
            TransitionRecord aug_rec;
            aug_rec.s = StateValue::continuous(aug_encoded);
            aug_rec.a = action;
            bundle.aug_encoder->encode(ds.state, aug_encoded);
            aug_rec.s_next = StateValue::continuous(aug_encoded);
            aug_rec.reward = ds.reward;
            aug_rec.terminated = ds.episode_done;
            bundle.aug_dqn->observe(std::move(aug_rec));
        }

        if (t >= cfg.warmup_steps) {
            if (bundle.dqn_q) bundle.dqn_q->update(update_rng);
            if (bundle.aug_dqn) bundle.aug_dqn->update(update_rng);
            if (bundle.gaussian_model &&
                bundle.model_replay->size() >= static_cast<std::size_t>(cfg.batch_size)) {
                std::vector<TransitionRecord> batch;
                batch.reserve(cfg.batch_size);
                for (int i = 0; i < cfg.batch_size; ++i)
                    batch.push_back(bundle.model_replay->sample(update_rng));
                bundle.gaussian_model->fit_update(batch);
            }
        }

        I = ds.state;
        if (ds.episode_done) {
            ++episode;
            ++resets;
            I = denv.reset(substream(cfg.seed, kStreamEpisode, episode));
            if (bundle.aug_encoder) bundle.aug_encoder->encode(I, aug_encoded);
        }

        if ((t + 1) % cfg.eval_period == 0) {
            const Checkpoint ck = snapshot(bundle);
            const std::uint64_t eval_seed = substream(cfg.seed, kStreamEval, eval_index);
            const PolicyBundle eval_policy = make_policy(cfg, spec, ck);
            const EvalStats es = run_eval(cfg, eval_policy, cfg.eval_steps, eval_seed);
            rec.curve.push_back(es.score);
            if (rec.best_index < 0 || es.score > rec.best_score) {
                rec.best_index = static_cast<int>(eval_index);
                rec.best_score = es.score;
                rec.best_eval_seed = eval_seed;
                rec.checkpoint = ck;
            }
            ++eval_index;
        }
    }

    denv.flush_pending();
    rec.total_records += static_cast<long>(denv.drain_transitions().size());
    rec.total_env_steps = cfg.total_steps + static_cast<long>(resets) * cfg.delay;

    if (rec.best_index < 0) {
        // Training shorter than one eval period: the final parameters are
        // the checkpoint.
        rec.best_index = 0;
        rec.best_eval_seed = substream(cfg.seed, kStreamEval, 0);
        rec.checkpoint = snapshot(bundle);
        const PolicyBundle eval_policy = make_policy(cfg, spec, rec.checkpoint);
        rec.best_score = run_eval(cfg, eval_policy, cfg.eval_steps, rec.best_eval_seed).score;
        rec.curve.push_back(rec.best_score);
    }

    rec.final_checkpoint = snapshot(bundle);
    rec.final_eval_seed = substream(cfg.seed, kStreamFinalEval, 0);
    const PolicyBundle final_policy = make_policy(cfg, spec, rec.checkpoint);
    rec.final_eval = run_eval(cfg, final_policy, cfg.final_eval_steps, rec.final_eval_seed);

    rec.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
    return rec;
}

SeedGroupResult run_seed_group(const TrainConfig& cfg, int num_seeds, int top_k, int jobs) {
    if (num_seeds < top_k)
        throw std::invalid_argument("run_seed_group: num_seeds must be >= top_k");
    if (top_k < 1) throw std::invalid_argument("run_seed_group: top_k must be >= 1");
    jobs = std::max(1, jobs);

    SeedGroupResult result;
    result.runs.resize(num_seeds);
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= num_seeds) return;
            TrainConfig run_cfg = cfg;
            run_cfg.seed = cfg.seed + static_cast<std::uint64_t>(i);
            result.runs[i] = train(run_cfg);
        }
    };
    std::vector<std::future<void>> workers;
    for (int j = 0; j < std::min(jobs, num_seeds); ++j)
        workers.push_back(std::async(std::launch::async, worker));
    for (auto& w : workers) w.get();

    std::vector<int> order(num_seeds);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return result.runs[a].final_eval.score > result.runs[b].final_eval.score;
    });
    order.resize(top_k);
    result.top_indices = order;
    double sum = 0.0;
    for (int i : order) sum += result.runs[i].final_eval.score;
    result.top_mean = sum / top_k;
    double sq = 0.0;
    for (int i : order) {
        const double d = result.runs[i].final_eval.score - result.top_mean;
        sq += d * d;
    }
    const double sd = top_k > 1 ? std::sqrt(sq / (top_k - 1)) : 0.0;
    result.top_stderr = sd / std::sqrt(static_cast<double>(top_k));
    return result;
}

RiskStudyResult cliff_risk_study(const RiskStudyConfig& cfg) {
    constexpr int kCols = 12;
    constexpr int kRows = 4;
    auto probe = cliff_new(cfg.slip);
    const TabularMdp mdp = probe->as_tabular(cfg.discount);
    const ValueSolution sol = value_iteration(mdp);
    const ExactQ q(sol);
    const ExactTabularDynamics model(mdp);

    RiskStudyResult result;
    result.config = cfg;
    for (std::size_t ai = 0; ai < cfg.alphas.size(); ++ai) {
        const double alpha = cfg.alphas[ai];
        RiskStudyAlphaResult res;
        res.alpha = alpha;
        res.occupancy.assign(kRows * kCols, 0);

        // Streams are alpha-independent: with deterministic dynamics the
        // same seed must retrace the same paths whatever the risk weight.
        Rng policy_rng = Rng::derive(cfg.seed, 0xa1f0);
        // Queues prime with 'up'. Random priming from the start cell walks
        // straight off the cliff and its penalties would drown the policy
        // differences the study measures.
        const QueueInit prime_up = [](Rng&) { return 0; };
        for (int ep = 0; ep < cfg.episodes; ++ep) {
            DelayedEnv denv(cliff_new(cfg.slip), cfg.delay, prime_up);
            AugmentedState I = denv.reset(substream(cfg.seed, 0xa110, ep));
            double ret = 0.0;
            long len = 0;
            for (long t = 0; t < cfg.max_episode_steps && !denv.episode_done(); ++t) {
                const int a = smbs_select(q, model, I, cfg.num_paths, alpha, policy_rng);
                I = denv.step(a).state;
            }
            denv.flush_pending();
            double ep_dist = 0.0;
            for (const auto& rec : denv.drain_transitions()) {
                ret += rec.reward;
                ++len;
                ++res.occupancy[rec.s.index()];
                ep_dist += static_cast<double>(kRows - 1 - rec.s.index() / kCols);
            }
            res.episode_returns.push_back(ret);
            res.episode_lengths.push_back(len);
            res.episode_mean_distances.push_back(len > 0 ? ep_dist / len : 0.0);
        }

        res.episodes = cfg.episodes;
        double sum = 0.0;
        for (double r : res.episode_returns) sum += r;
        res.mean_return = sum / cfg.episodes;
        double sq = 0.0;
        for (double r : res.episode_returns) sq += (r - res.mean_return) * (r - res.mean_return);
        res.return_std = cfg.episodes > 1 ? std::sqrt(sq / (cfg.episodes - 1)) : 0.0;
        res.return_stderr = res.return_std / std::sqrt(static_cast<double>(cfg.episodes));

        long total_visits = 0;
        double dist_sum = 0.0;
        res.column_mean_distance.assign(kCols, 0.0);
        std::vector<long> column_visits(kCols, 0);
        for (int s = 0; s < kRows * kCols; ++s) {
            const long v = res.occupancy[s];
            if (v == 0) continue;
            const int row = s / kCols, col = s % kCols;
            const double distance = static_cast<double>(kRows - 1 - row);
            total_visits += v;
            dist_sum += distance * v;
            column_visits[col] += v;
            res.column_mean_distance[col] += distance * v;
        }
        res.mean_distance_to_cliff = total_visits > 0 ? dist_sum / total_visits : 0.0;
        for (int c = 0; c < kCols; ++c)
            res.column_mean_distance[c] =
                column_visits[c] > 0 ? res.column_mean_distance[c] / column_visits[c] : 0.0;

        result.per_alpha.push_back(std::move(res));
    }
    return result;
}

}  // namespace delayrl
