#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "delayrl/reporting.hpp"
#include "delayrl/trainer.hpp"

using namespace delayrl;

namespace {

TrainConfig tiny_tabular_config() {
    TrainConfig cfg;
    cfg.env_name = "frozen_lake4";
    cfg.randomness = 0.0;
    cfg.delay = 1;
    cfg.method = Method::Smbs;
    cfg.q_kind = QKind::Tabular;
    cfg.total_steps = 4000;
    cfg.num_paths = 5;
    cfg.risk_weight = 0.01;
    cfg.seed = 11;
    cfg.warmup_steps = 100;
    cfg.eval_period = 1000;
    cfg.eval_steps = 400;
    cfg.final_eval_steps = 600;
    cfg.tabular_q_lr_base = 1.0;
    cfg.tabular_q_lr_power = 0.0;
    return cfg;
}

}  // namespace

TEST_CASE("config validation rejects inconsistent settings") {
    TrainConfig cfg = tiny_tabular_config();
    cfg.total_steps = 0;
    CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);

    cfg = tiny_tabular_config();
    cfg.method = Method::Amdp;
    cfg.q_kind = QKind::Tabular;
    CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);

    cfg = tiny_tabular_config();
    cfg.env_name = "cartpole";
    cfg.q_kind = QKind::Tabular;
    CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);

    cfg = tiny_tabular_config();
    cfg.env_name = "no_such_env";
    CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);

    CHECK_THROWS_AS(method_from_name("bogus"), std::invalid_argument);
}

TEST_CASE("method isolation: amdp has no model, planners have no augmented q") {
    Rng rng(1);
    TrainConfig cfg = tiny_tabular_config();
    cfg.q_kind = QKind::Dqn;
    const auto spec = make_env(cfg.env_name, cfg.randomness)->spec();

    cfg.method = Method::Amdp;
    const auto amdp = build_components(cfg, spec, rng);
    CHECK(amdp.model() == nullptr);
    CHECK(amdp.aug_dqn != nullptr);
    CHECK(amdp.dqn_q == nullptr);

    cfg.method = Method::Smbs;
    const auto smbs = build_components(cfg, spec, rng);
    CHECK(smbs.model() != nullptr);
    CHECK(smbs.aug_dqn == nullptr);
    CHECK(smbs.dqn_q != nullptr);
}

TEST_CASE("training on the deterministic lake recovers the exact model and q") {
    TrainConfig cfg = tiny_tabular_config();
    cfg.total_steps = 100'000;
    cfg.eval_period = 20'000;
    cfg.eval_steps = 1000;
    cfg.final_eval_steps = 2000;
    cfg.eps_end = 0.3;  // keep visiting off-path pairs so backups stay fresh
    const RunRecord rec = train(cfg);

    const auto env = make_env(cfg.env_name, cfg.randomness);
    const TabularMdp mdp = env->as_tabular(cfg.discount);
    const auto sol = value_iteration(mdp);

    const TabularModel model = TabularModel::from_string(rec.final_checkpoint.model_text);
    const TabularQ q = TabularQ::from_string(rec.final_checkpoint.q_text);

    // Visited pairs of the fitted model match the exact dynamics exactly
    // (deterministic environment: observed frequencies are 0 or 1).
    long pairs = 0;
    for (int s = 0; s < 16; ++s)
        for (int a = 0; a < 4; ++a) {
            if (model.total(s, a) == 0) continue;
            ++pairs;
            for (int j = 0; j < 16; ++j)
                CHECK(model.prob(s, a, j) == mdp.prob(s, a, j));
        }
    CHECK(pairs > 20);

    // The learned q matches value iteration on well-visited pairs.
    double worst = 0.0;
    for (int s = 0; s < 16; ++s)
        for (int a = 0; a < 4; ++a) {
            if (model.total(s, a) < 50) continue;
            worst = std::max(worst, std::abs(q.value(s, a) - sol.q_star[s][a]));
        }
    CHECK(worst <= 1e-2);

    // Sample conservation: one record per raw environment step.
    CHECK(rec.total_records == rec.total_env_steps);
    CHECK(rec.curve.size() == static_cast<std::size_t>(cfg.total_steps / cfg.eval_period));
}

TEST_CASE("fixed seeds reproduce the run record byte for byte") {
    const TrainConfig cfg = tiny_tabular_config();
    const RunRecord a = train(cfg);
    const RunRecord b = train(cfg);
    CHECK(run_record_to_json(a) == run_record_to_json(b));
    CHECK(a.checkpoint == b.checkpoint);
    CHECK(a.final_eval.episode_returns == b.final_eval.episode_returns);
}

TEST_CASE("checkpoint fidelity: re-evaluating the best checkpoint reproduces its score") {
    TrainConfig cfg = tiny_tabular_config();
    const RunRecord rec = train(cfg);
    const EvalStats again = evaluate(cfg, rec.checkpoint, cfg.eval_steps, rec.best_eval_seed);
    CHECK(again.score == rec.best_score);
    const EvalStats final_again =
        evaluate(cfg, rec.checkpoint, cfg.final_eval_steps, rec.final_eval_seed);
    CHECK(final_again == rec.final_eval);
}

TEST_CASE("a crafted shortest-path policy scores exactly 1/6 on the lake") {
    // Greedy cycle start->goal in 6 moves; the goal pays +1 and teleports
    // back, so the long-run average is exactly one reward per six steps.
    TabularQ q(16, 4);
    const int path_states[] = {0, 1, 2, 6, 10, 14};
    const int path_actions[] = {2, 2, 1, 1, 1, 2};
    for (int i = 0; i < 6; ++i) q.set(path_states[i], path_actions[i], 1.0);

    TrainConfig cfg = tiny_tabular_config();
    cfg.delay = 0;
    Checkpoint ck;
    ck.q_text = q.to_string();
    ck.model_text = TabularModel(16, 4).to_string();
    const EvalStats stats = evaluate(cfg, ck, 6000, 123);
    CHECK(stats.mean_step_reward == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("the optimal cliff policy returns exactly -13 per episode") {
    auto env = cliff_new(0.0);
    const auto sol = value_iteration(env->as_tabular(0.99));
    TabularQ q(48, 4);
    for (int s = 0; s < 48; ++s)
        for (int a = 0; a < 4; ++a) q.set(s, a, sol.q_star[s][a]);

    TrainConfig cfg;
    cfg.env_name = "cliff";
    cfg.randomness = 0.0;
    cfg.delay = 0;
    cfg.method = Method::DelayedQ;
    cfg.q_kind = QKind::Tabular;
    Checkpoint ck;
    ck.q_text = q.to_string();
    ck.model_text = TabularModel(48, 4).to_string();
    const EvalStats stats = evaluate(cfg, ck, 1300, 7);
    REQUIRE(stats.episodes == 100);  // 13 steps per episode
    for (double r : stats.episode_returns) CHECK(r == -13.0);
    CHECK(stats.score == -13.0);
}

TEST_CASE("seed groups aggregate the top-k runs") {
    TrainConfig cfg = tiny_tabular_config();
    cfg.total_steps = 1500;
    cfg.eval_period = 500;
    cfg.eval_steps = 200;
    cfg.final_eval_steps = 300;
    CHECK_THROWS_AS(run_seed_group(cfg, 3, 4), std::invalid_argument);

    const SeedGroupResult group = run_seed_group(cfg, 5, 4, 2);
    CHECK(group.runs.size() == 5);
    CHECK(group.top_indices.size() == 4);
    // Hand-recompute the aggregate from the runs.
    std::vector<double> scores;
    for (const auto& run : group.runs) scores.push_back(run.final_eval.score);
    std::sort(scores.begin(), scores.end(), std::greater<>());
    double mean = 0.0;
    for (int i = 0; i < 4; ++i) mean += scores[i];
    mean /= 4.0;
    CHECK(group.top_mean == doctest::Approx(mean).epsilon(1e-12));
    double sq = 0.0;
    for (int i = 0; i < 4; ++i) sq += (scores[i] - mean) * (scores[i] - mean);
    CHECK(group.top_stderr == doctest::Approx(std::sqrt(sq / 3.0) / 2.0).epsilon(1e-12));

    // Seeds are assigned consecutively from the base config.
    for (int i = 0; i < 5; ++i) CHECK(group.runs[i].config.seed == cfg.seed + i);
}

TEST_CASE("parallel seed groups match serial execution") {
    TrainConfig cfg = tiny_tabular_config();
    cfg.total_steps = 1000;
    cfg.eval_period = 500;
    cfg.eval_steps = 100;
    cfg.final_eval_steps = 200;
    const SeedGroupResult serial = run_seed_group(cfg, 4, 2, 1);
    const SeedGroupResult parallel = run_seed_group(cfg, 4, 2, 4);
    CHECK(serial.top_mean == parallel.top_mean);
    for (int i = 0; i < 4; ++i)
        CHECK(run_record_to_json(serial.runs[i]) == run_record_to_json(parallel.runs[i]));
}

TEST_CASE("dqn training runs end to end on the delayed lake") {
    TrainConfig cfg;
    cfg.env_name = "frozen_lake4";
    cfg.randomness = 0.1;
    cfg.delay = 2;
    cfg.method = Method::Smbs;
    cfg.q_kind = QKind::Dqn;
    cfg.hidden = {16, 16};
    cfg.total_steps = 1200;
    cfg.warmup_steps = 200;
    cfg.eval_period = 600;
    cfg.eval_steps = 150;
    cfg.final_eval_steps = 200;
    cfg.num_paths = 5;
    const RunRecord rec = train(cfg);
    CHECK(rec.curve.size() == 2);
    CHECK(rec.total_records == rec.total_env_steps);
    const EvalStats again = evaluate(cfg, rec.checkpoint, cfg.eval_steps, rec.best_eval_seed);
    CHECK(again.score == rec.best_score);
}

TEST_CASE("amdp training runs end to end and records augmented transitions") {
    TrainConfig cfg;
    cfg.env_name = "cliff";
    cfg.randomness = 0.1;
    cfg.delay = 2;
    cfg.method = Method::Amdp;
    cfg.q_kind = QKind::Dqn;
    cfg.hidden = {16};
    cfg.total_steps = 800;
    cfg.warmup_steps = 100;
    cfg.eval_period = 400;
    cfg.eval_steps = 120;
    cfg.final_eval_steps = 150;
    const RunRecord rec = train(cfg);
    CHECK(rec.checkpoint.model_text.empty());
    CHECK(!rec.checkpoint.q_text.empty());
    const EvalStats again = evaluate(cfg, rec.checkpoint, cfg.eval_steps, rec.best_eval_seed);
    CHECK(again.score == rec.best_score);
}

TEST_CASE("gaussian-model training runs end to end on noisy cartpole") {
    TrainConfig cfg;
    cfg.env_name = "cartpole";
    cfg.randomness = 0.2;
    cfg.delay = 2;
    cfg.method = Method::DelayedQ;
    cfg.q_kind = QKind::Dqn;
    cfg.hidden = {16, 16};
    cfg.total_steps = 1000;
    cfg.warmup_steps = 200;
    cfg.eval_period = 500;
    cfg.eval_steps = 150;
    cfg.final_eval_steps = 200;
    const RunRecord rec = train(cfg);
    CHECK(!rec.checkpoint.model_text.empty());
    const EvalStats again = evaluate(cfg, rec.checkpoint, cfg.eval_steps, rec.best_eval_seed);
    CHECK(again.score == rec.best_score);
}

TEST_CASE("cliff risk study: deterministic setting makes alpha irrelevant") {
    RiskStudyConfig cfg;
    cfg.slip = 0.0;
    cfg.alphas = {0.0, 0.5, 1.0};
    cfg.episodes = 20;
    cfg.delay = 3;
    cfg.num_paths = 10;
    cfg.seed = 5;
    const RiskStudyResult result = cliff_risk_study(cfg);
    REQUIRE(result.per_alpha.size() == 3);
    for (const auto& r : result.per_alpha) {
        CHECK(r.occupancy == result.per_alpha[0].occupancy);
        CHECK(r.episode_returns == result.per_alpha[0].episode_returns);
    }
    // Occupancy sums equal total episode length.
    long occ = 0, len = 0;
    for (long v : result.per_alpha[0].occupancy) occ += v;
    for (long l : result.per_alpha[0].episode_lengths) len += l;
    CHECK(occ == len);
}
