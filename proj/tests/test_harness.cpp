#include <catch2/catch_amalgamated.hpp>

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dvm/harness.hpp"
#include "test_util.hpp"

using namespace dvm;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("dvm_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// Small, fast experiment used by the smoke tests.
ExperimentConfig tiny_config(const std::string& out, Condition cond = Condition::dvm) {
    ExperimentConfig cfg;
    cfg.domain = Domain::spread2;
    cfg.condition = cond;
    cfg.seeds = {1, 2};
    cfg.phase1_episodes = 6;
    cfg.phase2_episodes = 4;
    cfg.eval_interval = 2;
    cfg.eval_episodes = 2;
    cfg.hidden = {8, 8};
    cfg.replay_capacity = 1000;
    cfg.algo.algo = Algo::maddpg_discrete;
    cfg.algo.batch_size = 16;
    cfg.dvm.iterations = 4;
    cfg.dvm.batch_size = 8;
    cfg.dvm.mode = condition_mode(cond);
    cfg.out_dir = out;
    return cfg;
}

}  // namespace

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

TEST_CASE("write_metrics: header plus one row per record, exact round trip") {
    auto dir = fresh_dir("metrics");
    std::vector<EvalRecord> records;
    EvalRecord r;
    r.seed = 3;
    r.phase = 1;
    r.episode = 10;
    r.mean_return = -13.2507891234567891;
    r.actor_loss = 1.0 / 3.0;
    r.critic_loss = 0.1 + 0.2;  // not exactly 0.3
    r.wall_clock_s = 25.0;
    records.push_back(r);
    std::string path = (dir / "m.csv").string();
    write_metrics(records, path);

    std::string text = slurp(path);
    CHECK(text.substr(0, text.find('\n')) ==
          "seed,phase,episode,mean_return,actor_loss,critic_loss,wall_clock_s");
    CHECK(std::count(text.begin(), text.end(), '\n') == 2);
    CHECK(text.back() == '\n');

    // full-precision decimal: parsing back reproduces the doubles bit-exactly
    std::string row = text.substr(text.find('\n') + 1);
    std::vector<std::string> fields;
    std::stringstream ss(row);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    REQUIRE(fields.size() == 7);
    auto parse = [](const std::string& s) {
        double v = 0.0;
        auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        REQUIRE(res.ec == std::errc());
        return v;
    };
    CHECK(parse(fields[3]) == r.mean_return);
    CHECK(parse(fields[4]) == r.actor_loss);
    CHECK(parse(fields[5]) == r.critic_loss);
    CHECK(parse(fields[6]) == r.wall_clock_s);
}

TEST_CASE("write_metrics: rejects an empty record list and unwritable paths") {
    CHECK_THROWS_AS(write_metrics({}, "/tmp/never.csv"), ParamError);
    std::vector<EvalRecord> records(1);
    CHECK_THROWS_AS(write_metrics(records, "/nonexistent_dir_zzz/m.csv"), IoError);
}

// ---------------------------------------------------------------------------
// Evaluation oracles
// ---------------------------------------------------------------------------

TEST_CASE("evaluate_policy: never-pushing policies score the static-box return") {
    Rng rng(1);
    PhaseSpec spec = make_phase_spec(Domain::pushbox, Phase::three);
    std::vector<size_t> obs_dims(2, obs_dim(spec));
    std::vector<AgentBundle> team;
    AlgoConfig cfg;
    cfg.algo = Algo::maddpg_discrete;
    for (int i = 0; i < 2; ++i) {
        team.push_back(make_bundle(cfg.algo, obs_dims, i, {4}, 0.01, 0.01, rng));
        team[i].actor.zero();  // argmax of zero logits is the no-op action
    }
    Rng eval_rng(2);
    double got = evaluate_policy(team, spec, 5, cfg, eval_rng);
    double want = spec.params.episode_length *
                  -(spec.params.target_dist * spec.params.target_dist);
    CHECK(got == Catch::Approx(want).margin(1e-12));
}

TEST_CASE("evaluate_policy: degenerate world with agents on landmarks returns zero") {
    Rng rng(3);
    EnvParams env;
    env.world_half = 0.0;  // spawn positions and landmark anchors all collapse to the origin
    PhaseSpec spec = make_phase_spec(Domain::spread2, Phase::one, env);
    std::vector<size_t> obs_dims(2, obs_dim(spec));
    AlgoConfig cfg;
    cfg.algo = Algo::maddpg_discrete;
    std::vector<AgentBundle> team;
    for (int i = 0; i < 2; ++i) {
        team.push_back(make_bundle(cfg.algo, obs_dims, i, {4}, 0.01, 0.01, rng));
        team[i].actor.zero();
    }
    Rng eval_rng(4);
    CHECK(evaluate_policy(team, spec, 3, cfg, eval_rng) == 0.0);
}

TEST_CASE("evaluate_policy: doubling episodes is statistically stable") {
    Rng rng(5);
    PhaseSpec spec = make_phase_spec(Domain::spread2, Phase::one);
    std::vector<size_t> obs_dims(2, obs_dim(spec));
    AlgoConfig cfg;
    cfg.algo = Algo::maddpg_discrete;
    std::vector<AgentBundle> team;
    for (int i = 0; i < 2; ++i)
        team.push_back(make_bundle(cfg.algo, obs_dims, i, {8}, 0.01, 0.01, rng));

    Rng eval_rng(6);
    std::vector<double> singles;
    for (int e = 0; e < 40; ++e) singles.push_back(evaluate_policy(team, spec, 1, cfg, eval_rng));
    double mean20 = 0.0, mean40 = 0.0, var = 0.0;
    for (int e = 0; e < 20; ++e) mean20 += singles[e] / 20.0;
    for (int e = 0; e < 40; ++e) mean40 += singles[e] / 40.0;
    for (int e = 0; e < 40; ++e) var += (singles[e] - mean40) * (singles[e] - mean40) / 39.0;
    double sigma_mean = std::sqrt(var / 20.0);
    CHECK(std::abs(mean40 - mean20) < 3.0 * sigma_mean);
}

// ---------------------------------------------------------------------------
// Policy grids
// ---------------------------------------------------------------------------

TEST_CASE("dump_policy_grid: resolution 1 gives a single centered row") {
    Rng rng(7);
    PhaseSpec spec = make_phase_spec(Domain::spread2, Phase::one);
    std::vector<size_t> obs_dims(2, obs_dim(spec));
    AlgoConfig cfg;
    cfg.algo = Algo::maddpg_discrete;
    std::vector<AgentBundle> team;
    for (int i = 0; i < 2; ++i)
        team.push_back(make_bundle(cfg.algo, obs_dims, i, {4}, 0.01, 0.01, rng));
    auto rows = dump_policy_grid(team, spec, 0, 1, cfg);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].x == 0.0);
    CHECK(rows[0].y == 0.0);
    CHECK(std::isfinite(rows[0].q_value));
}

TEST_CASE("dump_policy_grid: resolution r gives exactly r^2 rows") {
    Rng rng(8);
    PhaseSpec spec = make_phase_spec(Domain::spread3, Phase::two);
    std::vector<size_t> obs_dims(3, obs_dim(spec));
    AlgoConfig cfg;
    cfg.algo = Algo::maddpg_discrete;
    std::vector<AgentBundle> team;
    for (int i = 0; i < 3; ++i)
        team.push_back(make_bundle(cfg.algo, obs_dims, i, {4}, 0.01, 0.01, rng));
    for (int r : {2, 5, 9}) CHECK(dump_policy_grid(team, spec, 1, r, cfg).size() ==
                                  static_cast<size_t>(r) * r);
    auto dir = fresh_dir("grid");
    auto rows = dump_policy_grid(team, spec, 0, 3, cfg);
    write_grid(rows, (dir / "g.csv").string());
    std::string text = slurp((dir / "g.csv").string());
    CHECK(text.substr(0, text.find('\n')) == "x,y,action,q_value");
    CHECK(std::count(text.begin(), text.end(), '\n') == 10);
}

TEST_CASE("dump_policy_grid: push box is unsupported") {
    Rng rng(9);
    PhaseSpec spec = make_phase_spec(Domain::pushbox, Phase::one);
    std::vector<size_t> obs_dims(2, obs_dim(spec));
    AlgoConfig cfg;
    cfg.algo = Algo::maddpg_discrete;
    std::vector<AgentBundle> team;
    for (int i = 0; i < 2; ++i)
        team.push_back(make_bundle(cfg.algo, obs_dims, i, {4}, 0.01, 0.01, rng));
    CHECK_THROWS_AS(dump_policy_grid(team, spec, 0, 4, cfg), UnsupportedError);
}

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

TEST_CASE("config: flat key = value text with comments") {
    std::stringstream ss;
    ss << "# experiment\n"
       << "domain = spread3\n"
       << "algo = masac   # continuous\n"
       << "condition = value_match\n"
       << "seeds = 5, 6, 7\n"
       << "phase1_episodes = 12\n"
       << "hidden = 32, 32\n"
       << "alpha = 0.2\n"
       << "\n";
    auto kv = parse_config_text(ss);
    ExperimentConfig cfg = build_config(kv);
    CHECK(cfg.domain == Domain::spread3);
    CHECK(cfg.algo.algo == Algo::masac);
    CHECK(cfg.condition == Condition::value_match);
    CHECK(cfg.seeds == std::vector<uint64_t>{5, 6, 7});
    CHECK(cfg.phase1_episodes == 12);
    CHECK(cfg.hidden == std::vector<size_t>{32, 32});
    CHECK(cfg.algo.alpha == 0.2);
    CHECK(cfg.algo.actor_lr == 3e-4);  // masac default rate
    CHECK(cfg.dvm.mode == DvmMode::value_match_only);
}

TEST_CASE("config: cli overrides beat file values, explicit lr beats the default") {
    std::map<std::string, std::string> file_kv = {{"domain", "spread2"}, {"algo", "maddpg"}};
    std::map<std::string, std::string> overrides = {{"domain", "pushbox"}, {"critic_lr", "0.5"}};
    ExperimentConfig cfg = build_config(file_kv, overrides);
    CHECK(cfg.domain == Domain::pushbox);
    CHECK(cfg.algo.critic_lr == 0.5);
    CHECK(cfg.algo.actor_lr == 0.01);  // maddpg default preserved
}

TEST_CASE("config: unknown keys and malformed values are errors") {
    std::map<std::string, std::string> kv = {{"not_a_key", "1"}};
    CHECK_THROWS_AS(build_config(kv), ConfigError);
    kv = {{"gamma", "fast"}};
    CHECK_THROWS_AS(build_config(kv), ConfigError);
    kv = {{"gamma", "1.5"}};
    CHECK_THROWS_AS(build_config(kv), ConfigError);
    std::stringstream bad("stray line without equals\n");
    CHECK_THROWS_AS(parse_config_text(bad), ConfigError);
}

TEST_CASE("config: DVM_SEED_OFFSET shifts every seed") {
    setenv("DVM_SEED_OFFSET", "100", 1);
    std::map<std::string, std::string> kv = {{"seeds", "1,2,3"}};
    ExperimentConfig cfg = build_config(kv);
    unsetenv("DVM_SEED_OFFSET");
    CHECK(cfg.seeds == std::vector<uint64_t>{101, 102, 103});

    setenv("DVM_SEED_OFFSET", "ten", 1);
    CHECK_THROWS_AS(build_config(kv), ConfigError);
    unsetenv("DVM_SEED_OFFSET");
}

// ---------------------------------------------------------------------------
// Snapshots
// ---------------------------------------------------------------------------

TEST_CASE("snapshot: bundles survive a write/read round trip bitwise") {
    Rng rng(10);
    std::vector<size_t> obs_dims(2, 10);
    std::vector<AgentBundle> team;
    for (int i = 0; i < 2; ++i)
        team.push_back(make_bundle(Algo::masac, obs_dims, i, {6, 5}, 0.01, 0.01, rng));
    auto dir = fresh_dir("snapshot");
    std::string path = (dir / "s.bin").string();
    write_snapshot(snapshot_bundles(team, Domain::spread2, Algo::masac, Phase::two, 25), path);

    LoadedRun run = load_bundles(path);
    CHECK(run.domain == Domain::spread2);
    CHECK(run.algo == Algo::masac);
    CHECK(run.phase == Phase::two);
    CHECK(run.episode_length == 25);
    REQUIRE(run.bundles.size() == 2);
    for (int i = 0; i < 2; ++i) {
        for (size_t k = 0; k < team[i].actor.layers.size(); ++k) {
            CHECK(run.bundles[i].actor.layers[k].w.data == team[i].actor.layers[k].w.data);
            CHECK(run.bundles[i].actor.layers[k].b == team[i].actor.layers[k].b);
        }
        CHECK(run.bundles[i].value.layers[0].w.data == team[i].value.layers[0].w.data);
    }

    // magic check
    std::ofstream bad((dir / "bad.bin").string(), std::ios::binary);
    bad << "NOPE";
    bad.close();
    CHECK_THROWS_AS(load_bundles((dir / "bad.bin").string()), IoError);
}

// ---------------------------------------------------------------------------
// run_experiment
// ---------------------------------------------------------------------------

TEST_CASE("run_experiment: record schedule and artifacts", "[slow]") {
    auto dir = fresh_dir("exp1");
    ExperimentConfig cfg = tiny_config((dir / "out").string());
    auto records = run_experiment(cfg);

    // per seed: phase 1 at episodes 0,2,4,6; phase 2 at 0,2,4
    REQUIRE(records.size() == 2 * 7);
    CHECK(records[0].seed == 1);
    CHECK(records[0].phase == 1);
    CHECK(records[0].episode == 0);
    CHECK(records[6].phase == 2);
    CHECK(records[6].episode == 4);
    CHECK(records[7].seed == 2);
    CHECK(fs::exists(dir / "out" / "metrics.csv"));
    CHECK(fs::exists(dir / "out" / "snapshot_seed1.bin"));
    CHECK(fs::exists(dir / "out" / "snapshot_seed2.bin"));

    LoadedRun run = load_bundles((dir / "out" / "snapshot_seed1.bin").string());
    CHECK(run.bundles.size() == 2);
    CHECK(run.phase == Phase::two);
}

TEST_CASE("run_experiment: zero phase lengths emit only the initial records") {
    auto dir = fresh_dir("exp2");
    ExperimentConfig cfg = tiny_config((dir / "out").string(), Condition::none);
    cfg.phase1_episodes = 0;
    cfg.phase2_episodes = 0;
    cfg.seeds = {7};
    auto records = run_experiment(cfg);
    REQUIRE(records.size() == 2);
    CHECK(records[0].phase == 1);
    CHECK(records[0].episode == 0);
    CHECK(records[1].phase == 2);
    CHECK(records[1].episode == 0);
}

TEST_CASE("run_experiment: invalid configs fail before any compute") {
    auto dir = fresh_dir("exp3");
    ExperimentConfig cfg = tiny_config((dir / "out").string());
    cfg.eval_interval = 0;
    CHECK_THROWS_AS(run_experiment(cfg), ConfigError);
    CHECK(!fs::exists(dir / "out"));
}

TEST_CASE("run_experiment: identical (config, seed) give byte-identical metrics", "[slow]") {
    auto dir = fresh_dir("exp4");
    ExperimentConfig cfg = tiny_config((dir / "a").string());
    run_experiment(cfg);
    cfg.out_dir = (dir / "b").string();
    run_experiment(cfg);
    CHECK(slurp((dir / "a" / "metrics.csv").string()) ==
          slurp((dir / "b" / "metrics.csv").string()));
    CHECK(slurp((dir / "a" / "snapshot_seed1.bin").string()) ==
          slurp((dir / "b" / "snapshot_seed1.bin").string()));
}

TEST_CASE("run_experiment: parallel seeds produce the same bytes as serial", "[slow]") {
    auto dir = fresh_dir("exp5");
    ExperimentConfig cfg = tiny_config((dir / "serial").string());
    run_experiment(cfg);
    cfg.out_dir = (dir / "parallel").string();
    cfg.parallel_seeds = 2;
    run_experiment(cfg);
    CHECK(slurp((dir / "serial" / "metrics.csv").string()) ==
          slurp((dir / "parallel" / "metrics.csv").string()));
}

TEST_CASE("run_experiment: conditions share identical phase 1 records", "[slow]") {
    auto dir = fresh_dir("exp6");
    std::vector<std::vector<EvalRecord>> phase1(2);
    Condition conds[2] = {Condition::none, Condition::dvm};
    for (int c = 0; c < 2; ++c) {
        ExperimentConfig cfg = tiny_config((dir / condition_name(conds[c])).string(), conds[c]);
        cfg.seeds = {11};
        auto records = run_experiment(cfg);
        for (const auto& r : records)
            if (r.phase == 1) phase1[c].push_back(r);
    }
    REQUIRE(phase1[0].size() == phase1[1].size());
    for (size_t i = 0; i < phase1[0].size(); ++i) {
        CHECK(phase1[0][i].mean_return == phase1[1][i].mean_return);
        CHECK(phase1[0][i].critic_loss == phase1[1][i].critic_loss);
    }
}

TEST_CASE("run_experiment: push box protocol trains two pairs then a merged team", "[slow]") {
    auto dir = fresh_dir("exp7");
    ExperimentConfig cfg = tiny_config((dir / "out").string());
    cfg.domain = Domain::pushbox;
    cfg.seeds = {3};
    auto records = run_experiment(cfg);
    REQUIRE(records.size() == 7);
    for (const auto& r : records) CHECK(std::isfinite(r.mean_return));
    LoadedRun run = load_bundles((dir / "out" / "snapshot_seed3.bin").string());
    CHECK(run.bundles.size() == 2);
    CHECK(run.phase == Phase::three);
    CHECK(run.domain == Domain::pushbox);
}

TEST_CASE("run_experiment: masac on continuous spread runs end to end", "[slow]") {
    auto dir = fresh_dir("exp8");
    ExperimentConfig cfg = tiny_config((dir / "out").string());
    cfg.algo.algo = Algo::masac;
    cfg.algo.actor_lr = 3e-4;
    cfg.algo.critic_lr = 3e-4;
    cfg.seeds = {4};
    auto records = run_experiment(cfg);
    REQUIRE(records.size() == 7);
    for (const auto& r : records) CHECK(std::isfinite(r.mean_return));
}

TEST_CASE("run_experiment: phase2_learning=false freezes the post-condition policy", "[slow]") {
    auto dir = fresh_dir("exp9");
    ExperimentConfig cfg = tiny_config((dir / "out").string());
    cfg.phase2_learning = false;
    cfg.seeds = {5};
    auto records = run_experiment(cfg);
    REQUIRE(records.size() == 7);
    // frozen policy: phase 2 losses never change after the condition
    CHECK(records[5].actor_loss == records[4].actor_loss);
    CHECK(records[6].actor_loss == records[4].actor_loss);
}
