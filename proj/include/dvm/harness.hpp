#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <string>
#include <vector>

#include "dvm/algos.hpp"
#include "dvm/common.hpp"
#include "dvm/config.hpp"
#include "dvm/distill.hpp"
#include "dvm/env.hpp"
#include "dvm/net.hpp"
#include "dvm/replay.hpp"
#include "dvm/rng.hpp"
#include "dvm/snapshot.hpp"

namespace dvm {

struct EvalRecord {
    uint64_t seed = 0;
    int phase = 1;
    int episode = 0;  // episodes completed within the phase
    double mean_return = 0.0;
    double actor_loss = 0.0;
    double critic_loss = 0.0;
    double wall_clock_s = 0.0;
};

// ---------------------------------------------------------------------------
// Metrics CSV
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// Shortest round-trip decimal representation per field; every byte of the file
// is a function of (config, seed).
inline void write_metrics(const std::vector<EvalRecord>& records, const std::string& path) {
    if (records.empty()) throw ParamError("no records to write");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open metrics file: " + path);
    out << "seed,phase,episode,mean_return,actor_loss,critic_loss,wall_clock_s\n";
    for (const EvalRecord& r : records) {
        out << r.seed << ',' << r.phase << ',' << r.episode << ',' << format_double(r.mean_return)
            << ',' << format_double(r.actor_loss) << ',' << format_double(r.critic_loss) << ','
            << format_double(r.wall_clock_s) << '\n';
    }
    if (!out) throw IoError("metrics write failed: " + path);
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

// Mean undiscounted return over exploration-free episodes.
inline double evaluate_policy(const std::vector<AgentBundle>& bundles, const PhaseSpec& spec,
                              int episodes, const AlgoConfig& cfg, Rng& rng) {
    double total = 0.0;
    for (int e = 0; e < episodes; ++e) {
        auto [state, obs] = reset(spec, rng);
        bool done = false;
        while (!done) {
            JointAction a = select_joint_action(bundles, obs, cfg, ActionMode::evaluate, 0.0, rng);
            StepResult r = step(state, a);
            total += r.reward;
            state = std::move(r.state);
            obs = std::move(r.obs);
            done = r.done;
        }
    }
    return total / static_cast<double>(episodes);
}

// ---------------------------------------------------------------------------
// Policy / action-value grids
// ---------------------------------------------------------------------------

struct GridRow {
    double x = 0.0;
    double y = 0.0;
    double action = 0.0;  // discrete: action index; continuous: heading of tanh(mean)
    double q_value = 0.0;
};

// Sweeps agent `agent` over an r x r lattice of cell centers while the other
// agents sit at their assigned quadrant anchors, and reports each cell's
// greedy action and the agent's centralized Q at the joint greedy action.
inline std::vector<GridRow> dump_policy_grid(const std::vector<AgentBundle>& bundles,
                                             const PhaseSpec& spec, int agent, int resolution,
                                             const AlgoConfig& cfg) {
    if (!is_spread(spec.domain)) throw UnsupportedError("policy grids require a spread domain");
    if (resolution <= 0) throw ParamError("grid resolution must be positive");
    const int n = agent_count(spec.domain);
    if (agent < 0 || agent >= n) throw ParamError("agent index out of range");

    std::vector<int> assign = spec.quadrant_assignment;
    if (assign.empty()) assign = active_quadrants(spec.domain);

    EnvState s;
    s.spec = spec;
    s.pos.assign(n, Vec2{});
    s.vel.assign(n, Vec2{});
    for (int q : active_quadrants(spec.domain))
        s.landmarks.push_back(quadrant_anchor(q, spec.params.world_half));
    for (int j = 0; j < n; ++j) s.pos[j] = quadrant_anchor(assign[j], spec.params.world_half);

    const double wh = spec.params.world_half;
    const double cell = 2.0 * wh / resolution;
    std::vector<GridRow> rows;
    rows.reserve(static_cast<size_t>(resolution) * resolution);
    for (int iy = 0; iy < resolution; ++iy) {
        for (int ix = 0; ix < resolution; ++ix) {
            GridRow row;
            row.x = -wh + (ix + 0.5) * cell;
            row.y = -wh + (iy + 0.5) * cell;
            s.pos[agent] = {row.x, row.y};
            auto obs = build_joint_observation(s);

            std::vector<std::vector<double>> acts(n);
            for (int j = 0; j < n; ++j) {
                std::vector<double> out = forward(bundles[j].actor, obs[j]);
                if (cfg.discrete()) {
                    std::vector<double> oh(kDiscreteActions, 0.0);
                    size_t a = argmax(out);
                    oh[a] = 1.0;
                    if (j == agent) row.action = static_cast<double>(a);
                    acts[j] = std::move(oh);
                } else {
                    double ax = std::tanh(out[0]);
                    double ay = std::tanh(out[1]);
                    if (j == agent) row.action = std::atan2(ay, ax);
                    acts[j] = {ax, ay};
                }
            }
            std::vector<double> zin;
            for (int j = 0; j < n; ++j) zin.insert(zin.end(), obs[j].begin(), obs[j].end());
            for (int j = 0; j < n; ++j) zin.insert(zin.end(), acts[j].begin(), acts[j].end());
            row.q_value = forward(bundles[agent].critic, zin)[0];
            rows.push_back(row);
        }
    }
    return rows;
}

inline void write_grid(const std::vector<GridRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open grid file: " + path);
    out << "x,y,action,q_value\n";
    for (const GridRow& r : rows)
        out << format_double(r.x) << ',' << format_double(r.y) << ',' << format_double(r.action)
            << ',' << format_double(r.q_value) << '\n';
    if (!out) throw IoError("grid write failed: " + path);
}

// ---------------------------------------------------------------------------
// One seed's training protocol
// ---------------------------------------------------------------------------

// Owns everything one seed touches. Copyable by design: the whole run is
// value state, which lets tests branch a run at the DVM point and continue
// each condition separately.
struct SeedRun {
    ExperimentConfig cfg;
    uint64_t seed = 0;

    Rng rng_env, rng_explore, rng_eval, rng_dvm;
    std::vector<AgentBundle> bundles;    // spread team / push-box pair A / task-III team
    std::vector<AgentBundle> bundles_b;  // push-box pair B
    ReplayBuffer buffer{1};
    ReplayBuffer buffer_b{1};
    std::vector<EvalRecord> records;

    double last_actor_loss = 0.0;
    double last_critic_loss = 0.0;
    long episodes_simulated = 0;
    long steps_in_phase = 0;
    long total_update_counter = 0;

    SeedRun(ExperimentConfig c, uint64_t s) : cfg(std::move(c)), seed(s) {}

    bool pushbox() const { return cfg.domain == Domain::pushbox; }

    PhaseSpec phase_spec(Phase p) const { return make_phase_spec(cfg.domain, p, cfg.env); }

    void init() {
        Rng rng_init = substream(seed, 1);
        rng_env = substream(seed, 2);
        rng_explore = substream(seed, 3);
        rng_eval = substream(seed, 4);
        rng_dvm = substream(seed, 5);

        PhaseSpec spec = phase_spec(Phase::one);
        const int n = agent_count(cfg.domain);
        std::vector<size_t> obs_dims(n, obs_dim(spec));
        bundles.clear();
        for (int i = 0; i < n; ++i)
            bundles.push_back(make_bundle(cfg.algo.algo, obs_dims, i, cfg.hidden, cfg.algo.actor_lr,
                                          cfg.algo.critic_lr, rng_init));
        buffer = ReplayBuffer(cfg.replay_capacity);
        if (pushbox()) {
            bundles_b.clear();
            for (int i = 0; i < n; ++i)
                bundles_b.push_back(make_bundle(cfg.algo.algo, obs_dims, i, cfg.hidden,
                                                cfg.algo.actor_lr, cfg.algo.critic_lr, rng_init));
            buffer_b = ReplayBuffer(cfg.replay_capacity);
        }
    }

    double sim_seconds() const {
        return static_cast<double>(episodes_simulated) * cfg.env.episode_length * cfg.env.dt;
    }

    void record_eval(int phase, int episode_in_phase) {
        EvalRecord r;
        r.seed = seed;
        r.phase = phase;
        r.episode = episode_in_phase;
        if (pushbox() && phase == 1) {
            double a = evaluate_policy(bundles, phase_spec(Phase::one), cfg.eval_episodes, cfg.algo,
                                       rng_eval);
            double b = evaluate_policy(bundles_b, phase_spec(Phase::two), cfg.eval_episodes,
                                       cfg.algo, rng_eval);
            r.mean_return = 0.5 * (a + b);
        } else {
            Phase p = (phase == 1) ? Phase::one : (pushbox() ? Phase::three : Phase::two);
            r.mean_return =
                evaluate_policy(bundles, phase_spec(p), cfg.eval_episodes, cfg.algo, rng_eval);
        }
        r.actor_loss = last_actor_loss;
        r.critic_loss = last_critic_loss;
        r.wall_clock_s = sim_seconds();
        records.push_back(r);
    }

    void update_round(std::vector<AgentBundle>& team, ReplayBuffer& buf) {
        auto batch = buf.sample_batch(static_cast<size_t>(cfg.algo.batch_size), rng_explore);
        double actor_loss = 0.0, critic_loss = 0.0;
        if (cfg.algo.discrete()) {
            auto cr = maddpg_critic_update(team, batch, cfg.algo);
            for (size_t i = 0; i < team.size(); ++i) {
                adam_step(team[i].critic, cr[i].grad, team[i].critic_opt);
                critic_loss += cr[i].loss;
            }
            auto ar = maddpg_actor_update(team, batch, cfg.algo, rng_explore);
            for (size_t i = 0; i < team.size(); ++i) {
                adam_step(team[i].actor, ar[i].grad, team[i].actor_opt);
                actor_loss += ar[i].loss;
            }
        } else {
            auto vr = masac_value_update(team, batch, cfg.algo, rng_explore);
            for (size_t i = 0; i < team.size(); ++i) {
                adam_step(team[i].value, vr[i].grad, team[i].value_opt);
                critic_loss += vr[i].loss;
            }
            auto qr = masac_q_update(team, batch, cfg.algo);
            for (size_t i = 0; i < team.size(); ++i) {
                adam_step(team[i].critic, qr[i].grad, team[i].critic_opt);
                critic_loss += qr[i].loss;
            }
            auto ar = masac_actor_update(team, batch, cfg.algo, rng_explore);
            for (size_t i = 0; i < team.size(); ++i) {
                adam_step(team[i].actor, ar[i].grad, team[i].actor_opt);
                actor_loss += ar[i].loss;
            }
        }
        target_update(team, cfg.algo);
        last_actor_loss = actor_loss / static_cast<double>(team.size());
        last_critic_loss = critic_loss / static_cast<double>(team.size());
    }

    void train_episode(std::vector<AgentBundle>& team, ReplayBuffer& buf, const PhaseSpec& spec,
                       long phase_total_steps, bool learning) {
        auto [state, obs] = reset(spec, rng_env);
        bool done = false;
        while (!done) {
            double eps = cfg.algo.eps.value(steps_in_phase, phase_total_steps);
            JointAction a =
                select_joint_action(team, obs, cfg.algo, ActionMode::explore, eps, rng_explore);
            StepResult r = step(state, a);
            buf.push(Transition{obs, a, r.reward, r.obs, r.done});
            state = std::move(r.state);
            obs = std::move(r.obs);
            done = r.done;
            ++steps_in_phase;
            if (learning && buf.size() >= static_cast<size_t>(cfg.algo.batch_size) &&
                (++total_update_counter % cfg.update_every) == 0)
                update_round(team, buf);
        }
        ++episodes_simulated;
    }

    void train_phase1() {
        record_eval(1, 0);
        steps_in_phase = 0;
        const long total = static_cast<long>(cfg.phase1_episodes) * cfg.env.episode_length;
        for (int ep = 1; ep <= cfg.phase1_episodes; ++ep) {
            if (pushbox()) {
                // Pair A learns Task I while pair B learns Task II.
                long a_steps = steps_in_phase;
                train_episode(bundles, buffer, phase_spec(Phase::one), total, true);
                steps_in_phase = a_steps;  // pairs share the schedule clock
                train_episode(bundles_b, buffer_b, phase_spec(Phase::two), total, true);
            } else {
                train_episode(bundles, buffer, phase_spec(Phase::one), total, true);
            }
            if (ep % cfg.eval_interval == 0) record_eval(1, ep);
        }
    }

    void apply_condition() {
        if (cfg.condition == Condition::none) {
            if (pushbox()) rebuild_task3_team();
            return;
        }
        DvmConfig dcfg = cfg.dvm;
        dcfg.mode = condition_mode(cfg.condition);
        std::vector<AgentBundle*> teachers;
        std::vector<const ReplayBuffer*> buffers;
        std::vector<int> obs_blocks;
        if (pushbox()) {
            // One agent from each task pair.
            teachers = {&bundles[0], &bundles_b[0]};
            buffers = {&buffer, &buffer_b};
            obs_blocks = {0, 0};
        } else {
            for (AgentBundle& b : bundles) teachers.push_back(&b);
            buffers = {&buffer};
        }
        DistilledBundle distilled = make_distilled(*teachers[0], cfg.algo.algo, dcfg, rng_dvm);
        run_dvm(teachers, distilled, buffers, dcfg, cfg.algo, rng_dvm, obs_blocks);
        if (pushbox()) rebuild_task3_team();
    }

    // Task III is played by agent 0 of pair A and agent 0 of pair B.
    void rebuild_task3_team() {
        std::vector<AgentBundle> team;
        team.push_back(bundles[0]);
        team.push_back(bundles_b[0]);
        bundles = std::move(team);
        bundles_b.clear();
        buffer = ReplayBuffer(cfg.replay_capacity);
        buffer_b = ReplayBuffer(1);
    }

    void train_phase2() {
        record_eval(2, 0);
        steps_in_phase = 0;
        const bool learning = cfg.phase2_learning;
        const long total = static_cast<long>(cfg.phase2_episodes) * cfg.env.episode_length;
        PhaseSpec spec = phase_spec(pushbox() ? Phase::three : Phase::two);
        // A zero-length schedule pins epsilon at its end value when the
        // schedule does not reset between phases.
        const long sched_total = cfg.eps_reset_phase2 ? total : 0;
        for (int ep = 1; ep <= cfg.phase2_episodes; ++ep) {
            train_episode(bundles, buffer, spec, sched_total, learning);
            if (ep % cfg.eval_interval == 0) record_eval(2, ep);
        }
    }

    void run() {
        init();
        train_phase1();
        apply_condition();
        train_phase2();
    }
};

// ---------------------------------------------------------------------------
// Experiment driver
// ---------------------------------------------------------------------------

inline std::string snapshot_path(const ExperimentConfig& cfg, uint64_t seed) {
    return cfg.out_dir + "/snapshot_seed" + std::to_string(seed) + ".bin";
}

inline std::vector<EvalRecord> run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    if (ec) throw IoError("cannot create output directory: " + cfg.out_dir);

    auto run_one = [&cfg](uint64_t seed) {
        SeedRun run(cfg, seed);
        run.run();
        Phase last = cfg.domain == Domain::pushbox ? Phase::three
                     : (cfg.phase2_episodes > 0 ? Phase::two : Phase::one);
        Snapshot snap = snapshot_bundles(run.bundles, cfg.domain, cfg.algo.algo, last,
                                         cfg.env.episode_length);
        write_snapshot(snap, snapshot_path(cfg, seed));
        return run.records;
    };

    std::vector<std::vector<EvalRecord>> per_seed(cfg.seeds.size());
    if (cfg.parallel_seeds > 1) {
        std::vector<std::future<std::vector<EvalRecord>>> futs;
        size_t next = 0;
        while (next < cfg.seeds.size() || !futs.empty()) {
            while (next < cfg.seeds.size() &&
                   futs.size() < static_cast<size_t>(cfg.parallel_seeds)) {
                futs.push_back(std::async(std::launch::async, run_one, cfg.seeds[next]));
                ++next;
            }
            size_t idx = next - futs.size();
            per_seed[idx] = futs.front().get();
            futs.erase(futs.begin());
        }
    } else {
        for (size_t s = 0; s < cfg.seeds.size(); ++s) per_seed[s] = run_one(cfg.seeds[s]);
    }

    std::vector<EvalRecord> all;
    for (auto& rs : per_seed) all.insert(all.end(), rs.begin(), rs.end());
    write_metrics(all, cfg.out_dir + "/metrics.csv");
    return all;
}

}  // namespace dvm
