#pragma once

#include <cmath>
#include <vector>

#include "dvm/algos.hpp"
#include "dvm/common.hpp"
#include "dvm/env.hpp"
#include "dvm/net.hpp"
#include "dvm/replay.hpp"
#include "dvm/rng.hpp"

namespace dvm {

enum class DvmMode { none, distill_only, value_match_only, dvm };

inline bool mode_distills(DvmMode m) { return m == DvmMode::distill_only || m == DvmMode::dvm; }
inline bool mode_matches(DvmMode m) { return m == DvmMode::value_match_only || m == DvmMode::dvm; }

struct DvmConfig {
    DvmMode mode = DvmMode::dvm;
    int iterations = 2048;
    int batch_size = 1024;
    double tau = 1.0;          // distillation softmax temperature
    double lr = 0.01;          // distilled-network Adam rate
    bool fresh_init = true;    // false warm-starts from agent 0
    bool interleave = true;    // per-iteration distill+match vs all-distill-then-all-match
    int permutation_cap = 24;  // refuse n! beyond this

    void validate() const {
        if (mode == DvmMode::none) return;
        if (iterations <= 0) throw ConfigError("dvm iterations must be positive");
        if (batch_size <= 0) throw ConfigError("dvm batch size must be positive");
        if (tau <= 0.0) throw ConfigError("dvm temperature must be positive");
        if (lr <= 0.0) throw ConfigError("dvm learning rate must be positive");
    }
};

// The distilled networks every agent hard-updates from after DVM.
struct DistilledBundle {
    ParamStore actor;
    ParamStore critic;
    ParamStore value;         // MA-SAC
    ParamStore target_value;  // MA-SAC
    AdamState actor_opt, critic_opt, value_opt;
};

// Fresh parameters with the same layer dimensions.
inline ParamStore reinit_like(const ParamStore& net, Rng& rng) {
    std::vector<size_t> hidden;
    for (size_t k = 0; k + 1 < net.layers.size(); ++k) hidden.push_back(net.layers[k].w.rows);
    return make_mlp(net.in_dim(), hidden, net.out_dim(), rng);
}

inline DistilledBundle make_distilled(const AgentBundle& like, Algo algo, const DvmConfig& cfg,
                                      Rng& rng) {
    DistilledBundle d;
    d.actor = cfg.fresh_init ? reinit_like(like.actor, rng) : like.actor;
    d.critic = cfg.fresh_init ? reinit_like(like.critic, rng) : like.critic;
    if (algo == Algo::masac) {
        d.value = cfg.fresh_init ? reinit_like(like.value, rng) : like.value;
        d.target_value = d.value;
        d.value_opt = make_adam(d.value, cfg.lr);
    }
    d.actor_opt = make_adam(d.actor, cfg.lr);
    d.critic_opt = make_adam(d.critic, cfg.lr);
    return d;
}

// Copies source parameters into target (must be shape-congruent).
inline void hard_update(ParamStore& target, const ParamStore& source) {
    if (!target.congruent_with(source)) throw ShapeError("hard_update: shape mismatch");
    target = source;
}

// ---------------------------------------------------------------------------
// Policy distillation (KL loss, teacher first)
// ---------------------------------------------------------------------------

struct DistillEval {
    double loss = 0.0;
    Grad grad;
};

// Mean KL loss between teacher and student policies on an observation batch,
// with its gradient in the student's parameters. Discrete policies are
// compared as temperature softmaxes of the logits; continuous policies via the
// closed-form per-dimension Gaussian KL in pre-squash space. Teacher first.
inline DistillEval distill_loss(const ParamStore& student_actor, const ParamStore& teacher_actor,
                                const std::vector<ObsVector>& obs_batch, double tau, Algo algo) {
    if (obs_batch.empty()) throw ParamError("empty distillation batch");
    if (tau <= 0.0) throw ParamError("distillation temperature must be positive");
    const size_t B = obs_batch.size();
    Matrix O(B, obs_batch[0].size());
    for (size_t b = 0; b < B; ++b) std::copy(obs_batch[b].begin(), obs_batch[b].end(), O.row(b));

    BatchCache cache;
    Matrix student = forward_batch(student_actor, O, &cache);
    Matrix teacher_out = forward_batch(teacher_actor, O);
    if (student.cols != teacher_out.cols) throw HomogeneityError("teacher/student head mismatch");

    double loss = 0.0;
    Matrix upstream(student.rows, student.cols);

    if (algo == Algo::maddpg_discrete) {
        const size_t K = student.cols;
        std::vector<double> logp(K), logq(K), p(K), q(K);
        for (size_t b = 0; b < B; ++b) {
            auto log_softmax = [&](const double* row, std::vector<double>& out) {
                double mx = row[0] / tau;
                for (size_t k = 1; k < K; ++k) mx = std::max(mx, row[k] / tau);
                double sum = 0.0;
                for (size_t k = 0; k < K; ++k) sum += std::exp(row[k] / tau - mx);
                double lse = mx + std::log(sum);
                for (size_t k = 0; k < K; ++k) out[k] = row[k] / tau - lse;
            };
            log_softmax(teacher_out.row(b), logp);
            log_softmax(student.row(b), logq);
            for (size_t k = 0; k < K; ++k) {
                p[k] = std::exp(logp[k]);
                q[k] = std::exp(logq[k]);
                loss += p[k] * (logp[k] - logq[k]);
                upstream(b, k) = (q[k] - p[k]) / (tau * static_cast<double>(B));
            }
        }
        loss /= static_cast<double>(B);
    } else {
        // KL(N(mu1,var1) || N(mu0,var0)) per action dimension, teacher first.
        const size_t D = student.cols / 2;
        const double scale = 1.0 / static_cast<double>(B * D);
        for (size_t b = 0; b < B; ++b) {
            for (size_t d = 0; d < D; ++d) {
                double mu1 = teacher_out(b, d);
                double ls1 = clamp_log_std(teacher_out(b, D + d));
                double mu0 = student(b, d);
                double raw0 = student(b, D + d);
                double ls0 = clamp_log_std(raw0);
                double var0 = std::exp(2.0 * ls0);
                double var1 = std::exp(2.0 * ls1);
                double dm = mu1 - mu0;
                loss += ls0 - ls1 + (var1 + dm * dm) / (2.0 * var0) - 0.5;
                upstream(b, d) = -dm / var0 * scale;
                double dls = 1.0 - (var1 + dm * dm) / var0;
                upstream(b, D + d) =
                    (raw0 > kLogStdMin && raw0 < kLogStdMax) ? dls * scale : 0.0;
            }
        }
        loss *= scale;
    }

    DistillEval eval;
    eval.loss = loss;
    eval.grad = zeros_like(student_actor);
    backward_batch(student_actor, cache, upstream, eval.grad);
    return eval;
}

// One distillation step from one teacher: one Adam step on the distilled
// actor; returns the pre-step KL loss.
inline double distill_step(DistilledBundle& distilled, const AgentBundle& teacher,
                           const std::vector<ObsVector>& obs_batch, const DvmConfig& cfg,
                           Algo algo) {
    DistillEval eval = distill_loss(distilled.actor, teacher.actor, obs_batch, cfg.tau, algo);
    adam_step(distilled.actor, eval.grad, distilled.actor_opt);
    return eval.loss;
}

// ---------------------------------------------------------------------------
// Value matching (MSE over the symmetric group)
// ---------------------------------------------------------------------------

struct VmLosses {
    double critic_mse = 0.0;
    double value_mse = 0.0;
};

// Extracts the per-agent action blocks of a transition as flat vectors.
inline std::vector<std::vector<double>> action_blocks(const Transition& t, bool discrete) {
    std::vector<std::vector<double>> blocks;
    const size_t n = t.obs.size();
    for (size_t j = 0; j < n; ++j) {
        if (discrete) {
            std::vector<double> oh(kDiscreteActions, 0.0);
            oh[static_cast<size_t>(t.action.discrete[j])] = 1.0;
            blocks.push_back(std::move(oh));
        } else {
            blocks.push_back({t.action.continuous[j].x, t.action.continuous[j].y});
        }
    }
    return blocks;
}

struct VmEval {
    double critic_mse = 0.0;
    double value_mse = 0.0;
    Grad critic_grad;
    Grad value_grad;
};

// Value-matching loss from one teacher. For every sample the loss sums the
// squared error between the teacher's output on the original (o, a) and the
// distilled critic's output on every consistent permutation of it (and the
// same for the distilled value function against V_i(o), MA-SAC only).
// perm_counter, when given, is incremented once per (sample, permutation).
inline VmEval value_match_loss(const DistilledBundle& distilled, const AgentBundle& teacher,
                               const std::vector<Transition>& batch, const DvmConfig& cfg,
                               Algo algo, size_t* perm_counter = nullptr) {
    if (batch.empty()) throw ParamError("empty value-matching batch");
    const size_t n = batch[0].obs.size();
    const std::vector<std::vector<int>> perms = enumerate_permutations(static_cast<int>(n));
    if (perms.size() > static_cast<size_t>(cfg.permutation_cap))
        throw ConfigError("agent count exceeds permutation cap");

    const bool discrete = (algo == Algo::maddpg_discrete);
    const size_t B = batch.size();
    const size_t P = perms.size();
    const size_t qwidth = distilled.critic.in_dim();
    const size_t vwidth = (algo == Algo::masac) ? distilled.value.in_dim() : 0;

    // Teacher targets on the unpermuted inputs.
    Matrix qx(B, qwidth);
    Matrix vx(algo == Algo::masac ? B : 0, vwidth);
    Matrix qperm(B * P, qwidth);
    Matrix vperm(algo == Algo::masac ? B * P : 0, vwidth);
    for (size_t b = 0; b < B; ++b) {
        const Transition& t = batch[b];
        const auto acts = action_blocks(t, discrete);
        size_t off = 0;
        for (size_t j = 0; j < n; ++j) {
            std::copy(t.obs[j].begin(), t.obs[j].end(), qx.row(b) + off);
            off += t.obs[j].size();
        }
        if (algo == Algo::masac) std::copy(qx.row(b), qx.row(b) + off, vx.row(b));
        for (size_t j = 0; j < n; ++j) {
            std::copy(acts[j].begin(), acts[j].end(), qx.row(b) + off);
            off += acts[j].size();
        }
        if (off != qwidth) throw ShapeError("value matching input width mismatch");

        for (size_t x = 0; x < P; ++x) {
            auto [po, pa] = permute_joint(t.obs, acts, perms[x]);
            if (perm_counter) ++*perm_counter;
            size_t row = b * P + x;
            size_t o = 0;
            for (size_t j = 0; j < n; ++j) {
                std::copy(po[j].begin(), po[j].end(), qperm.row(row) + o);
                o += po[j].size();
            }
            if (algo == Algo::masac) std::copy(qperm.row(row), qperm.row(row) + o, vperm.row(row));
            for (size_t j = 0; j < n; ++j) {
                std::copy(pa[j].begin(), pa[j].end(), qperm.row(row) + o);
                o += pa[j].size();
            }
        }
    }

    VmEval eval;
    const double scale = 1.0 / static_cast<double>(B);

    {
        Matrix y = forward_batch(teacher.critic, qx);
        BatchCache cache;
        Matrix q0 = forward_batch(distilled.critic, qperm, &cache);
        Matrix upstream(B * P, 1);
        for (size_t b = 0; b < B; ++b)
            for (size_t x = 0; x < P; ++x) {
                double diff = q0(b * P + x, 0) - y(b, 0);
                eval.critic_mse += diff * diff;
                upstream(b * P + x, 0) = 2.0 * diff * scale;
            }
        eval.critic_mse *= scale;
        eval.critic_grad = zeros_like(distilled.critic);
        backward_batch(distilled.critic, cache, upstream, eval.critic_grad);
    }

    if (algo == Algo::masac) {
        Matrix y = forward_batch(teacher.value, vx);
        BatchCache cache;
        Matrix v0 = forward_batch(distilled.value, vperm, &cache);
        Matrix upstream(B * P, 1);
        for (size_t b = 0; b < B; ++b)
            for (size_t x = 0; x < P; ++x) {
                double diff = v0(b * P + x, 0) - y(b, 0);
                eval.value_mse += diff * diff;
                upstream(b * P + x, 0) = 2.0 * diff * scale;
            }
        eval.value_mse *= scale;
        eval.value_grad = zeros_like(distilled.value);
        backward_batch(distilled.value, cache, upstream, eval.value_grad);
    }
    return eval;
}

// One value-matching step: one Adam step on the distilled critic (and value
// function for MA-SAC); returns the pre-step losses.
inline VmLosses value_match_step(DistilledBundle& distilled, const AgentBundle& teacher,
                                 const std::vector<Transition>& batch, const DvmConfig& cfg,
                                 Algo algo, size_t* perm_counter = nullptr) {
    VmEval eval = value_match_loss(distilled, teacher, batch, cfg, algo, perm_counter);
    adam_step(distilled.critic, eval.critic_grad, distilled.critic_opt);
    if (algo == Algo::masac) adam_step(distilled.value, eval.value_grad, distilled.value_opt);
    return VmLosses{eval.critic_mse, eval.value_mse};
}

// ---------------------------------------------------------------------------
// Full DVM pass
// ---------------------------------------------------------------------------

struct DvmStats {
    double final_kl = 0.0;
    double final_q_mse = 0.0;
    double final_v_mse = 0.0;
    size_t permutations_touched = 0;
};

// Runs j iterations of per-teacher distillation and value matching, then hard
// updates every teacher from the distilled networks. Distillation samples
// observations only; value matching samples (o, a) jointly. obs_blocks[i]
// names which observation block of teacher i's buffer belongs to that teacher
// (the push-box protocol distills agent 0 of two different teams).
inline DvmStats run_dvm(std::vector<AgentBundle*>& teachers, DistilledBundle& distilled,
                        const std::vector<const ReplayBuffer*>& buffers, const DvmConfig& cfg,
                        const AlgoConfig& algo_cfg, Rng& rng,
                        const std::vector<int>& obs_blocks = {}) {
    DvmStats stats;
    if (cfg.mode == DvmMode::none) return stats;
    cfg.validate();
    if (teachers.empty()) throw ParamError("no teachers");
    if (buffers.size() != 1 && buffers.size() != teachers.size())
        throw ParamError("buffer list must be shared or per-teacher");

    for (const AgentBundle* t : teachers) {
        if (!t->actor.congruent_with(teachers[0]->actor) ||
            !t->critic.congruent_with(teachers[0]->critic))
            throw HomogeneityError("teacher networks differ in shape");
        if (algo_cfg.algo == Algo::masac && !t->value.congruent_with(teachers[0]->value))
            throw HomogeneityError("teacher value networks differ in shape");
    }

    auto buffer_for = [&](size_t i) { return buffers.size() == 1 ? buffers[0] : buffers[i]; };
    auto block_for = [&](size_t i) {
        return obs_blocks.empty() ? static_cast<int>(i) : obs_blocks[i];
    };

    auto distill_round = [&](size_t i) {
        auto joint = buffer_for(i)->sample_observations(cfg.batch_size, rng);
        std::vector<ObsVector> own;
        own.reserve(joint.size());
        for (auto& jo : joint) own.push_back(std::move(jo[block_for(i)]));
        stats.final_kl = distill_step(distilled, *teachers[i], own, cfg, algo_cfg.algo);
    };
    auto match_round = [&](size_t i) {
        auto batch = buffer_for(i)->sample_batch(cfg.batch_size, rng);
        VmLosses l = value_match_step(distilled, *teachers[i], batch, cfg, algo_cfg.algo,
                                      &stats.permutations_touched);
        stats.final_q_mse = l.critic_mse;
        stats.final_v_mse = l.value_mse;
    };

    if (cfg.interleave) {
        for (int it = 0; it < cfg.iterations; ++it)
            for (size_t i = 0; i < teachers.size(); ++i) {
                if (mode_distills(cfg.mode)) distill_round(i);
                if (mode_matches(cfg.mode)) match_round(i);
            }
    } else {
        if (mode_distills(cfg.mode))
            for (int it = 0; it < cfg.iterations; ++it)
                for (size_t i = 0; i < teachers.size(); ++i) distill_round(i);
        if (mode_matches(cfg.mode))
            for (int it = 0; it < cfg.iterations; ++it)
                for (size_t i = 0; i < teachers.size(); ++i) match_round(i);
    }

    distilled.target_value = distilled.value;

    // Hard updates, component-wise: actors move only when distillation ran,
    // critics/value functions only when value matching ran. Target networks
    // are re-copied from their new sources and optimizer moments reset.
    for (AgentBundle* t : teachers) {
        if (mode_distills(cfg.mode)) {
            hard_update(t->actor, distilled.actor);
            if (algo_cfg.discrete()) hard_update(t->target_actor, distilled.actor);
            t->actor_opt = make_adam(t->actor, t->actor_opt.lr);
        }
        if (mode_matches(cfg.mode)) {
            hard_update(t->critic, distilled.critic);
            if (algo_cfg.discrete()) hard_update(t->target_critic, distilled.critic);
            t->critic_opt = make_adam(t->critic, t->critic_opt.lr);
            if (algo_cfg.algo == Algo::masac) {
                hard_update(t->value, distilled.value);
                hard_update(t->target_value, distilled.value);
                t->value_opt = make_adam(t->value, t->value_opt.lr);
            }
        }
    }
    return stats;
}

}  // namespace dvm
