#pragma once

#include <cmath>
#include <vector>

#include "dvm/common.hpp"
#include "dvm/env.hpp"
#include "dvm/net.hpp"
#include "dvm/replay.hpp"
#include "dvm/rng.hpp"

namespace dvm {

enum class Algo { maddpg_discrete, masac };

inline constexpr int kContinuousActionDim = 2;

// Linear decay from start to end over the first decay_fraction of a phase,
// flat afterwards.
struct EpsSchedule {
    double start = 1.0;
    double end = 0.05;
    double decay_fraction = 0.2;

    double value(long steps_done, long phase_total_steps) const {
        double window = decay_fraction * static_cast<double>(phase_total_steps);
        if (window <= 0.0) return end;
        double t = std::min(1.0, static_cast<double>(steps_done) / window);
        return start + (end - start) * t;
    }
};

struct AlgoConfig {
    Algo algo = Algo::maddpg_discrete;
    double gamma = 0.95;
    double actor_lr = 0.01;
    double critic_lr = 0.01;
    int batch_size = 1024;
    double alpha = 0.1;              // MA-SAC entropy coefficient
    double rho = 0.01;               // polyak rate for target networks
    double gumbel_temperature = 1.0; // MADDPG action relaxation
    EpsSchedule eps;                 // MADDPG exploration

    bool discrete() const { return algo == Algo::maddpg_discrete; }
    size_t act_block() const { return discrete() ? kDiscreteActions : kContinuousActionDim; }

    void validate() const {
        if (gamma < 0.0 || gamma >= 1.0) throw ConfigError("gamma must be in [0, 1)");
        if (alpha <= 0.0) throw ConfigError("alpha must be positive");
        if (rho <= 0.0 || rho > 1.0) throw ConfigError("rho must be in (0, 1]");
        if (actor_lr <= 0.0 || critic_lr <= 0.0) throw ConfigError("learning rates must be positive");
        if (batch_size <= 0) throw ConfigError("batch size must be positive");
        if (gumbel_temperature <= 0.0) throw ConfigError("gumbel temperature must be positive");
    }
};

// One agent's networks and optimizer states. Centralized critics take all
// agents' observations followed by all agents' action blocks, in fixed agent
// order; the value function (MA-SAC) takes all observations.
struct AgentBundle {
    ParamStore actor;
    ParamStore critic;
    ParamStore target_actor;   // MADDPG
    ParamStore target_critic;  // MADDPG
    ParamStore value;          // MA-SAC
    ParamStore target_value;   // MA-SAC
    AdamState actor_opt, critic_opt, value_opt;
};

inline AgentBundle make_bundle(Algo algo, const std::vector<size_t>& obs_dims, int agent,
                               const std::vector<size_t>& hidden, double actor_lr,
                               double critic_lr, Rng& rng) {
    const size_t n = obs_dims.size();
    size_t obs_total = 0;
    for (size_t d : obs_dims) obs_total += d;
    const bool discrete = (algo == Algo::maddpg_discrete);
    const size_t act_block = discrete ? kDiscreteActions : kContinuousActionDim;
    const size_t actor_out = discrete ? kDiscreteActions : 2 * kContinuousActionDim;

    AgentBundle b;
    b.actor = make_mlp(obs_dims[agent], hidden, actor_out, rng);
    b.critic = make_mlp(obs_total + n * act_block, hidden, 1, rng);
    if (discrete) {
        b.target_actor = b.actor;
        b.target_critic = b.critic;
    } else {
        b.value = make_mlp(obs_total, hidden, 1, rng);
        b.target_value = b.value;
        b.value_opt = make_adam(b.value, critic_lr);
    }
    b.actor_opt = make_adam(b.actor, actor_lr);
    b.critic_opt = make_adam(b.critic, critic_lr);
    return b;
}

// ---------------------------------------------------------------------------
// Batch assembly
// ---------------------------------------------------------------------------

// Transitions transposed into per-agent matrices (discrete actions one-hot).
struct JointBatch {
    std::vector<Matrix> obs;       // per agent: B x obs_dim
    std::vector<Matrix> act;       // per agent: B x act_block
    std::vector<Matrix> next_obs;  // per agent: B x obs_dim
    std::vector<double> rewards;   // B
    std::vector<double> not_done;  // B, 1.0 while bootstrapping applies
    size_t batch = 0;
};

inline JointBatch make_joint_batch(const std::vector<Transition>& batch, bool discrete) {
    if (batch.empty()) throw ParamError("empty batch");
    const size_t n = batch[0].obs.size();
    const size_t act_block = discrete ? kDiscreteActions : kContinuousActionDim;

    JointBatch jb;
    jb.batch = batch.size();
    jb.rewards.resize(jb.batch);
    jb.not_done.resize(jb.batch);
    for (size_t j = 0; j < n; ++j) {
        jb.obs.emplace_back(jb.batch, batch[0].obs[j].size());
        jb.next_obs.emplace_back(jb.batch, batch[0].next_obs[j].size());
        jb.act.emplace_back(jb.batch, act_block);
    }
    for (size_t b = 0; b < jb.batch; ++b) {
        const Transition& t = batch[b];
        if (t.obs.size() != n) throw ShapeError("transition agent count mismatch");
        jb.rewards[b] = t.reward;
        jb.not_done[b] = t.done ? 0.0 : 1.0;
        for (size_t j = 0; j < n; ++j) {
            std::copy(t.obs[j].begin(), t.obs[j].end(), jb.obs[j].row(b));
            std::copy(t.next_obs[j].begin(), t.next_obs[j].end(), jb.next_obs[j].row(b));
            if (discrete) {
                int a = t.action.discrete[j];
                if (a < 0 || a >= kDiscreteActions) throw ShapeError("discrete action out of range");
                jb.act[j](b, static_cast<size_t>(a)) = 1.0;
            } else {
                Vec2 f = t.action.continuous[j];
                jb.act[j](b, 0) = f.x;
                jb.act[j](b, 1) = f.y;
            }
        }
    }
    return jb;
}

inline Matrix concat_blocks(const std::vector<const Matrix*>& parts) {
    size_t rows = parts[0]->rows;
    size_t cols = 0;
    for (const Matrix* p : parts) {
        if (p->rows != rows) throw ShapeError("concat: row count mismatch");
        cols += p->cols;
    }
    Matrix out(rows, cols);
    size_t off = 0;
    for (const Matrix* p : parts) {
        for (size_t r = 0; r < rows; ++r)
            std::copy(p->row(r), p->row(r) + p->cols, out.row(r) + off);
        off += p->cols;
    }
    return out;
}

// [o^1..o^n, a^1..a^n] in fixed agent order.
inline Matrix critic_input(const std::vector<Matrix>& obs, const std::vector<Matrix>& act) {
    std::vector<const Matrix*> parts;
    for (const Matrix& m : obs) parts.push_back(&m);
    for (const Matrix& m : act) parts.push_back(&m);
    return concat_blocks(parts);
}

inline Matrix obs_input(const std::vector<Matrix>& obs) {
    std::vector<const Matrix*> parts;
    for (const Matrix& m : obs) parts.push_back(&m);
    return concat_blocks(parts);
}

struct UpdateResult {
    Grad grad;
    double loss = 0.0;
};

// ---------------------------------------------------------------------------
// Discrete MADDPG
// ---------------------------------------------------------------------------

// Critic regression target: y = r + gamma * (1-done) * Qbar_i(o', abar') with
// abar' the one-hot argmax of the target actors' logits.
inline UpdateResult maddpg_critic_update_agent(const std::vector<AgentBundle>& bundles,
                                               const JointBatch& jb, const AlgoConfig& cfg, size_t i) {
    const size_t n = bundles.size();
    const size_t B = jb.batch;

    std::vector<Matrix> next_act;
    next_act.reserve(n);
    for (size_t j = 0; j < n; ++j) {
        Matrix logits = forward_batch(bundles[j].target_actor, jb.next_obs[j]);
        Matrix onehot(B, kDiscreteActions);
        for (size_t b = 0; b < B; ++b) onehot(b, argmax(logits.row(b), kDiscreteActions)) = 1.0;
        next_act.push_back(std::move(onehot));
    }
    Matrix qbar = forward_batch(bundles[i].target_critic, critic_input(jb.next_obs, next_act));

    BatchCache cache;
    Matrix q = forward_batch(bundles[i].critic, critic_input(jb.obs, jb.act), &cache);

    UpdateResult out;
    out.grad = zeros_like(bundles[i].critic);
    Matrix upstream(B, 1);
    for (size_t b = 0; b < B; ++b) {
        double y = jb.rewards[b] + cfg.gamma * jb.not_done[b] * qbar(b, 0);
        double diff = q(b, 0) - y;
        out.loss += diff * diff;
        upstream(b, 0) = 2.0 * diff / static_cast<double>(B);
    }
    out.loss /= static_cast<double>(B);
    backward_batch(bundles[i].critic, cache, upstream, out.grad);
    return out;
}

// softmax((logits + gumbel) / lambda): differentiable stand-in for a one-hot
// categorical sample; approaches one-hot as lambda -> 0.
inline void gumbel_softmax_row(const double* logits, const double* gumbel, double lambda, size_t k,
                               double* out) {
    double mx = (logits[0] + gumbel[0]) / lambda;
    for (size_t j = 1; j < k; ++j) mx = std::max(mx, (logits[j] + gumbel[j]) / lambda);
    double sum = 0.0;
    for (size_t j = 0; j < k; ++j) {
        out[j] = std::exp((logits[j] + gumbel[j]) / lambda - mx);
        sum += out[j];
    }
    for (size_t j = 0; j < k; ++j) out[j] /= sum;
}

inline std::vector<double> gumbel_softmax(const std::vector<double>& logits,
                                          const std::vector<double>& gumbel, double lambda) {
    if (logits.size() != gumbel.size()) throw ShapeError("gumbel noise length mismatch");
    if (lambda <= 0.0) throw ParamError("gumbel temperature must be positive");
    std::vector<double> out(logits.size());
    gumbel_softmax_row(logits.data(), gumbel.data(), lambda, logits.size(), out.data());
    return out;
}

// Actor loss: -mean Q_i(o, a^1..g^i..a^n) with g^i the Gumbel-softmax
// relaxation of agent i's logits; other agents' actions come from the batch
// and the gradient flows only through g^i.
inline UpdateResult maddpg_actor_update_agent(const std::vector<AgentBundle>& bundles,
                                              const JointBatch& jb, const AlgoConfig& cfg, size_t i,
                                              const Matrix& gumbel_noise) {
    const size_t B = jb.batch;
    const double lambda = cfg.gumbel_temperature;
    if (gumbel_noise.rows != B || gumbel_noise.cols != kDiscreteActions)
        throw ShapeError("gumbel noise shape mismatch");

    BatchCache actor_cache;
    Matrix logits = forward_batch(bundles[i].actor, jb.obs[i], &actor_cache);

    Matrix soft(B, kDiscreteActions);
    for (size_t b = 0; b < B; ++b)
        gumbel_softmax_row(logits.row(b), gumbel_noise.row(b), lambda, kDiscreteActions,
                           soft.row(b));

    std::vector<Matrix> acts = jb.act;
    acts[i] = soft;
    BatchCache critic_cache;
    Matrix q = forward_batch(bundles[i].critic, critic_input(jb.obs, acts), &critic_cache);

    UpdateResult out;
    for (size_t b = 0; b < B; ++b) out.loss -= q(b, 0);
    out.loss /= static_cast<double>(B);

    Matrix critic_upstream(B, 1);
    for (size_t b = 0; b < B; ++b) critic_upstream(b, 0) = -1.0 / static_cast<double>(B);
    Grad unused;
    Matrix input_grad;
    backward_batch(bundles[i].critic, critic_cache, critic_upstream, unused, &input_grad,
                   /*want_param_grads=*/false);

    size_t slot = 0;
    for (size_t j = 0; j < bundles.size(); ++j) slot += jb.obs[j].cols;
    slot += i * static_cast<size_t>(kDiscreteActions);

    Matrix actor_upstream(B, kDiscreteActions);
    for (size_t b = 0; b < B; ++b) {
        double inner = 0.0;
        for (size_t k = 0; k < kDiscreteActions; ++k)
            inner += input_grad(b, slot + k) * soft(b, k);
        for (size_t k = 0; k < kDiscreteActions; ++k)
            actor_upstream(b, k) = soft(b, k) * (input_grad(b, slot + k) - inner) / lambda;
    }
    out.grad = zeros_like(bundles[i].actor);
    backward_batch(bundles[i].actor, actor_cache, actor_upstream, out.grad);
    return out;
}

inline std::vector<UpdateResult> maddpg_critic_update(const std::vector<AgentBundle>& bundles,
                                                      const std::vector<Transition>& batch,
                                                      const AlgoConfig& cfg) {
    JointBatch jb = make_joint_batch(batch, true);
    std::vector<UpdateResult> out;
    for (size_t i = 0; i < bundles.size(); ++i)
        out.push_back(maddpg_critic_update_agent(bundles, jb, cfg, i));
    return out;
}

inline std::vector<UpdateResult> maddpg_actor_update(const std::vector<AgentBundle>& bundles,
                                                     const std::vector<Transition>& batch,
                                                     const AlgoConfig& cfg, Rng& rng) {
    JointBatch jb = make_joint_batch(batch, true);
    std::vector<UpdateResult> out;
    for (size_t i = 0; i < bundles.size(); ++i) {
        Matrix g(jb.batch, kDiscreteActions);
        for (double& v : g.data) v = rng.gumbel();
        out.push_back(maddpg_actor_update_agent(bundles, jb, cfg, i, g));
    }
    return out;
}

// ---------------------------------------------------------------------------
// MA-SAC
// ---------------------------------------------------------------------------

// Squashed-Gaussian sample of one agent's policy over a batch, with the
// intermediates the gradient formulas need.
struct SquashedBatch {
    Matrix action;   // B x D, tanh(u)
    Matrix u;        // pre-squash
    Matrix stddev;   // after clamping log-std
    Matrix raw_ls;   // unclamped log-std outputs
    std::vector<double> log_prob;  // per row
};

inline SquashedBatch sample_squashed_batch(const ParamStore& actor, const Matrix& obs,
                                           const Matrix& noise, BatchCache* cache = nullptr) {
    constexpr double kHalfLog2Pi = 0.91893853320467274178;
    const size_t D = kContinuousActionDim;
    Matrix out = forward_batch(actor, obs, cache);
    if (out.cols != 2 * D) throw ShapeError("actor head must output mean and log-std");
    if (noise.rows != out.rows || noise.cols != D) throw ShapeError("noise shape mismatch");

    SquashedBatch s;
    s.action = Matrix(out.rows, D);
    s.u = Matrix(out.rows, D);
    s.stddev = Matrix(out.rows, D);
    s.raw_ls = Matrix(out.rows, D);
    s.log_prob.assign(out.rows, 0.0);
    for (size_t b = 0; b < out.rows; ++b) {
        for (size_t d = 0; d < D; ++d) {
            double mean = out(b, d);
            double raw = out(b, D + d);
            double ls = clamp_log_std(raw);
            double std_ = std::exp(ls);
            double u = mean + std_ * noise(b, d);
            s.raw_ls(b, d) = raw;
            s.stddev(b, d) = std_;
            s.u(b, d) = u;
            s.action(b, d) = std::tanh(u);
            s.log_prob[b] += -0.5 * noise(b, d) * noise(b, d) - kHalfLog2Pi - ls - log1m_tanh2(u);
        }
    }
    return s;
}

// J_V = 1/2 E[(V_i(o) - (Q_i(o, a~) - log pi_i(a~^i | o^i)))^2] with a~ fresh
// samples from the current policies (single-sample target, treated constant).
inline UpdateResult masac_value_update_agent(const std::vector<AgentBundle>& bundles,
                                             const JointBatch& jb, const AlgoConfig& cfg, size_t i,
                                             const Matrix& noise_all) {
    const size_t n = bundles.size();
    const size_t B = jb.batch;
    const size_t D = kContinuousActionDim;
    if (noise_all.rows != B || noise_all.cols != n * D) throw ShapeError("noise shape mismatch");
    (void)cfg;

    std::vector<Matrix> acts;
    acts.reserve(n);
    std::vector<double> log_pi;
    for (size_t j = 0; j < n; ++j) {
        Matrix noise(B, D);
        for (size_t b = 0; b < B; ++b)
            for (size_t d = 0; d < D; ++d) noise(b, d) = noise_all(b, j * D + d);
        SquashedBatch s = sample_squashed_batch(bundles[j].actor, jb.obs[j], noise);
        if (j == i) log_pi = s.log_prob;
        acts.push_back(std::move(s.action));
    }
    Matrix q = forward_batch(bundles[i].critic, critic_input(jb.obs, acts));

    BatchCache cache;
    Matrix v = forward_batch(bundles[i].value, obs_input(jb.obs), &cache);

    UpdateResult out;
    out.grad = zeros_like(bundles[i].value);
    Matrix upstream(B, 1);
    for (size_t b = 0; b < B; ++b) {
        double target = q(b, 0) - log_pi[b];
        double diff = v(b, 0) - target;
        out.loss += 0.5 * diff * diff;
        upstream(b, 0) = diff / static_cast<double>(B);
    }
    out.loss /= static_cast<double>(B);
    backward_batch(bundles[i].value, cache, upstream, out.grad);
    return out;
}

// J_Q = 1/2 E[(Q_i(o,a) - (r + gamma * (1-done) * Vbar_i(o')))^2].
inline UpdateResult masac_q_update_agent(const std::vector<AgentBundle>& bundles,
                                         const JointBatch& jb, const AlgoConfig& cfg, size_t i) {
    const size_t B = jb.batch;
    Matrix vbar = forward_batch(bundles[i].target_value, obs_input(jb.next_obs));

    BatchCache cache;
    Matrix q = forward_batch(bundles[i].critic, critic_input(jb.obs, jb.act), &cache);

    UpdateResult out;
    out.grad = zeros_like(bundles[i].critic);
    Matrix upstream(B, 1);
    for (size_t b = 0; b < B; ++b) {
        double qhat = jb.rewards[b] + cfg.gamma * jb.not_done[b] * vbar(b, 0);
        double diff = q(b, 0) - qhat;
        out.loss += 0.5 * diff * diff;
        upstream(b, 0) = diff / static_cast<double>(B);
    }
    out.loss /= static_cast<double>(B);
    backward_batch(bundles[i].critic, cache, upstream, out.grad);
    return out;
}

// Actor loss: mean[alpha * log pi_i(a~^i|o^i) - Q_i(o, a^1..a~^i..a^n)] with
// a~^i reparameterized; other agents' slots are fresh samples with no
// gradient. Gradient reaches the actor through both log pi and the critic
// input slot.
inline UpdateResult masac_actor_update_agent(const std::vector<AgentBundle>& bundles,
                                             const JointBatch& jb, const AlgoConfig& cfg, size_t i,
                                             const Matrix& noise_all) {
    const size_t n = bundles.size();
    const size_t B = jb.batch;
    const size_t D = kContinuousActionDim;
    if (noise_all.rows != B || noise_all.cols != n * D) throw ShapeError("noise shape mismatch");

    std::vector<Matrix> acts(n);
    BatchCache actor_cache;
    SquashedBatch own;
    for (size_t j = 0; j < n; ++j) {
        Matrix noise(B, D);
        for (size_t b = 0; b < B; ++b)
            for (size_t d = 0; d < D; ++d) noise(b, d) = noise_all(b, j * D + d);
        if (j == i) {
            own = sample_squashed_batch(bundles[j].actor, jb.obs[j], noise, &actor_cache);
            acts[j] = own.action;
        } else {
            acts[j] = sample_squashed_batch(bundles[j].actor, jb.obs[j], noise).action;
        }
    }

    BatchCache critic_cache;
    Matrix q = forward_batch(bundles[i].critic, critic_input(jb.obs, acts), &critic_cache);

    UpdateResult out;
    for (size_t b = 0; b < B; ++b) out.loss += cfg.alpha * own.log_prob[b] - q(b, 0);
    out.loss /= static_cast<double>(B);

    Matrix critic_upstream(B, 1);
    for (size_t b = 0; b < B; ++b) critic_upstream(b, 0) = -1.0 / static_cast<double>(B);
    Grad unused;
    Matrix input_grad;
    backward_batch(bundles[i].critic, critic_cache, critic_upstream, unused, &input_grad,
                   /*want_param_grads=*/false);

    size_t slot = 0;
    for (size_t j = 0; j < n; ++j) slot += jb.obs[j].cols;
    slot += i * D;

    const double scale = 1.0 / static_cast<double>(B);
    Matrix actor_upstream(B, 2 * D);
    for (size_t b = 0; b < B; ++b) {
        for (size_t d = 0; d < D; ++d) {
            double th = own.action(b, d);
            double dq_da = input_grad(b, slot + d);
            double sig_noise = own.stddev(b, d) * noise_all(b, i * D + d);
            double dmu = cfg.alpha * scale * 2.0 * th + dq_da * (1.0 - th * th);
            double dls = cfg.alpha * scale * (2.0 * th * sig_noise - 1.0) +
                         dq_da * (1.0 - th * th) * sig_noise;
            double raw = own.raw_ls(b, d);
            actor_upstream(b, d) = dmu;
            actor_upstream(b, D + d) = (raw > kLogStdMin && raw < kLogStdMax) ? dls : 0.0;
        }
    }
    out.grad = zeros_like(bundles[i].actor);
    backward_batch(bundles[i].actor, actor_cache, actor_upstream, out.grad);
    return out;
}

inline Matrix draw_normal_matrix(size_t rows, size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (double& v : m.data) v = rng.normal();
    return m;
}

inline std::vector<UpdateResult> masac_value_update(const std::vector<AgentBundle>& bundles,
                                                    const std::vector<Transition>& batch,
                                                    const AlgoConfig& cfg, Rng& rng) {
    JointBatch jb = make_joint_batch(batch, false);
    std::vector<UpdateResult> out;
    for (size_t i = 0; i < bundles.size(); ++i) {
        Matrix noise = draw_normal_matrix(jb.batch, bundles.size() * kContinuousActionDim, rng);
        out.push_back(masac_value_update_agent(bundles, jb, cfg, i, noise));
    }
    return out;
}

inline std::vector<UpdateResult> masac_q_update(const std::vector<AgentBundle>& bundles,
                                                const std::vector<Transition>& batch,
                                                const AlgoConfig& cfg) {
    JointBatch jb = make_joint_batch(batch, false);
    std::vector<UpdateResult> out;
    for (size_t i = 0; i < bundles.size(); ++i)
        out.push_back(masac_q_update_agent(bundles, jb, cfg, i));
    return out;
}

inline std::vector<UpdateResult> masac_actor_update(const std::vector<AgentBundle>& bundles,
                                                    const std::vector<Transition>& batch,
                                                    const AlgoConfig& cfg, Rng& rng) {
    JointBatch jb = make_joint_batch(batch, false);
    std::vector<UpdateResult> out;
    for (size_t i = 0; i < bundles.size(); ++i) {
        Matrix noise = draw_normal_matrix(jb.batch, bundles.size() * kContinuousActionDim, rng);
        out.push_back(masac_actor_update_agent(bundles, jb, cfg, i, noise));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Targets and action selection
// ---------------------------------------------------------------------------

inline void target_update(std::vector<AgentBundle>& bundles, const AlgoConfig& cfg) {
    for (AgentBundle& b : bundles) {
        if (cfg.discrete()) {
            polyak(b.target_actor, b.actor, cfg.rho);
            polyak(b.target_critic, b.critic, cfg.rho);
        } else {
            polyak(b.target_value, b.value, cfg.rho);
        }
    }
}

enum class ActionMode { explore, evaluate };

inline int select_action_discrete(const AgentBundle& bundle, const ObsVector& obs, ActionMode mode,
                                  double eps, Rng& rng) {
    if (mode == ActionMode::explore && rng.uniform() < eps)
        return rng.uniform_int(kDiscreteActions);
    std::vector<double> logits = forward(bundle.actor, obs);
    return static_cast<int>(argmax(logits));
}

inline Vec2 select_action_continuous(const AgentBundle& bundle, const ObsVector& obs,
                                     ActionMode mode, Rng& rng) {
    std::vector<double> out = forward(bundle.actor, obs);
    const size_t D = kContinuousActionDim;
    if (mode == ActionMode::evaluate) return {std::tanh(out[0]), std::tanh(out[1])};
    SquashedGaussianDist dist{{out[0], out[1]}, {out[D + 0], out[D + 1]}};
    SquashedSample s = squashed_gaussian_sample(dist, {rng.normal(), rng.normal()});
    return {s.action[0], s.action[1]};
}

inline JointAction select_joint_action(const std::vector<AgentBundle>& bundles,
                                       const std::vector<ObsVector>& obs, const AlgoConfig& cfg,
                                       ActionMode mode, double eps, Rng& rng) {
    JointAction ja;
    for (size_t i = 0; i < bundles.size(); ++i) {
        if (cfg.discrete())
            ja.discrete.push_back(select_action_discrete(bundles[i], obs[i], mode, eps, rng));
        else
            ja.continuous.push_back(select_action_continuous(bundles[i], obs[i], mode, rng));
    }
    return ja;
}

}  // namespace dvm
