#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "dvm/common.hpp"
#include "dvm/rng.hpp"

namespace dvm {

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double dot(Vec2 o) const { return x * o.x + y * o.y; }
    double norm() const { return std::hypot(x, y); }
    double norm2() const { return x * x + y * y; }
};

// ---------------------------------------------------------------------------
// Domains and phase protocol
// ---------------------------------------------------------------------------

// spread1 is the single-agent sub-case used by tests; the experiment protocol
// itself runs spread2/3/4 and pushbox.
enum class Domain { spread1, spread2, spread3, spread4, pushbox };
enum class Phase { one, two, three };

inline int agent_count(Domain d) {
    switch (d) {
        case Domain::spread1: return 1;
        case Domain::spread2: return 2;
        case Domain::spread3: return 3;
        case Domain::spread4: return 4;
        case Domain::pushbox: return 2;
    }
    return 0;
}

inline bool is_spread(Domain d) { return d != Domain::pushbox; }

struct EnvParams {
    double dt = 0.1;
    double damping = 0.25;
    double accel = 5.0;
    int episode_length = 25;
    double world_half = 1.0;
    double bound = 1.2;             // positions clamped to [-bound, bound]^2
    double agent_radius = 0.05;
    double box_radius = 0.15;
    double box_mass = 2.0;
    double contact_slack = 0.01;    // tolerance on the contact test
    double target_dist = 0.75;      // push-box target distance from origin
    double spawn_inner = 0.25;      // push-box agent spawn annulus
    double spawn_outer = 0.70;
};

// Quadrant ids: 0 = (-,-), 1 = (+,-), 2 = (+,+), 3 = (-,+).
inline Vec2 quadrant_anchor(int q, double world_half) {
    const double s = 0.5 * world_half;
    switch (q) {
        case 0: return {-s, -s};
        case 1: return {s, -s};
        case 2: return {s, s};
        case 3: return {-s, s};
    }
    throw ParamError("bad quadrant id");
}

// Quadrants occupied by agents/landmarks, in landmark order.
inline std::vector<int> active_quadrants(Domain d) {
    switch (d) {
        case Domain::spread1: return {0};
        case Domain::spread2: return {0, 2};
        case Domain::spread3: return {0, 1, 2};
        case Domain::spread4: return {0, 1, 2, 3};
        default: return {};
    }
}

struct PhaseSpec {
    Domain domain = Domain::spread2;
    Phase phase = Phase::one;
    // Agent i starts in quadrant quadrant_assignment[i]. Empty means the
    // phase default; randomized draws a fresh permutation every reset.
    std::vector<int> quadrant_assignment;
    bool randomized_quadrants = false;
    EnvParams params;
};

// Fills the per-phase defaults: Phase I assigns agent i to active quadrant i;
// Phase II swaps (spread2), shifts cyclically (spread3), or randomizes
// (spread4, 24 possible configurations).
inline PhaseSpec make_phase_spec(Domain domain, Phase phase, EnvParams params = {}) {
    PhaseSpec spec;
    spec.domain = domain;
    spec.phase = phase;
    spec.params = params;
    if (!is_spread(domain)) return spec;

    if (phase == Phase::three) throw ParamError("spread domains have phases I and II only");
    const std::vector<int> active = active_quadrants(domain);
    const int n = static_cast<int>(active.size());
    if (phase == Phase::one) {
        spec.quadrant_assignment = active;
    } else if (domain == Domain::spread4) {
        spec.randomized_quadrants = true;
    } else {
        for (int i = 0; i < n; ++i) spec.quadrant_assignment.push_back(active[(i + 1) % n]);
    }
    return spec;
}

// ---------------------------------------------------------------------------
// State, actions, observations
// ---------------------------------------------------------------------------

struct EnvState {
    PhaseSpec spec;
    std::vector<Vec2> pos;
    std::vector<Vec2> vel;
    std::vector<Vec2> landmarks;  // spread only
    Vec2 box_pos, box_vel, target;  // push box only
    int step_count = 0;
};

// Discrete actions: 0 no-op, 1 +x, 2 -x, 3 +y, 4 -y.
inline constexpr int kDiscreteActions = 5;

inline Vec2 discrete_force(int a) {
    switch (a) {
        case 0: return {0.0, 0.0};
        case 1: return {1.0, 0.0};
        case 2: return {-1.0, 0.0};
        case 3: return {0.0, 1.0};
        case 4: return {0.0, -1.0};
    }
    throw ParamError("discrete action out of range");
}

struct JointAction {
    std::vector<int> discrete;        // one index per agent, or
    std::vector<Vec2> continuous;     // one force per agent

    bool is_discrete() const { return !discrete.empty(); }
    size_t size() const { return is_discrete() ? discrete.size() : continuous.size(); }

    Vec2 force(size_t i) const {
        if (is_discrete()) return discrete_force(discrete[i]);
        Vec2 f = continuous[i];
        f.x = std::clamp(f.x, -1.0, 1.0);
        f.y = std::clamp(f.y, -1.0, 1.0);
        return f;
    }
};

using ObsVector = std::vector<double>;

inline size_t obs_dim(const PhaseSpec& spec) {
    const int n = agent_count(spec.domain);
    if (is_spread(spec.domain)) return 4 + 2 * static_cast<size_t>(n) + 2 * static_cast<size_t>(n - 1);
    return 4 + 4 + 2 * static_cast<size_t>(n - 1);
}

// Width of one agent's action block as seen by a centralized critic.
inline size_t action_block_dim(bool discrete) { return discrete ? kDiscreteActions : 2; }

// Observation layout: own velocity, own position, relative landmark/target/box
// offsets, then the other agents' relative positions sorted by heading angle
// (ties broken by distance). The heading sort makes observations purely
// relative, so swapping two agents' kinematic states swaps their observations.
inline ObsVector build_observation(const EnvState& state, int agent) {
    const int n = agent_count(state.spec.domain);
    if (agent < 0 || agent >= n) throw ParamError("agent index out of range");

    ObsVector obs;
    obs.reserve(obs_dim(state.spec));
    const Vec2 p = state.pos[agent];
    obs.push_back(state.vel[agent].x);
    obs.push_back(state.vel[agent].y);
    obs.push_back(p.x);
    obs.push_back(p.y);
    if (is_spread(state.spec.domain)) {
        for (const Vec2& lm : state.landmarks) {
            obs.push_back(lm.x - p.x);
            obs.push_back(lm.y - p.y);
        }
    } else {
        obs.push_back(state.target.x - p.x);
        obs.push_back(state.target.y - p.y);
        obs.push_back(state.box_pos.x - p.x);
        obs.push_back(state.box_pos.y - p.y);
    }

    std::vector<Vec2> rel;
    for (int j = 0; j < n; ++j)
        if (j != agent) rel.push_back(state.pos[j] - p);
    std::sort(rel.begin(), rel.end(), [](Vec2 a, Vec2 b) {
        double ha = std::atan2(a.y, a.x);
        double hb = std::atan2(b.y, b.x);
        if (ha != hb) return ha < hb;
        return a.norm2() < b.norm2();
    });
    for (const Vec2& r : rel) {
        obs.push_back(r.x);
        obs.push_back(r.y);
    }
    return obs;
}

inline std::vector<ObsVector> build_joint_observation(const EnvState& state) {
    std::vector<ObsVector> obs;
    const int n = agent_count(state.spec.domain);
    obs.reserve(n);
    for (int i = 0; i < n; ++i) obs.push_back(build_observation(state, i));
    return obs;
}

// ---------------------------------------------------------------------------
// Rewards
// ---------------------------------------------------------------------------

// Shared reward: negative sum over landmarks of the distance to the closest
// agent.
inline double spread_reward(const EnvState& state) {
    if (!is_spread(state.spec.domain)) throw ParamError("spread_reward on non-spread domain");
    double r = 0.0;
    for (const Vec2& lm : state.landmarks) {
        double best = (state.pos[0] - lm).norm();
        for (size_t i = 1; i < state.pos.size(); ++i)
            best = std::min(best, (state.pos[i] - lm).norm());
        r -= best;
    }
    return r;
}

inline double pushbox_reward(const EnvState& state) {
    if (state.spec.domain != Domain::pushbox) throw ParamError("pushbox_reward on non-pushbox domain");
    return -(state.target - state.box_pos).norm2();
}

inline double reward(const EnvState& state) {
    return is_spread(state.spec.domain) ? spread_reward(state) : pushbox_reward(state);
}

// ---------------------------------------------------------------------------
// Reset / step
// ---------------------------------------------------------------------------

inline std::pair<EnvState, std::vector<ObsVector>> reset(const PhaseSpec& spec, Rng& rng) {
    const int n = agent_count(spec.domain);
    EnvState s;
    s.spec = spec;
    s.pos.assign(n, Vec2{});
    s.vel.assign(n, Vec2{});
    s.step_count = 0;

    const EnvParams& pr = spec.params;
    if (is_spread(spec.domain)) {
        const std::vector<int> active = active_quadrants(spec.domain);
        for (int q : active) s.landmarks.push_back(quadrant_anchor(q, pr.world_half));

        std::vector<int> assign = spec.quadrant_assignment;
        if (spec.randomized_quadrants) {
            assign = active;
            for (int i = n - 1; i > 0; --i)
                std::swap(assign[i], assign[rng.uniform_int(i + 1)]);
        }
        if (static_cast<int>(assign.size()) != n) throw ParamError("quadrant assignment size mismatch");
        for (int i = 0; i < n; ++i) {
            Vec2 a = quadrant_anchor(assign[i], pr.world_half);
            double sx = a.x < 0 ? -1.0 : 1.0;
            double sy = a.y < 0 ? -1.0 : 1.0;
            s.pos[i].x = sx * rng.uniform(0.0, pr.world_half);
            s.pos[i].y = sy * rng.uniform(0.0, pr.world_half);
        }
    } else {
        s.box_pos = {0.0, 0.0};
        s.box_vel = {0.0, 0.0};
        switch (spec.phase) {
            case Phase::one: s.target = {-pr.target_dist, 0.0}; break;
            case Phase::two: s.target = {pr.target_dist, 0.0}; break;
            case Phase::three: {
                // Task III: uniform over the two pre-training targets plus a
                // third equally far from the box.
                int pick = rng.uniform_int(3);
                if (pick == 0) s.target = {-pr.target_dist, 0.0};
                else if (pick == 1) s.target = {pr.target_dist, 0.0};
                else s.target = {0.0, pr.target_dist};
                break;
            }
        }
        for (int i = 0; i < n; ++i) {
            double r = rng.uniform(pr.spawn_inner, pr.spawn_outer);
            double th = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
            s.pos[i] = {r * std::cos(th), r * std::sin(th)};
        }
    }
    auto obs = build_joint_observation(s);
    return {std::move(s), std::move(obs)};
}

// True when the agent is touching the box and applying a force with a
// positive component toward it.
inline bool pushes_box(const EnvState& state, int agent, Vec2 force) {
    const EnvParams& pr = state.spec.params;
    const Vec2 to_box = state.box_pos - state.pos[agent];
    if (to_box.norm() > pr.agent_radius + pr.box_radius + pr.contact_slack) return false;
    if (force.x == 0.0 && force.y == 0.0) return false;
    return force.dot(to_box) > 0.0;
}

struct StepResult {
    EnvState state;
    std::vector<ObsVector> obs;
    double reward = 0.0;
    bool done = false;
};

inline StepResult step(const EnvState& state, const JointAction& actions) {
    const int n = agent_count(state.spec.domain);
    const EnvParams& pr = state.spec.params;
    if (state.step_count >= pr.episode_length) throw StateError("step on terminal state");
    if (static_cast<int>(actions.size()) != n) throw ShapeError("joint action size mismatch");

    StepResult out;
    out.state = state;
    EnvState& s = out.state;

    // Box is accelerated only when both agents push it this step; the push
    // force is the sum of the agents' forces.
    Vec2 box_force{0.0, 0.0};
    if (state.spec.domain == Domain::pushbox) {
        bool all_push = true;
        Vec2 total{0.0, 0.0};
        for (int i = 0; i < n; ++i) {
            Vec2 f = actions.force(i);
            if (!pushes_box(state, i, f)) all_push = false;
            total = total + f;
        }
        if (all_push) box_force = total;
    }

    for (int i = 0; i < n; ++i) {
        Vec2 f = actions.force(i);
        s.vel[i] = s.vel[i] * (1.0 - pr.damping) + f * (pr.dt * pr.accel);
        s.pos[i] = s.pos[i] + s.vel[i] * pr.dt;
        s.pos[i].x = std::clamp(s.pos[i].x, -pr.bound, pr.bound);
        s.pos[i].y = std::clamp(s.pos[i].y, -pr.bound, pr.bound);
    }

    if (state.spec.domain == Domain::pushbox) {
        s.box_vel = s.box_vel * (1.0 - pr.damping) + box_force * (pr.dt * pr.accel / pr.box_mass);
        s.box_pos = s.box_pos + s.box_vel * pr.dt;
        s.box_pos.x = std::clamp(s.box_pos.x, -pr.bound, pr.bound);
        s.box_pos.y = std::clamp(s.box_pos.y, -pr.bound, pr.bound);

        // Disk collision agent<->box: project overlapping agents out.
        const double rsum = pr.agent_radius + pr.box_radius;
        for (int i = 0; i < n; ++i) {
            Vec2 d = s.pos[i] - s.box_pos;
            double dist = d.norm();
            if (dist < rsum) {
                Vec2 dir = dist > 1e-12 ? d * (1.0 / dist) : Vec2{1.0, 0.0};
                s.pos[i] = s.box_pos + dir * rsum;
            }
        }
    }

    s.step_count += 1;
    out.reward = reward(s);
    out.done = (s.step_count >= pr.episode_length);
    out.obs = build_joint_observation(s);
    return out;
}

// ---------------------------------------------------------------------------
// Agent-block permutations (symmetric group over agents)
// ---------------------------------------------------------------------------

inline void check_permutation(const std::vector<int>& perm, size_t n) {
    if (perm.size() != n) throw ParamError("permutation size mismatch");
    std::vector<bool> seen(n, false);
    for (int v : perm) {
        if (v < 0 || static_cast<size_t>(v) >= n || seen[v]) throw ParamError("not a permutation");
        seen[v] = true;
    }
}

// Reorders per-agent observation and action blocks by the same permutation:
// output block k is input block perm[k]. Keeping the two aligned preserves
// the (o, a) pairing the critic was trained on.
inline std::pair<std::vector<ObsVector>, std::vector<std::vector<double>>> permute_joint(
    const std::vector<ObsVector>& obs, const std::vector<std::vector<double>>& act,
    const std::vector<int>& perm) {
    if (obs.size() != act.size()) throw ShapeError("permute_joint: obs/act block count mismatch");
    check_permutation(perm, obs.size());
    std::vector<ObsVector> po(obs.size());
    std::vector<std::vector<double>> pa(act.size());
    for (size_t k = 0; k < perm.size(); ++k) {
        po[k] = obs[perm[k]];
        pa[k] = act[perm[k]];
    }
    return {std::move(po), std::move(pa)};
}

inline std::vector<std::vector<int>> enumerate_permutations(int n) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<std::vector<int>> all;
    do {
        all.push_back(idx);
    } while (std::next_permutation(idx.begin(), idx.end()));
    return all;
}

}  // namespace dvm
