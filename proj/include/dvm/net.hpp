#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "dvm/common.hpp"
#include "dvm/rng.hpp"

namespace dvm {

// ---------------------------------------------------------------------------
// Dense storage
// ---------------------------------------------------------------------------

// Row-major dense matrix of doubles.
struct Matrix {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(size_t r, size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(size_t r, size_t c) { return data[r * cols + c]; }
    double operator()(size_t r, size_t c) const { return data[r * cols + c]; }

    double* row(size_t r) { return data.data() + r * cols; }
    const double* row(size_t r) const { return data.data() + r * cols; }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

struct DenseLayer {
    Matrix w;                // out x in
    std::vector<double> b;   // out
};

// Stack of affine layers with ReLU between hidden layers and an affine output.
// Also reused as gradient storage (Grad below) since shapes are congruent.
struct ParamStore {
    std::vector<DenseLayer> layers;

    size_t in_dim() const { return layers.empty() ? 0 : layers.front().w.cols; }
    size_t out_dim() const { return layers.empty() ? 0 : layers.back().w.rows; }

    bool congruent_with(const ParamStore& other) const {
        if (layers.size() != other.layers.size()) return false;
        for (size_t k = 0; k < layers.size(); ++k) {
            if (layers[k].w.rows != other.layers[k].w.rows) return false;
            if (layers[k].w.cols != other.layers[k].w.cols) return false;
        }
        return true;
    }

    void zero() {
        for (auto& l : layers) {
            l.w.fill(0.0);
            std::fill(l.b.begin(), l.b.end(), 0.0);
        }
    }

    bool finite() const {
        for (const auto& l : layers) {
            for (double v : l.w.data)
                if (!std::isfinite(v)) return false;
            for (double v : l.b)
                if (!std::isfinite(v)) return false;
        }
        return true;
    }
};

using Grad = ParamStore;

inline Grad zeros_like(const ParamStore& net) {
    Grad g;
    g.layers.reserve(net.layers.size());
    for (const auto& l : net.layers) {
        DenseLayer z;
        z.w = Matrix(l.w.rows, l.w.cols);
        z.b.assign(l.b.size(), 0.0);
        g.layers.push_back(std::move(z));
    }
    return g;
}

// MLP with uniform +-1/sqrt(fan_in) initialization.
inline ParamStore make_mlp(size_t in, const std::vector<size_t>& hidden, size_t out, Rng& rng) {
    if (in == 0 || out == 0) throw ShapeError("make_mlp: zero-width layer");
    std::vector<size_t> dims;
    dims.push_back(in);
    for (size_t h : hidden) dims.push_back(h);
    dims.push_back(out);

    ParamStore net;
    for (size_t k = 0; k + 1 < dims.size(); ++k) {
        DenseLayer l;
        l.w = Matrix(dims[k + 1], dims[k]);
        l.b.assign(dims[k + 1], 0.0);
        double bound = 1.0 / std::sqrt(static_cast<double>(dims[k]));
        for (double& v : l.w.data) v = rng.uniform(-bound, bound);
        for (double& v : l.b) v = rng.uniform(-bound, bound);
        net.layers.push_back(std::move(l));
    }
    return net;
}

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

// Post-activation values per layer; acts[0] is the input batch.
struct BatchCache {
    std::vector<Matrix> acts;
};

// X is batch x in_dim; returns batch x out_dim. ReLU after every layer except
// the last. The inner accumulation order is fixed so results are bitwise
// reproducible.
inline Matrix forward_batch(const ParamStore& net, const Matrix& x, BatchCache* cache = nullptr) {
    if (net.layers.empty()) throw ShapeError("forward: empty network");
    if (x.cols != net.in_dim()) throw ShapeError("forward: input width mismatch");

    if (cache) {
        cache->acts.clear();
        cache->acts.push_back(x);
    }
    Matrix cur = x;
    for (size_t k = 0; k < net.layers.size(); ++k) {
        const DenseLayer& l = net.layers[k];
        const bool last = (k + 1 == net.layers.size());
        Matrix next(cur.rows, l.w.rows);
        for (size_t i = 0; i < cur.rows; ++i) {
            const double* xi = cur.row(i);
            double* yi = next.row(i);
            for (size_t j = 0; j < l.w.rows; ++j) {
                const double* wj = l.w.row(j);
                double acc = l.b[j];
                for (size_t c = 0; c < l.w.cols; ++c) acc += wj[c] * xi[c];
                yi[j] = (!last && acc < 0.0) ? 0.0 : acc;
            }
        }
        cur = std::move(next);
        if (cache) cache->acts.push_back(cur);
    }
    return cur;
}

inline std::vector<double> forward(const ParamStore& net, const std::vector<double>& input) {
    Matrix x(1, input.size());
    std::copy(input.begin(), input.end(), x.data.begin());
    Matrix y = forward_batch(net, x);
    return y.data;
}

// Accumulates parameter gradients of sum_b <upstream_b, f(x_b)> into grad
// (caller zeroes or scales upstream for means). When input_grad is non-null it
// receives d/dx of the same scalar. ReLU derivative at exactly zero is zero.
inline void backward_batch(const ParamStore& net, const BatchCache& cache, const Matrix& upstream,
                           Grad& grad, Matrix* input_grad = nullptr, bool want_param_grads = true) {
    if (cache.acts.size() != net.layers.size() + 1) throw ShapeError("backward: cache mismatch");
    if (upstream.cols != net.out_dim() || upstream.rows != cache.acts[0].rows)
        throw ShapeError("backward: upstream shape mismatch");
    if (want_param_grads && !grad.congruent_with(net)) throw ShapeError("backward: grad shape mismatch");

    Matrix delta = upstream;
    for (size_t k = net.layers.size(); k-- > 0;) {
        const DenseLayer& l = net.layers[k];
        const Matrix& below = cache.acts[k];
        const bool last = (k + 1 == net.layers.size());

        // delta is d/d(post-activation of layer k); fold in the ReLU mask.
        if (!last) {
            const Matrix& post = cache.acts[k + 1];
            for (size_t i = 0; i < delta.data.size(); ++i)
                if (post.data[i] <= 0.0) delta.data[i] = 0.0;
        }

        if (want_param_grads) {
            DenseLayer& gl = grad.layers[k];
            for (size_t i = 0; i < delta.rows; ++i) {
                const double* di = delta.row(i);
                const double* xi = below.row(i);
                for (size_t j = 0; j < l.w.rows; ++j) {
                    const double dj = di[j];
                    if (dj == 0.0) continue;
                    double* gw = gl.w.row(j);
                    for (size_t c = 0; c < l.w.cols; ++c) gw[c] += dj * xi[c];
                    gl.b[j] += dj;
                }
            }
        }

        if (k == 0 && !input_grad) break;
        Matrix next_delta(delta.rows, l.w.cols);
        for (size_t i = 0; i < delta.rows; ++i) {
            const double* di = delta.row(i);
            double* ni = next_delta.row(i);
            for (size_t j = 0; j < l.w.rows; ++j) {
                const double dj = di[j];
                if (dj == 0.0) continue;
                const double* wj = l.w.row(j);
                for (size_t c = 0; c < l.w.cols; ++c) ni[c] += dj * wj[c];
            }
        }
        delta = std::move(next_delta);
    }
    if (input_grad) *input_grad = std::move(delta);
}

// Single-sample convenience: gradient of <upstream, forward(net, input)>.
inline std::pair<Grad, std::vector<double>> backward(const ParamStore& net,
                                                     const std::vector<double>& input,
                                                     const std::vector<double>& upstream) {
    if (upstream.size() != net.out_dim()) throw ShapeError("backward: upstream length mismatch");
    Matrix x(1, input.size());
    std::copy(input.begin(), input.end(), x.data.begin());
    BatchCache cache;
    forward_batch(net, x, &cache);
    Matrix up(1, upstream.size());
    std::copy(upstream.begin(), upstream.end(), up.data.begin());
    Grad g = zeros_like(net);
    Matrix xg;
    backward_batch(net, cache, up, g, &xg);
    return {std::move(g), std::move(xg.data)};
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamState {
    Grad m;
    Grad v;
    long step = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

inline AdamState make_adam(const ParamStore& net, double lr) {
    AdamState s;
    s.m = zeros_like(net);
    s.v = zeros_like(net);
    s.lr = lr;
    return s;
}

inline void adam_step(ParamStore& net, const Grad& grad, AdamState& state) {
    if (!grad.congruent_with(net) || !state.m.congruent_with(net))
        throw ShapeError("adam_step: shape mismatch");
    if (!grad.finite()) throw NumericError("adam_step: non-finite gradient");

    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

    auto update = [&](double& p, double g, double& m, double& v) {
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g * g;
        p -= state.lr * (m / bc1) / (std::sqrt(v / bc2) + state.eps);
    };
    for (size_t k = 0; k < net.layers.size(); ++k) {
        auto& l = net.layers[k];
        const auto& gl = grad.layers[k];
        auto& ml = state.m.layers[k];
        auto& vl = state.v.layers[k];
        for (size_t i = 0; i < l.w.data.size(); ++i)
            update(l.w.data[i], gl.w.data[i], ml.w.data[i], vl.w.data[i]);
        for (size_t i = 0; i < l.b.size(); ++i) update(l.b[i], gl.b[i], ml.b[i], vl.b[i]);
    }
}

// ---------------------------------------------------------------------------
// Policy distributions
// ---------------------------------------------------------------------------

struct CategoricalDist {
    std::vector<double> p;
};

// Softmax of logits/tau with max subtraction.
inline CategoricalDist softmax_with_temperature(const std::vector<double>& logits, double tau) {
    if (tau <= 0.0) throw ParamError("softmax temperature must be positive");
    if (logits.empty()) throw ShapeError("softmax on empty logits");
    double mx = logits[0] / tau;
    for (double l : logits) mx = std::max(mx, l / tau);
    CategoricalDist d;
    d.p.resize(logits.size());
    double sum = 0.0;
    for (size_t k = 0; k < logits.size(); ++k) {
        d.p[k] = std::exp(logits[k] / tau - mx);
        sum += d.p[k];
    }
    for (double& v : d.p) v /= sum;
    return d;
}

// KL(p || q) = sum p log(p/q). q must be strictly positive.
inline double kl_categorical(const CategoricalDist& p, const CategoricalDist& q) {
    if (p.p.size() != q.p.size()) throw ShapeError("kl_categorical: size mismatch");
    double kl = 0.0;
    for (size_t k = 0; k < p.p.size(); ++k) {
        if (p.p[k] <= 0.0) continue;
        kl += p.p[k] * std::log(p.p[k] / q.p[k]);
    }
    return kl;
}

// Gaussian squashed through tanh. log_std is clamped to [kLogStdMin, kLogStdMax].
inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

struct SquashedGaussianDist {
    std::vector<double> mean;
    std::vector<double> log_std;
};

inline double clamp_log_std(double v) { return std::clamp(v, kLogStdMin, kLogStdMax); }

inline double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// log(1 - tanh(u)^2), numerically stable for large |u|.
inline double log1m_tanh2(double u) {
    return 2.0 * (std::log(2.0) - u - softplus(-2.0 * u));
}

struct SquashedSample {
    std::vector<double> action;
    double log_prob = 0.0;
};

// Reparameterized sample: action = tanh(mean + std * noise), with the tanh
// change-of-variables correction folded into log_prob.
inline SquashedSample squashed_gaussian_sample(const SquashedGaussianDist& dist,
                                               const std::vector<double>& noise) {
    if (dist.mean.size() != dist.log_std.size() || dist.mean.size() != noise.size())
        throw ShapeError("squashed_gaussian_sample: size mismatch");
    constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5*log(2*pi)
    constexpr double kInterior = 1.0 - 1e-12;  // tanh saturates to exactly 1 in doubles
    SquashedSample s;
    s.action.resize(dist.mean.size());
    for (size_t d = 0; d < dist.mean.size(); ++d) {
        double ls = clamp_log_std(dist.log_std[d]);
        double std_ = std::exp(ls);
        double u = dist.mean[d] + std_ * noise[d];
        s.action[d] = std::clamp(std::tanh(u), -kInterior, kInterior);
        s.log_prob += -0.5 * noise[d] * noise[d] - kHalfLog2Pi - ls - log1m_tanh2(u);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Small helpers shared by the training code
// ---------------------------------------------------------------------------

inline size_t argmax(const double* v, size_t n) {
    size_t best = 0;
    for (size_t k = 1; k < n; ++k)
        if (v[k] > v[best]) best = k;
    return best;
}

inline size_t argmax(const std::vector<double>& v) { return argmax(v.data(), v.size()); }

inline void polyak(ParamStore& target, const ParamStore& source, double rho) {
    if (!target.congruent_with(source)) throw ShapeError("polyak: shape mismatch");
    for (size_t k = 0; k < target.layers.size(); ++k) {
        auto& t = target.layers[k];
        const auto& s = source.layers[k];
        for (size_t i = 0; i < t.w.data.size(); ++i)
            t.w.data[i] = (1.0 - rho) * t.w.data[i] + rho * s.w.data[i];
        for (size_t i = 0; i < t.b.size(); ++i) t.b[i] = (1.0 - rho) * t.b[i] + rho * s.b[i];
    }
}

}  // namespace dvm
