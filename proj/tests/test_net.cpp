#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "dvm/net.hpp"
#include "test_util.hpp"

using namespace dvm;

TEST_CASE("forward: zero parameters give zero output") {
    Rng rng(7);
    ParamStore net = make_mlp(3, {4}, 2, rng);
    net.zero();
    auto out = forward(net, {0.3, -1.0, 2.0});
    REQUIRE(out.size() == 2);
    CHECK(out[0] == 0.0);
    CHECK(out[1] == 0.0);
}

TEST_CASE("forward: single identity layer passes input through") {
    ParamStore net;
    DenseLayer l;
    l.w = Matrix(2, 2);
    l.w(0, 0) = 1.0;
    l.w(1, 1) = 1.0;
    l.b = {0.0, 0.0};
    net.layers.push_back(l);
    auto out = forward(net, {1.5, -2.0});
    CHECK(out[0] == 1.5);
    CHECK(out[1] == -2.0);
}

namespace {

// Straight-line reference: explicit affine/relu loops, independent of
// forward_batch's traversal.
std::vector<double> reference_forward(const ParamStore& net, std::vector<double> x) {
    for (size_t k = 0; k < net.layers.size(); ++k) {
        const DenseLayer& l = net.layers[k];
        std::vector<double> y(l.w.rows, 0.0);
        for (size_t j = 0; j < l.w.rows; ++j) {
            y[j] = l.b[j];
            for (size_t c = 0; c < l.w.cols; ++c) y[j] += l.w(j, c) * x[c];
        }
        if (k + 1 < net.layers.size())
            for (double& v : y) v = v > 0.0 ? v : 0.0;
        x = y;
    }
    return x;
}

}  // namespace

TEST_CASE("forward: 2x256x256x2 net matches hand-rolled reference to 1e-12") {
    Rng rng(2024);
    ParamStore net = make_mlp(2, {256, 256}, 2, rng);
    std::vector<double> input = {0.37, -1.2};
    auto got = forward(net, input);
    auto want = reference_forward(net, input);
    REQUIRE(got.size() == want.size());
    for (size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - want[i]) < 1e-12);
}

TEST_CASE("forward: deterministic bitwise") {
    Rng rng(5);
    ParamStore net = make_mlp(4, {8, 8}, 3, rng);
    auto in = testutil::random_vector(4, rng);
    auto a = forward(net, in);
    auto b = forward(net, in);
    CHECK(a == b);
}

TEST_CASE("forward: dimension mismatch raises shape error") {
    Rng rng(5);
    ParamStore net = make_mlp(4, {8}, 3, rng);
    CHECK_THROWS_AS(forward(net, {1.0, 2.0}), ShapeError);
}

TEST_CASE("backward: zero upstream gives zero grad") {
    Rng rng(11);
    ParamStore net = make_mlp(3, {6}, 2, rng);
    auto [grad, xg] = backward(net, testutil::random_vector(3, rng), {0.0, 0.0});
    for (const auto& l : grad.layers) {
        for (double v : l.w.data) CHECK(v == 0.0);
        for (double v : l.b) CHECK(v == 0.0);
    }
    for (double v : xg) CHECK(v == 0.0);
}

TEST_CASE("backward: scalar affine net has grad {w: x, b: 1}") {
    ParamStore net;
    DenseLayer l;
    l.w = Matrix(1, 1);
    l.w(0, 0) = 2.5;
    l.b = {0.1};
    net.layers.push_back(l);
    auto [grad, xg] = backward(net, {1.7}, {1.0});
    CHECK(grad.layers[0].w(0, 0) == 1.7);
    CHECK(grad.layers[0].b[0] == 1.0);
    CHECK(xg[0] == 2.5);
}

TEST_CASE("backward: matches central finite differences on random small nets") {
    for (uint64_t trial = 0; trial < 20; ++trial) {
        Rng rng(100 + trial);
        ParamStore net = make_mlp(4, {7, 5}, 3, rng);
        auto input = testutil::random_vector(4, rng);
        auto upstream = testutil::random_vector(3, rng);

        Matrix x(1, 4);
        std::copy(input.begin(), input.end(), x.data.begin());
        auto loss = [&]() {
            auto out = forward(net, input);
            double s = 0.0;
            for (size_t i = 0; i < out.size(); ++i) s += upstream[i] * out[i];
            return s;
        };
        auto [grad, xg] = backward(net, input, upstream);
        CHECK(testutil::max_grad_rel_err(net, grad, loss) < 1e-4);
    }
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    Rng rng(3);
    ParamStore net = make_mlp(3, {4}, 2, rng);
    ParamStore before = net;
    AdamState st = make_adam(net, 0.1);
    adam_step(net, zeros_like(net), st);
    CHECK(st.step == 1);
    for (size_t k = 0; k < net.layers.size(); ++k) {
        CHECK(net.layers[k].w.data == before.layers[k].w.data);
        CHECK(net.layers[k].b == before.layers[k].b);
    }
}

TEST_CASE("adam: first step on unit gradient moves by about -lr") {
    ParamStore net;
    DenseLayer l;
    l.w = Matrix(1, 1);
    l.b = {0.0};
    net.layers.push_back(l);
    AdamState st = make_adam(net, 0.1);
    Grad g = zeros_like(net);
    g.layers[0].w(0, 0) = 1.0;
    adam_step(net, g, st);
    CHECK(std::abs(net.layers[0].w(0, 0) - (-0.1)) < 1e-8);
}

TEST_CASE("adam: constant gradient descends monotonically") {
    ParamStore net;
    DenseLayer l;
    l.w = Matrix(1, 1);
    l.b = {0.0};
    net.layers.push_back(l);
    AdamState st = make_adam(net, 0.05);
    Grad g = zeros_like(net);
    g.layers[0].w(0, 0) = 1.0;
    double prev = 0.0;
    for (int i = 0; i < 100; ++i) {
        adam_step(net, g, st);
        CHECK(net.layers[0].w(0, 0) < prev);
        prev = net.layers[0].w(0, 0);
    }
}

TEST_CASE("adam: non-finite gradient raises numeric error") {
    Rng rng(3);
    ParamStore net = make_mlp(2, {}, 1, rng);
    AdamState st = make_adam(net, 0.1);
    Grad g = zeros_like(net);
    g.layers[0].w(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(adam_step(net, g, st), NumericError);
}

TEST_CASE("softmax: symmetric logits, temperature one") {
    auto d = softmax_with_temperature({0.0, 0.0}, 1.0);
    CHECK(d.p[0] == Catch::Approx(0.5).margin(1e-15));
    CHECK(d.p[1] == Catch::Approx(0.5).margin(1e-15));
}

TEST_CASE("softmax: constant logits are uniform for any temperature") {
    for (double c : {-3.0, 0.0, 42.0}) {
        for (double tau : {0.1, 1.0, 7.5}) {
            auto d = softmax_with_temperature({c, c, c, c, c}, tau);
            for (double p : d.p) CHECK(p == Catch::Approx(0.2).margin(1e-12));
        }
    }
}

TEST_CASE("softmax: two-class case reduces to the logistic function") {
    auto d = softmax_with_temperature({1.0, 0.0}, 0.1);
    double sigma10 = 1.0 / (1.0 + std::exp(-10.0));
    CHECK(d.p[0] == Catch::Approx(sigma10).epsilon(1e-12));
    CHECK(d.p[1] == Catch::Approx(1.0 - sigma10).epsilon(1e-9));
}

TEST_CASE("softmax: sums to one and shift-invariant") {
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        size_t k = 2 + rng.uniform_index(6);
        auto logits = testutil::random_vector(k, rng, -30.0, 30.0);
        double tau = rng.uniform(0.05, 5.0);
        auto d = softmax_with_temperature(logits, tau);
        double sum = 0.0;
        for (double p : d.p) sum += p;
        CHECK(std::abs(sum - 1.0) < 1e-9);

        double shift = rng.uniform(-50.0, 50.0);
        auto shifted = logits;
        for (double& l : shifted) l += shift;
        auto d2 = softmax_with_temperature(shifted, tau);
        for (size_t i = 0; i < k; ++i) CHECK(d.p[i] == Catch::Approx(d2.p[i]).margin(1e-9));
    }
}

TEST_CASE("softmax: non-positive temperature raises parameter error") {
    CHECK_THROWS_AS(softmax_with_temperature({1.0, 2.0}, 0.0), ParamError);
    CHECK_THROWS_AS(softmax_with_temperature({1.0, 2.0}, -1.0), ParamError);
}

TEST_CASE("kl: identical distributions have zero divergence") {
    CategoricalDist p{{0.3, 0.7}};
    CHECK(kl_categorical(p, p) == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("kl: near-point mass against uniform approaches log 2") {
    double delta = 1e-9;
    CategoricalDist p{{1.0 - delta, delta}};
    CategoricalDist q{{0.5, 0.5}};
    CHECK(kl_categorical(p, q) == Catch::Approx(std::log(2.0)).margin(1e-7));
}

TEST_CASE("kl: matches direct summation oracle") {
    Rng rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        size_t k = 2 + rng.uniform_index(5);
        CategoricalDist p, q;
        double sp = 0.0, sq = 0.0;
        for (size_t i = 0; i < k; ++i) {
            p.p.push_back(rng.uniform(0.01, 1.0));
            q.p.push_back(rng.uniform(0.01, 1.0));
            sp += p.p.back();
            sq += q.p.back();
        }
        for (size_t i = 0; i < k; ++i) {
            p.p[i] /= sp;
            q.p[i] /= sq;
        }
        double direct = 0.0;
        for (size_t i = 0; i < k; ++i) direct += p.p[i] * std::log(p.p[i] / q.p[i]);
        double got = kl_categorical(p, q);
        CHECK(std::abs(got - direct) < 1e-12);
        CHECK(got >= -1e-15);
    }
}

TEST_CASE("kl: dimension mismatch raises shape error") {
    CategoricalDist p{{0.5, 0.5}};
    CategoricalDist q{{0.2, 0.3, 0.5}};
    CHECK_THROWS_AS(kl_categorical(p, q), ShapeError);
}

TEST_CASE("squashed gaussian: tiny stddev collapses to tanh(mean)") {
    SquashedGaussianDist d{{0.0, 0.7}, {-40.0, -40.0}};
    auto s = squashed_gaussian_sample(d, {3.0, -2.0});
    CHECK(std::abs(s.action[0]) < 1e-7);
    CHECK(s.action[1] == Catch::Approx(std::tanh(0.7)).margin(1e-7));
    CHECK(std::isfinite(s.log_prob));
}

TEST_CASE("squashed gaussian: samples stay strictly inside (-1, 1)") {
    Rng rng(31);
    for (int trial = 0; trial < 2000; ++trial) {
        SquashedGaussianDist d{{rng.uniform(-60.0, 60.0)}, {rng.uniform(-30.0, 4.0)}};
        auto s = squashed_gaussian_sample(d, {rng.normal()});
        CHECK(s.action[0] > -1.0);
        CHECK(s.action[0] < 1.0);
        CHECK(std::isfinite(s.log_prob));
    }
}

TEST_CASE("squashed gaussian: log_prob matches binned Monte-Carlo density", "[slow]") {
    SquashedGaussianDist d{{0.3}, {-0.4}};
    const double width = 0.04;
    const std::vector<double> centers = {std::tanh(0.3), 0.1, 0.45};
    std::vector<long> counts(centers.size(), 0);

    Rng rng(1234);
    const long n = 60000000;
    for (long i = 0; i < n; ++i) {
        auto s = squashed_gaussian_sample(d, {rng.normal()});
        for (size_t c = 0; c < centers.size(); ++c)
            if (std::abs(s.action[0] - centers[c]) < 0.5 * width) ++counts[c];
    }
    for (size_t c = 0; c < centers.size(); ++c) {
        double density = static_cast<double>(counts[c]) / (n * width);
        // log_prob evaluated exactly at the bin center via constructed noise
        double sigma = std::exp(-0.4);
        double noise = (std::atanh(centers[c]) - 0.3) / sigma;
        auto s = squashed_gaussian_sample(d, {noise});
        CHECK(std::abs(s.log_prob - std::log(density)) < 1e-3);
    }
}

TEST_CASE("polyak: rho=1 copies the source") {
    Rng rng(41);
    ParamStore src = make_mlp(3, {4}, 2, rng);
    ParamStore dst = make_mlp(3, {4}, 2, rng);
    polyak(dst, src, 1.0);
    for (size_t k = 0; k < src.layers.size(); ++k) CHECK(dst.layers[k].w.data == src.layers[k].w.data);
}
