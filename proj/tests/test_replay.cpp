#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "dvm/replay.hpp"

using namespace dvm;

namespace {

// Transitions tagged through the reward field.
Transition tagged(double tag) {
    Transition t;
    t.obs = {{tag, 0.0}, {0.0, tag}};
    t.action.discrete = {0, 1};
    t.reward = tag;
    t.next_obs = t.obs;
    t.done = false;
    return t;
}

}  // namespace

TEST_CASE("push: size grows until capacity then overwrites oldest") {
    ReplayBuffer buf(2);
    buf.push(tagged(1));
    CHECK(buf.size() == 1);
    buf.push(tagged(2));
    buf.push(tagged(3));
    CHECK(buf.size() == 2);
    std::set<double> held = {buf.at(0).reward, buf.at(1).reward};
    CHECK(held == std::set<double>{2.0, 3.0});
}

TEST_CASE("push: after capacity+k pushes only the last capacity remain") {
    const size_t cap = 16;
    ReplayBuffer buf(cap);
    const int total = 41;
    for (int i = 0; i < total; ++i) buf.push(tagged(i));
    std::set<double> held;
    for (size_t i = 0; i < buf.size(); ++i) held.insert(buf.at(i).reward);
    std::set<double> want;
    for (int i = total - static_cast<int>(cap); i < total; ++i) want.insert(i);
    CHECK(held == want);
}

TEST_CASE("sample_batch: a singleton buffer repeats its entry") {
    ReplayBuffer buf(8);
    buf.push(tagged(7));
    Rng rng(1);
    auto batch = buf.sample_batch(5, rng);
    REQUIRE(batch.size() == 5);
    for (const auto& t : batch) CHECK(t.reward == 7.0);
}

TEST_CASE("sample_batch: n = 0 returns an empty list") {
    ReplayBuffer buf(8);
    buf.push(tagged(1));
    Rng rng(2);
    CHECK(buf.sample_batch(0, rng).empty());
}

TEST_CASE("sample_batch: empty buffer raises state error") {
    ReplayBuffer buf(8);
    Rng rng(3);
    CHECK_THROWS_AS(buf.sample_batch(1, rng), StateError);
    CHECK_THROWS_AS(buf.sample_observations(1, rng), StateError);
}

TEST_CASE("sample_batch: frequencies uniform within 5 sigma over 1e5 draws") {
    ReplayBuffer buf(10);
    for (int i = 0; i < 10; ++i) buf.push(tagged(i));
    Rng rng(4);
    const int n = 100000;
    std::vector<int> counts(10, 0);
    auto batch = buf.sample_batch(n, rng);
    for (const auto& t : batch) counts[static_cast<int>(t.reward)]++;
    const double expect = n / 10.0;
    const double sigma = std::sqrt(n * 0.1 * 0.9);
    for (int c : counts) CHECK(std::abs(c - expect) < 5.0 * sigma);
}

TEST_CASE("sample_observations: returns observations without actions") {
    ReplayBuffer buf(4);
    buf.push(tagged(3));
    Rng rng(5);
    auto obs = buf.sample_observations(2, rng);
    REQUIRE(obs.size() == 2);
    CHECK(obs[0].size() == 2);       // joint observation, one block per agent
    CHECK(obs[0][0][0] == 3.0);
}

TEST_CASE("sample_observations: distribution matches the sample_batch projection") {
    ReplayBuffer buf(10);
    for (int i = 0; i < 10; ++i) buf.push(tagged(i));
    const int n = 100000;
    std::vector<int> from_batch(10, 0), from_obs(10, 0);
    {
        Rng rng(6);
        for (const auto& t : buf.sample_batch(n, rng)) from_batch[static_cast<int>(t.reward)]++;
    }
    {
        Rng rng(7);
        for (const auto& o : buf.sample_observations(n, rng)) from_obs[static_cast<int>(o[0][0])]++;
    }
    const double sigma = std::sqrt(n * 0.1 * 0.9);
    for (int i = 0; i < 10; ++i) CHECK(std::abs(from_batch[i] - from_obs[i]) < 7.0 * sigma);
}

TEST_CASE("sampling is deterministic given the seed and never mutates the buffer") {
    ReplayBuffer buf(10);
    for (int i = 0; i < 7; ++i) buf.push(tagged(i));
    std::vector<double> before;
    for (size_t i = 0; i < buf.size(); ++i) before.push_back(buf.at(i).reward);

    Rng a(99), b(99);
    auto s1 = buf.sample_batch(50, a);
    auto s2 = buf.sample_batch(50, b);
    for (size_t i = 0; i < s1.size(); ++i) CHECK(s1[i].reward == s2[i].reward);

    std::vector<double> after;
    for (size_t i = 0; i < buf.size(); ++i) after.push_back(buf.at(i).reward);
    CHECK(before == after);
}

TEST_CASE("non-finite reward is rejected") {
    ReplayBuffer buf(2);
    Transition t = tagged(1);
    t.reward = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(buf.push(t), ParamError);
}
