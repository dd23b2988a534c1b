#pragma once

#include <cmath>
#include <vector>

#include "dvm/common.hpp"
#include "dvm/env.hpp"
#include "dvm/rng.hpp"

namespace dvm {

// One Dec-POMDP step as stored for training.
struct Transition {
    std::vector<ObsVector> obs;
    JointAction action;
    double reward = 0.0;
    std::vector<ObsVector> next_obs;
    bool done = false;
};

// Fixed-capacity ring buffer; oldest entries are overwritten first. Sampling
// is uniform with replacement and never mutates the contents.
class ReplayBuffer {
public:
    explicit ReplayBuffer(size_t capacity) : capacity_(capacity) {
        if (capacity == 0) throw ParamError("replay capacity must be positive");
    }

    size_t capacity() const { return capacity_; }
    size_t size() const { return store_.size(); }

    void push(Transition t) {
        if (!std::isfinite(t.reward)) throw ParamError("transition reward not finite");
        if (store_.size() < capacity_) {
            store_.push_back(std::move(t));
        } else {
            store_[cursor_] = std::move(t);
        }
        cursor_ = (cursor_ + 1) % capacity_;
    }

    const Transition& at(size_t i) const { return store_[i]; }

    std::vector<Transition> sample_batch(size_t n, Rng& rng) const {
        if (store_.empty()) throw StateError("sample from empty replay buffer");
        std::vector<Transition> batch;
        batch.reserve(n);
        for (size_t k = 0; k < n; ++k) batch.push_back(store_[rng.uniform_index(store_.size())]);
        return batch;
    }

    // Observation-only sampling: joint observations without their actions.
    std::vector<std::vector<ObsVector>> sample_observations(size_t n, Rng& rng) const {
        if (store_.empty()) throw StateError("sample from empty replay buffer");
        std::vector<std::vector<ObsVector>> out;
        out.reserve(n);
        for (size_t k = 0; k < n; ++k) out.push_back(store_[rng.uniform_index(store_.size())].obs);
        return out;
    }

private:
    size_t capacity_;
    size_t cursor_ = 0;
    std::vector<Transition> store_;
};

}  // namespace dvm
