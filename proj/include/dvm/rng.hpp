#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace dvm {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Seeded RNG with hand-rolled transforms. std::mt19937_64 output is fixed by
// the standard; the distributions below avoid the implementation-defined
// std::*_distribution classes so sequences are reproducible everywhere.
class Rng {
public:
    Rng() : Rng(0) {}
    explicit Rng(uint64_t seed) : eng_(splitmix64(seed)) {}

    uint64_t next_u64() { return eng_(); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform in (0, 1]
    double uniform_pos() { return (static_cast<double>(eng_() >> 11) + 1.0) * 0x1.0p-53; }

    // standard normal via Box-Muller; consumes exactly two engine draws
    double normal() {
        double u1 = uniform_pos();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    // standard Gumbel(0,1)
    double gumbel() { return -std::log(-std::log(uniform_pos())); }

    // unbiased integer in [0, n) (Lemire's method)
    size_t uniform_index(size_t n) {
        uint64_t bound = static_cast<uint64_t>(n);
        uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            uint64_t x = eng_();
            __uint128_t m = static_cast<__uint128_t>(x) * bound;
            if (static_cast<uint64_t>(m) >= threshold) return static_cast<size_t>(m >> 64);
        }
    }

    int uniform_int(int n) { return static_cast<int>(uniform_index(static_cast<size_t>(n))); }

private:
    static constexpr double kPi = 3.14159265358979323846;
    std::mt19937_64 eng_;
};

// Derives an independent stream from a master seed; stream ids keep
// train/eval/init/dvm draws from interleaving.
inline Rng substream(uint64_t master, uint64_t stream_id) {
    return Rng(splitmix64(master) ^ splitmix64(0xabcd0000 + stream_id));
}

}  // namespace dvm
