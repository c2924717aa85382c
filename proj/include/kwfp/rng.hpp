#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

namespace kwfp {

inline uint64_t splitmix64(uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline uint64_t mix_seed(uint64_t a, uint64_t b) {
    uint64_t s = a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
    return splitmix64(s);
}

// Deterministic RNG (xoshiro256** core) with pinned distribution
// algorithms, so seeded results are identical across platforms and
// standard-library versions. All randomness in the toolkit flows
// through this type.
class Rng {
public:
    explicit Rng(uint64_t seed) : seed_(seed) {
        uint64_t s = seed;
        for (auto& w : state_) w = splitmix64(s);
    }

    uint64_t seed() const { return seed_; }

    uint64_t next_u64() {
        const uint64_t result = std::rotl(state_[1] * 5, 7) * 9;
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = std::rotl(state_[3], 45);
        return result;
    }

    // Independent substream addressed by integer tags; used for
    // per-tree / per-sample streams so parallel work is order-free.
    Rng derive(std::initializer_list<uint64_t> tags) const {
        uint64_t h = seed_;
        for (uint64_t t : tags) h = mix_seed(h, t);
        return Rng(h);
    }

    // Uniform integer in [0, n), n >= 1. Unbiased via rejection.
    uint64_t uniform_below(uint64_t n) {
        const uint64_t threshold = (0 - n) % n;
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // Uniform integer in [lo, hi], inclusive.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        return lo + static_cast<int64_t>(uniform_below(static_cast<uint64_t>(hi - lo) + 1));
    }

    // Uniform double in [0, 1).
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform double in the open interval (0, 1).
    double uniform_open01() {
        for (;;) {
            double u = uniform01();
            if (u > 0.0) return u;
        }
    }

    // Uniform double in the open interval (lo, hi).
    double uniform_open(double lo, double hi) {
        for (;;) {
            double v = lo + uniform_open01() * (hi - lo);
            if (v > lo && v < hi) return v;
        }
    }

    // Box-Muller, one draw per call (no cached spare, keeps streams simple).
    double normal(double mean, double stddev) {
        double u1 = uniform_open01();
        double u2 = uniform01();
        double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
        return mean + stddev * z;
    }

    // Knuth's product method; fine for the small rates used here.
    uint64_t poisson(double mean) {
        if (mean <= 0.0) return 0;
        const double limit = std::exp(-mean);
        uint64_t k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform01();
        } while (p > limit);
        return k - 1;
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = uniform_below(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t seed_;
    uint64_t state_[4];
};

inline uint64_t double_bits(double d) { return std::bit_cast<uint64_t>(d); }

}  // namespace kwfp
