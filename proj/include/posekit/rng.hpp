#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace posekit {

// Deterministic random source. All draws are derived from raw mt19937_64
// output with fixed arithmetic; std::*_distribution is avoided because its
// bit stream is implementation-defined and reproducibility of seeds is part
// of the contract here.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : engine_(seed), seed_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of mantissa.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n), n > 0. Rejection sampling keeps it unbiased.
    uint64_t uniform_int(uint64_t n) {
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Standard normal via Box-Muller, one spare cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Independent child stream; the mixing constant keeps streams for
    // distinct tags decorrelated even for small seeds.
    Rng fork(uint64_t tag) const {
        return Rng(seed_ ^ (0x9E3779B97F4A7C15ull * (tag + 1)));
    }

    uint64_t seed() const { return seed_; }

private:
    std::mt19937_64 engine_;
    uint64_t seed_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace posekit
