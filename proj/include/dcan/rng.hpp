// Copyright (c) 2026 the dcan authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace dcan {

// Seeded random source. All distributions are hand-rolled on top of the
// mt19937_64 bit stream so draws are reproducible independent of the
// standard library's distribution implementations.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed), seed_(seed) {}

    uint64_t seed() const { return seed_; }

    uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n), unbiased rejection sampling.
    uint64_t uniform_int(uint64_t n) {
        if (n <= 1) return 0;
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return x % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Standard normal via Box-Muller (one value per call, cached pair).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // Normal truncated to two standard deviations, the usual transformer
    // parameter init.
    double truncated_normal(double stddev) {
        double z = normal();
        while (std::fabs(z) > 2.0) z = normal();
        return z * stddev;
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Deterministic child stream for a named subcomponent.
    Rng child(uint64_t tag) const { return Rng(mix(seed_, tag)); }

    static uint64_t mix(uint64_t a, uint64_t b) {
        // splitmix64 finalizer over the combined state
        uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static uint64_t hash_str(const std::string& s) {
        uint64_t h = 1469598103934665603ULL;  // FNV-1a
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        return h;
    }

private:
    std::mt19937_64 gen_;
    uint64_t seed_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace dcan
