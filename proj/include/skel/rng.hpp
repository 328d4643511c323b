#pragma once

#include <cstdint>
#include <random>

namespace skel {

/// Seedable RNG wrapper. All randomness in the library flows through this so
/// that a fixed seed gives bit-identical runs.
class Rng {
 public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next() { return gen_(); }

    double uniform(double lo, double hi) {
        std::uniform_real_distribution<double> d(lo, hi);
        return d(gen_);
    }

    // inclusive bounds
    int uniform_int(int lo, int hi) {
        std::uniform_int_distribution<int> d(lo, hi);
        return d(gen_);
    }

    double normal(double mean, double stddev) {
        std::normal_distribution<double> d(mean, stddev);
        return d(gen_);
    }

    /// Derive an independent stream, e.g. per-iteration augmentation seeds.
    static uint64_t mix(uint64_t seed, uint64_t salt) {
        uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

 private:
    std::mt19937_64 gen_;
};

}  // namespace skel
