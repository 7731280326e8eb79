#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace qkd {

// splitmix64, used for seed derivation and small stateless noise streams.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t hash_combine(uint64_t seed, uint64_t v) {
    return splitmix64(seed ^ (v + 0x9e3779b97f4a7c15ULL));
}

inline uint64_t hash_str(uint64_t seed, std::string_view s) {
    uint64_t h = seed;
    for (char c : s) h = splitmix64(h ^ static_cast<uint8_t>(c));
    return h;
}

// Named sub-stream derivation so independent simulation stages never share
// RNG state.
inline uint64_t derive_seed(uint64_t seed, std::string_view stream, uint64_t index = 0) {
    return hash_combine(hash_str(seed, stream), index);
}

class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t bits64() { return engine_(); }

    // Uniform in [0,1).
    double uniform() { return (engine_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    double gaussian(double mean = 0.0, double sigma = 1.0) {
        std::normal_distribution<double> d(mean, sigma);
        return d(engine_);
    }

    double exponential(double mean) {
        std::exponential_distribution<double> d(1.0 / mean);
        return d(engine_);
    }

    // Uniform integer in [0, n).
    uint64_t below(uint64_t n) {
        std::uniform_int_distribution<uint64_t> d(0, n - 1);
        return d(engine_);
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

// Platform-stable Fisher-Yates (std::shuffle is implementation-defined,
// which would break cross-host reconciliation transcripts).
template <typename Vec>
void stable_shuffle(Vec& v, uint64_t seed) {
    uint64_t state = seed;
    for (size_t i = v.size(); i > 1; --i) {
        state = splitmix64(state);
        size_t j = static_cast<size_t>(state % i);
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace qkd
