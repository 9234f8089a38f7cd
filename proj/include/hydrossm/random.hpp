#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace hydrossm {

/// splitmix64 step; used to derive independent stream seeds from one root seed.
inline std::uint64_t split_seed(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Deterministic generator wrapper; all stochastic choices in the project
/// draw through this so runs are reproducible per seed.
class Rng {
    std::mt19937_64 engine_;

public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::mt19937_64& engine() { return engine_; }

    double uniform(double lo, double hi) {
        const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;  // [0,1)
        return lo + u * (hi - lo);
    }

    /// Box-Muller without cached state, so interleaved draws stay reproducible.
    double normal() {
        double u1 = uniform(0.0, 1.0);
        while (u1 <= 0.0) u1 = uniform(0.0, 1.0);
        const double u2 = uniform(0.0, 1.0);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    double log_uniform(double lo, double hi) {
        return std::exp(uniform(std::log(lo), std::log(hi)));
    }

    bool bernoulli(double p) { return uniform(0.0, 1.0) < p; }

    std::uint64_t next_u64() { return engine_(); }

    /// Fisher-Yates shuffle.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = engine_() % i;
            std::swap(v[i - 1], v[j]);
        }
    }
};

}  // namespace hydrossm
