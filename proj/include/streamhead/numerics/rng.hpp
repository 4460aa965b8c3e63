#pragma once

#include "streamhead/numerics/array.hpp"

#include <cstdint>
#include <random>

namespace streamhead::numerics {

// Seeded generator used everywhere randomness is needed; identical seeds replay identical draws.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
    // inclusive range
    std::size_t uniform_index(std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(engine_);
    }
    bool bernoulli(double p) { return uniform() < p; }
    std::uint64_t next_u64() { return engine_(); }

    Array normal_array(Shape shape) {
        Array a(std::move(shape));
        for (double & v : a.data()) v = normal();
        return a;
    }

private:
    std::mt19937_64 engine_;
};

} // namespace streamhead::numerics
