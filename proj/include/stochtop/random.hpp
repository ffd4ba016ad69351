#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "stochtop/errors.hpp"

namespace stochtop::detail {

// mt19937_64 has a standard-specified sequence; the value transforms below
// are spelled out so seeded streams reproduce across standard libraries
// (std::uniform_real_distribution and friends are implementation-defined).

inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

inline double standard_normal(std::mt19937_64& rng) {
    // Box-Muller; one draw per call keeps the stream position obvious.
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline double sign_unit(std::mt19937_64& rng) {
    return (rng() & 1ull) ? 1.0 : -1.0;
}

inline double truncated_normal(std::mt19937_64& rng, double mean, double sd,
                               double lo, double hi) {
    if (!(sd > 0.0)) throw ParameterError("truncated_normal: sd must be positive");
    if (!(lo < hi)) throw ParameterError("truncated_normal: empty interval");
    for (int tries = 0; tries < 100000; ++tries) {
        const double x = mean + sd * standard_normal(rng);
        if (x >= lo && x <= hi) return x;
    }
    throw ParameterError("truncated_normal: rejection sampling failed; interval too unlikely");
}

} // namespace stochtop::detail
