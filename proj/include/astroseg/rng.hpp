#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace astroseg {

// All randomness in the library flows through these helpers. std::mt19937_64 is
// fully specified by the standard, and the draws below avoid std::*_distribution
// (whose output is implementation-defined), so identical seeds give identical
// streams on every platform.

inline double uniform01(std::mt19937_64& g) {
    return static_cast<double>(g() >> 11) * 0x1.0p-53; // 53 mantissa bits, [0, 1)
}

inline double uniform_range(std::mt19937_64& g, double lo, double hi) {
    return lo + (hi - lo) * uniform01(g);
}

inline std::uint64_t uniform_index(std::mt19937_64& g, std::uint64_t n) {
    return g() % n;
}

inline double gaussian(std::mt19937_64& g, double mean, double sigma) {
    // Box-Muller, one variate per call.
    double u1 = uniform01(g);
    double u2 = uniform01(g);
    while (u1 <= 0.0)
        u1 = uniform01(g);
    double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    return mean + sigma * z;
}

// Fisher-Yates; std::shuffle is not reproducible across standard libraries.
template <class T>
void deterministic_shuffle(std::vector<T>& v, std::mt19937_64& g) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(uniform_index(g, i));
        std::swap(v[i - 1], v[j]);
    }
}

} // namespace astroseg
