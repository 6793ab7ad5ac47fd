#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <sstream>
#include <string>
#include <string_view>

#include "voxnox/error.hpp"

namespace voxnox {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Stable stream derivation: same (seed, tag, indices) always gives the same
// child seed, independent of how many other streams exist.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag,
                                 std::initializer_list<std::uint64_t> indices = {}) {
    std::uint64_t h = splitmix64(seed);
    for (char c : tag)
        h = splitmix64(h ^ std::uint8_t(c));
    for (std::uint64_t i : indices)
        h = splitmix64(h ^ i);
    return h;
}

inline double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double gaussian(Rng& rng, double sigma) { return std::normal_distribution<double>(0.0, sigma)(rng); }

inline bool bernoulli(Rng& rng, double p) {
    if (p <= 0.0)
        return false;
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

// Uniform integer in [lo, hi].
inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

inline std::string rng_state(const Rng& rng) {
    std::ostringstream os;
    os << rng;
    return os.str();
}

inline Rng rng_from_state(const std::string& state) {
    Rng rng;
    std::istringstream is(state);
    is >> rng;
    if (!is)
        throw Error(ErrorCode::format, "malformed RNG state");
    return rng;
}

} // namespace voxnox
