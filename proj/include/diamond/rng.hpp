#pragma once

#include <cstdint>
#include <string_view>

#include "diamond/vec.hpp"

namespace diamond {

// Counter-based generator built on splitmix64. Each (key, counter) pair maps
// to an independent 64-bit word, so streams keyed by (scenario, seed) are
// reproducible regardless of call order or thread assignment.
struct CounterRng {
    std::uint64_t key = 0;
    std::uint64_t counter = 0;

    static std::uint64_t splitmix64(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static std::uint64_t hash_str(std::string_view s) {
        // FNV-1a
        std::uint64_t h = 1469598103934665603ULL;
        for (char c : s) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ULL;
        }
        return h;
    }

    static CounterRng keyed(std::string_view scenario, std::uint64_t seed) {
        CounterRng r;
        r.key = splitmix64(hash_str(scenario) ^ splitmix64(seed));
        return r;
    }

    std::uint64_t next_u64() { return splitmix64(key + 0x9e3779b97f4a7c15ULL * (++counter)); }

    // uniform in (0,1]
    double next_unit() {
        const std::uint64_t u = next_u64() >> 11;  // 53 bits
        return (static_cast<double>(u) + 1.0) * 0x1.0p-53;
    }

    // standard normal via Box-Muller (no cached spare; keeps the stream
    // position a pure function of the draw count)
    double next_gaussian() {
        const double u1 = next_unit();
        const double u2 = next_unit();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return r * std::cos(6.283185307179586476925286766559 * u2);
    }

    Vec gaussian_vec(std::size_t d) {
        Vec out(d);
        for (std::size_t i = 0; i < d; ++i) out[i] = next_gaussian();
        return out;
    }
};

}  // namespace diamond
