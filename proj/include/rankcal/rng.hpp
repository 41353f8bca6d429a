#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace rankcal {

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Counter-based substream seed: a pure function of the master seed and a
/// path of stream indices, so parallel work is reproducible regardless of
/// scheduling.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = splitmix64(master);
    for (std::uint64_t id : path) s = splitmix64(s ^ splitmix64(id + 0x632BE59BD9B4E019ULL));
    return s;
}

inline Engine make_engine(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    return Engine(derive_seed(master, path));
}

}  // namespace rankcal
