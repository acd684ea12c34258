/**
 * @file seed.hpp
 * @brief Stable seed derivation from a top-level seed
 */
#pragma once

#include <cstdint>
#include <string_view>

namespace emu {

/// splitmix64 finaliser applied to seed + golden-ratio multiple of index.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Seed for a named pipeline component, e.g. "train/g0-c0/gru_J3h128_K3w128_lag14".
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view path) {
    std::uint64_t h = 0xcbf29ce484222325ULL; // FNV-1a 64
    for (unsigned char c : path) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return derive_seed(seed, h);
}

} // namespace emu
