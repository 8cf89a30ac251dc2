#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace ppf {

/// Stable 64-bit FNV-1a. Used wherever a digest must be identical across
/// runs, platforms and standard library implementations.
constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

constexpr std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = kFnvOffset)
{
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

inline std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v)
{
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xffu;
        h *= kFnvPrime;
    }
    return h;
}

std::string to_hex(std::uint64_t v);

}
