#pragma once

// Deterministic seed derivation: every random stream in the program is keyed
// by the root seed plus a task label and index through splitmix64, so
// parallel and serial execution draw identical numbers.

#include <cstdint>
#include <random>
#include <string_view>

namespace ghzsim {

constexpr uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr uint64_t fnv1a(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline uint64_t derive_seed(uint64_t root, std::string_view task, uint64_t index = 0) {
    return splitmix64(splitmix64(root ^ fnv1a(task)) ^ index);
}

inline std::mt19937_64 make_engine(uint64_t root, std::string_view task,
                                   uint64_t index = 0) {
    return std::mt19937_64(derive_seed(root, task, index));
}

}  // namespace ghzsim
