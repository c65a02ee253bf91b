#pragma once

#include <cstdint>
#include <string_view>

namespace corpusclean {

constexpr uint64_t mix64(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// FNV-1a over the bytes followed by a mixing finalizer. Stable across platforms.
constexpr uint64_t hash_bytes(std::string_view s, uint64_t seed = 0) {
    uint64_t h = 0xcbf29ce484222325ULL ^ mix64(seed);
    for (char c : s) {
        h ^= static_cast<uint8_t>(c);
        h *= 0x100000001b3ULL;
    }
    return mix64(h);
}

constexpr uint64_t hash_combine(uint64_t a, uint64_t b) {
    return mix64(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

/// Splittable 64-bit generator (SplitMix64).
class SplitMix64 {
public:
    explicit constexpr SplitMix64(uint64_t seed) : state_(seed) {}

    constexpr uint64_t next() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix64(state_);
    }

    constexpr SplitMix64 split() { return SplitMix64(next()); }

    /// Uniform in [0, 1).
    constexpr double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    uint64_t state_;
};

/// Uniform in [0, 1) as a pure function of (seed, key).
constexpr double keyed_uniform(uint64_t seed, uint64_t key) {
    return static_cast<double>(hash_combine(mix64(seed), mix64(key)) >> 11) * 0x1.0p-53;
}

}  // namespace corpusclean
