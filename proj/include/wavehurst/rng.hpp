#pragma once

#include <bit>
#include <cstdint>
#include <initializer_list>

namespace wavehurst {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derives an independent child seed from a parent seed and a list of keys.
/// The child depends only on its arguments, so any replicate can be
/// regenerated in isolation.
constexpr std::uint64_t derive_seed(std::uint64_t parent,
                                    std::initializer_list<std::uint64_t> keys) noexcept {
    std::uint64_t s = mix64(parent);
    for (auto k : keys) s = mix64(s ^ mix64(k + 0x632be59bd9b4e019ULL));
    return s;
}

inline std::uint64_t key_of(double v) noexcept { return std::bit_cast<std::uint64_t>(v); }

/// Stream tags for derive_seed.
enum class Stream : std::uint64_t { Path = 1, Noise = 2 };

}  // namespace wavehurst
