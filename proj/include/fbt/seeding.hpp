#pragma once

#include <cstdint>
#include <initializer_list>

namespace fbt {

/// SplitMix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-based child seed. For a fixed `master`, distinct (k0, k1) pairs map to distinct seeds
/// whenever k1 fits in 32 bits; single-key derivation is injective outright.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> keys) {
    std::uint64_t packed = 0;
    for (std::uint64_t k : keys) packed = (packed << 32) ^ k;
    return mix64(master ^ mix64(packed + keys.size()));
}

}  // namespace fbt
