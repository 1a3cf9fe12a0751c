#pragma once

#include <cmath>
#include <cstdint>
#include <random>

// Deterministic randomness helpers. std::mt19937_64 is bit-exact across
// platforms by the standard, but the std distributions are not, so all
// draws go through the hand-rolled helpers below. Fixed seed => identical
// output everywhere, regardless of compiler or thread count.

namespace pnas {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used for seed derivation and stable hashing.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Derived stream seed: hash(master, stream). Independent streams per
// budget index / purpose keep parallel work deterministic.
inline std::uint64_t mix_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(splitmix64(master) ^ splitmix64(stream * 0x9e3779b97f4a7c15ull + 1));
}

// Uniform integer in [0, n). Modulo bias is < 2^-57 for the n used here.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return static_cast<std::size_t>(rng() % static_cast<std::uint64_t>(n));
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform_real(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller (cosine branch only; two draws per value).
inline double gaussian(Rng& rng) {
    double u1 = 0.0;
    do {
        u1 = uniform_real(rng);
    } while (u1 <= 0.0);
    const double u2 = uniform_real(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

} // namespace pnas
