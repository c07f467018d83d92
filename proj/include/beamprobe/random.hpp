// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMPROBE_RANDOM_HPP
#define BEAMPROBE_RANDOM_HPP

#include <complex>
#include <cstdint>
#include <random>

namespace beamprobe {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent child streams.
inline std::uint64_t mix64(std::uint64_t z)
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Stream for item `index` under `seed`. Results depend only on the pair, never
// on the order in which streams are created.
inline Rng derive_stream(std::uint64_t seed, std::uint64_t index, std::uint64_t salt = 0)
{
    return Rng(mix64(mix64(seed ^ mix64(salt)) + index));
}

inline double standard_normal(Rng& rng)
{
    return std::normal_distribution<double>(0.0, 1.0)(rng);
}

inline double uniform(Rng& rng, double lo, double hi)
{
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Circularly-symmetric complex Gaussian with E|z|^2 = variance.
inline std::complex<double> complex_normal(Rng& rng, double variance)
{
    const double s = std::sqrt(variance / 2.0);
    const double re = standard_normal(rng);
    const double im = standard_normal(rng);
    return {s * re, s * im};
}

}  // namespace beamprobe

#endif  // BEAMPROBE_RANDOM_HPP
