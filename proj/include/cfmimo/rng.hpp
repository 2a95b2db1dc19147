#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

#include "cfmimo/complexmat.hpp"

namespace cfmimo {

/// splitmix64 step (Vigna). Used both as a stream generator and as the
/// mixer that derives per-(drop, realization, UE, AP) substream seeds, so
/// any realization is reproducible without replaying earlier draws.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Collapses a list of identifiers into one substream seed.
inline std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t s = 0x243f6a8885a308d3ULL; // pi fractional bits
    for (std::uint64_t p : parts) {
        s ^= p + 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2);
        std::uint64_t t = s;
        s = splitmix64(t);
    }
    return s;
}

/// Counter-style PRNG with O(1) seeding. Normal variates come from an
/// explicit Box-Muller transform so the draw sequence does not depend on
/// the standard library's distribution internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform on [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        // Rejection-free multiply-shift; bias is < 2^-64 * n, irrelevant here.
        return static_cast<std::uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
    }

    /// Pair of independent N(0, 1) reals.
    void gaussian_pair(double& z0, double& z1) {
        // u1 in (0, 1] so the log is finite.
        const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double th = 2.0 * std::numbers::pi * u2;
        z0 = r * std::cos(th);
        z1 = r * std::sin(th);
    }

    /// Standard circularly-symmetric complex Gaussian, E|z|^2 = 1.
    cxd cgaussian() {
        double a, b;
        gaussian_pair(a, b);
        return {a * M_SQRT1_2, b * M_SQRT1_2};
    }

    /// Fills v with i.i.d. N_C(0, 1) entries.
    void fill_cgaussian(CVector& v) {
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = cgaussian();
    }

private:
    std::uint64_t state_;
};

} // namespace cfmimo
