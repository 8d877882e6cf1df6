#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>

namespace polar {

/// SplitMix64 finalizer; used to derive independent sub-stream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Folds a sequence of keys into a seed. Order matters.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys) {
    std::uint64_t s = mix64(base);
    for (auto k : keys) s = mix64(s ^ mix64(k + 0x632be59bd9b4e019ULL));
    return s;
}

/// Seeded random stream. Every stochastic operation in the library takes one
/// of these explicitly; parallel work derives sub-streams with `child`.
///
/// The variate generators below are written out rather than taken from
/// <random> distributions so that draws are identical across standard
/// library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const { return seed_; }

    /// Independent stream keyed by `keys`; does not advance this stream.
    Rng child(std::initializer_list<std::uint64_t> keys) const { return Rng(derive_seed(seed_, keys)); }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer on [0, n).
    int uniform_int(int n) { return static_cast<int>(uniform() * n); }

    /// Standard normal by Box-Muller (no cached second variate).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Beta(2,2) by inverting F(z) = 3z^2 - 2z^3 in closed form.
    double beta22() {
        const double u = uniform();
        const double theta = (std::acos(1.0 - 2.0 * u) + 4.0 * std::numbers::pi) / 3.0;
        return 0.5 + std::cos(theta);
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace polar
