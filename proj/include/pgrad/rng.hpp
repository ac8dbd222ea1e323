#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace pgrad {

/// SplitMix64 output function.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Splittable generator: each (seed, stream) pair gives an independent
/// substream, so trial results do not depend on scheduling.
class TrialRng {
public:
    TrialRng(std::uint64_t seed, std::uint64_t stream)
        : state_(mix64(mix64(seed) ^ (0xD1B54A32D192ED03ull * (stream + 1)))) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        std::uint64_t x = state_;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
        return x ^ (x >> 31);
    }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform on [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (fixed draw count).
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Uniform direction on the unit sphere in R^d.
    std::vector<double> unit_sphere(std::size_t d) {
        std::vector<double> z(d);
        double n2 = 0.0;
        do {
            n2 = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                z[i] = gaussian();
                n2 += z[i] * z[i];
            }
        } while (!(n2 > 0.0));
        const double inv = 1.0 / std::sqrt(n2);
        for (double& v : z) v *= inv;
        return z;
    }

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace pgrad
