#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "pgrad/spectrum.hpp"

namespace pgrad {

enum class PLabel { SteepestDescent, MinimalResidues, PowerQ, Custom };

inline const char* to_string(PLabel l) {
    switch (l) {
        case PLabel::SteepestDescent: return "steepest_descent";
        case PLabel::MinimalResidues: return "minimal_residues";
        case PLabel::PowerQ: return "power_q";
        case PLabel::Custom: return "custom";
    }
    return "?";
}

/// Finitely supported Laurent polynomial P(a) = sum_k c_k a^k selecting the
/// algorithm in the family. Must be positive on the spectral interval.
struct PSpec {
    std::map<int, double> coefficients;
    PLabel label = PLabel::Custom;

    static PSpec steepest_descent() { return PSpec{{{-1, 1.0}}, PLabel::SteepestDescent}; }
    static PSpec minimal_residues() { return PSpec{{{0, 1.0}}, PLabel::MinimalResidues}; }
    static PSpec power(int q) {
        if (q == -1) return steepest_descent();
        if (q == 0) return minimal_residues();
        return PSpec{{{q, 1.0}}, PLabel::PowerQ};
    }
    static PSpec custom(std::map<int, double> coeffs) {
        if (coeffs.empty()) throw std::invalid_argument("PSpec: empty coefficient table");
        return PSpec{std::move(coeffs), PLabel::Custom};
    }

    double evaluate(double a) const {
        double s = 0.0;
        for (const auto& [k, c] : coefficients) s += c * int_pow(a, k);
        return s;
    }

    /// Largest exponent with nonzero coefficient (polynomial degree when min_exponent() >= 0).
    int max_exponent() const {
        int q = coefficients.begin()->first;
        for (const auto& [k, c] : coefficients)
            if (c != 0.0) q = std::max(q, k);
        return q;
    }

    int min_exponent() const {
        int q = coefficients.rbegin()->first;
        for (const auto& [k, c] : coefficients)
            if (c != 0.0) q = std::min(q, k);
        return q;
    }

    /// Grid check of 0 < P(a) < inf over [m, M]; throws on violation.
    void validate_positive(const Spectrum& s, std::size_t grid_points = 10000) const {
        const double m = s.m(), M = s.M();
        const double h = (M - m) / static_cast<double>(grid_points - 1);
        for (std::size_t i = 0; i < grid_points; ++i) {
            const double a = (i + 1 == grid_points) ? M : m + h * static_cast<double>(i);
            const double v = evaluate(a);
            if (!(v > 0.0) || !std::isfinite(v))
                throw std::domain_error("PSpec: P is not positive on the spectral interval");
        }
    }
};

}  // namespace pgrad
