#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pgrad/measure.hpp"

namespace pgrad {

struct AttractorEstimate {
    double p = 0;                  // even-iterate mass at the lower extreme
    double L_limit = 0;            // L at the final iterate
    double interior_residual = 0;  // mass away from the two extremes, final even iterate
    bool converged = false;
    bool finite_convergence = false;
    std::size_t transforms = 0;  // iterates examined beyond the initial measure
    double lambda_lo = 0, lambda_hi = 0;
    /// per-iterate (mass at lambda_lo, mass at lambda_hi)
    std::vector<std::pair<double, double>> projections;
};

inline constexpr double kDefaultInteriorThreshold = 1e-10;
inline constexpr double kLStabilityTolerance = 1e-12;

namespace detail {

/// Indices of the smallest and largest atoms carrying positive mass.
inline std::pair<std::size_t, std::size_t> effective_extremes(const SpectralMeasure& nu) {
    std::size_t lo = nu.size(), hi = nu.size();
    for (std::size_t i = 0; i < nu.size(); ++i) {
        if (nu.mass(i) > 0.0) {
            if (lo == nu.size()) lo = i;
            hi = i;
        }
    }
    if (lo == nu.size()) throw std::invalid_argument("effective_extremes: empty measure");
    return {lo, hi};
}

}  // namespace detail

/// Reads the two-point attractor off a transform orbit. The canonical p is the
/// mass at the lower effective extreme at even iterates (orbit[0] is iterate 0).
inline AttractorEstimate extract_p(std::span<const SpectralMeasure> orbit, double threshold) {
    if (orbit.empty()) throw std::invalid_argument("extract_p: empty orbit");
    const auto [lo, hi] = detail::effective_extremes(orbit.front());
    AttractorEstimate est;
    est.lambda_lo = orbit.front().lambda(lo);
    est.lambda_hi = orbit.front().lambda(hi);
    est.transforms = orbit.size() - 1;
    est.projections.reserve(orbit.size());
    for (const SpectralMeasure& nu : orbit)
        est.projections.emplace_back(nu.mass(lo), nu.mass(hi));

    const std::size_t last_even = (orbit.size() - 1) - ((orbit.size() - 1) % 2);
    const SpectralMeasure& fin = orbit[last_even];
    est.p = fin.mass(lo);
    est.interior_residual = std::max(0.0, 1.0 - fin.mass(lo) - fin.mass(hi));
    const MomentVector mv = moments(orbit.back());
    est.L_limit = mv.mu1 * mv.mu_m1;
    bool L_stable = false;
    if (orbit.size() >= 2) {
        const MomentVector prev = moments(orbit[orbit.size() - 2]);
        L_stable = std::abs(est.L_limit - prev.mu1 * prev.mu_m1) <= kLStabilityTolerance;
    }
    est.converged = est.interior_residual <= threshold && L_stable;
    return est;
}

/// Streams the transform orbit until the attractor has formed (interior mass
/// below threshold at an even iterate and L stabilized) or the budget runs out.
inline AttractorEstimate run_to_attractor(const SpectralMeasure& nu0, std::size_t max_transforms,
                                          double threshold = kDefaultInteriorThreshold) {
    const auto [lo, hi] = detail::effective_extremes(nu0);
    AttractorEstimate est;
    est.lambda_lo = nu0.lambda(lo);
    est.lambda_hi = nu0.lambda(hi);
    est.projections.reserve(max_transforms + 1);
    est.projections.emplace_back(nu0.mass(lo), nu0.mass(hi));

    SpectralMeasure nu = nu0;
    double L_prev = 0.0;
    double p_even = nu0.mass(lo);
    double interior_even = std::max(0.0, 1.0 - nu0.mass(lo) - nu0.mass(hi));
    {
        const MomentVector mv = moments(nu);
        est.L_limit = mv.mu1 * mv.mu_m1;
    }
    for (std::size_t k = 1; k <= max_transforms; ++k) {
        if (nu.is_degenerate() || !(nu.variance() > 0.0)) {
            est.finite_convergence = true;
            est.p = p_even;
            est.interior_residual = interior_even;
            return est;
        }
        nu = transform(nu);
        est.transforms = k;
        est.projections.emplace_back(nu.mass(lo), nu.mass(hi));
        L_prev = est.L_limit;
        const MomentVector mv = moments(nu);
        est.L_limit = mv.mu1 * mv.mu_m1;
        if (k % 2 == 0) {
            p_even = nu.mass(lo);
            interior_even = std::max(0.0, 1.0 - nu.mass(lo) - nu.mass(hi));
            if (interior_even <= threshold &&
                std::abs(est.L_limit - L_prev) <= kLStabilityTolerance) {
                est.converged = true;
                est.p = p_even;
                est.interior_residual = interior_even;
                return est;
            }
        }
    }
    est.p = p_even;
    est.interior_residual = interior_even;
    est.converged = false;
    return est;
}

/// Solves L = mu_1 mu_{-1} of a two-point measure for its mass split:
/// p = 1/2 +- ((rho+1)/(rho-1)) sqrt(1/4 - rho L / (rho+1)^2).
inline std::pair<double, double> p_from_L(double L, double rho) {
    if (!(rho > 1.0)) throw std::invalid_argument("p_from_L: rho > 1 required");
    const double L_star = (rho + 1.0) * (rho + 1.0) / (4.0 * rho);
    if (!(L >= 1.0 - 1e-12) || !(L <= L_star * (1.0 + 1e-12)))
        throw std::domain_error("p_from_L: L outside [1, (rho+1)^2/(4 rho)]");
    double disc = 0.25 - rho * L / ((rho + 1.0) * (rho + 1.0));
    if (disc < 0.0) {
        if (disc < -1e-14) throw std::domain_error("p_from_L: negative discriminant");
        disc = 0.0;
    }
    const double off = (rho + 1.0) / (rho - 1.0) * std::sqrt(disc);
    return {0.5 - off, 0.5 + off};
}

/// s(lambda) = sqrt((M-lambda)^2 + (lambda-m)^2) / (2 (M-m)).
inline double s_of_lambda(double lambda, double m, double M) {
    if (!(m < M)) throw std::invalid_argument("s_of_lambda: m < M required");
    if (!(lambda >= m && lambda <= M))
        throw std::domain_error("s_of_lambda: lambda outside [m, M]");
    const double a = M - lambda, b = lambda - m;
    return std::sqrt(a * a + b * b) / (2.0 * (M - m));
}

struct Interval {
    double lo = 0, hi = 0;
    bool empty() const { return !(lo < hi); }
    bool contains(double x) const { return x > lo && x < hi; }
};

struct StabilityReport {
    std::vector<std::pair<double, double>> s_values;  // (lambda, s(lambda))
    double lambda_star = 0;                           // argmin of s over the spectrum
    double s_star = 0;                                // min of s
    Interval I_s;                                     // stable p interval
    Interval I_u_left, I_u_right;                     // unstable complement in (0,1)
};

/// Stability partition of (0,1) for a given spectrum (must contain m and M).
inline StabilityReport stability_intervals(const std::vector<double>& spectrum_points, double m,
                                           double M) {
    if (spectrum_points.empty())
        throw std::invalid_argument("stability_intervals: empty spectrum");
    bool has_m = false, has_M = false;
    StabilityReport rep;
    rep.s_star = std::numeric_limits<double>::infinity();
    for (double lam : spectrum_points) {
        if (lam == m) has_m = true;
        if (lam == M) has_M = true;
        const double s = s_of_lambda(lam, m, M);
        rep.s_values.emplace_back(lam, s);
        if (s < rep.s_star) {
            rep.s_star = s;
            rep.lambda_star = lam;
        }
    }
    if (!has_m || !has_M)
        throw std::invalid_argument("stability_intervals: spectrum must contain m and M");
    rep.I_s = {0.5 - rep.s_star, 0.5 + rep.s_star};
    rep.I_u_left = {0.0, std::max(0.0, 0.5 - rep.s_star)};
    rep.I_u_right = {std::min(1.0, 0.5 + rep.s_star), 1.0};
    return rep;
}

/// H(nu_p*, lambda): per-double-step multiplier of interior mass at the fixed
/// point; equals 1 at both extremes.
inline double H_fixed_point(double p, double lambda, double m, double M) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("H_fixed_point: p must lie in (0,1)");
    if (!(lambda >= m && lambda <= M))
        throw std::domain_error("H_fixed_point: lambda outside [m, M]");
    const double b1 = M * (1.0 - p) + m * p - lambda;
    const double b2 = M * p + m * (1.0 - p) - lambda;
    const double mm = (M - m) * (M - m);
    return (b1 * b1) * (b2 * b2) / (p * p * (1.0 - p) * (1.0 - p) * mm * mm);
}

/// Attractor density model for a three-point spectrum {m, lambda, M}:
/// phi(p) proportional to |log min(1, H(nu_p*, lambda))|, normalized over (0,1).
class PhiDensity {
public:
    PhiDensity(double m, double interior_lambda, double M, std::size_t cells = 200000)
        : m_(m), lambda_(interior_lambda), M_(M) {
        if (!(m < interior_lambda && interior_lambda < M))
            throw std::invalid_argument("PhiDensity: need m < lambda < M");
        // midpoint rule; the integrand has integrable log singularities
        const double h = 1.0 / static_cast<double>(cells);
        double sum = 0.0;
        for (std::size_t i = 0; i < cells; ++i)
            sum += unnormalized(h * (static_cast<double>(i) + 0.5));
        norm_ = 1.0 / (sum * h);
    }

    double unnormalized(double p) const {
        if (!(p > 0.0 && p < 1.0)) return 0.0;
        const double H = H_fixed_point(p, lambda_, m_, M_);
        return std::abs(std::log(std::min(1.0, H)));
    }

    double operator()(double p) const { return norm_ * unnormalized(p); }

    double normalization() const { return norm_; }

private:
    double m_, lambda_, M_;
    double norm_ = 1.0;
};

/// Perturbs nu_p* by borrowing mass alpha from the upper extreme, spread over
/// the interior atoms, and iterates T^2. Returns the interior mass at each
/// double-step (element 0 is the starting mass alpha).
inline std::vector<double> stability_probe(double p, const std::vector<double>& interior_atoms,
                                           double alpha, std::size_t n_steps, double m, double M) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("stability_probe: p outside (0,1)");
    if (interior_atoms.empty())
        throw std::invalid_argument("stability_probe: no interior atoms");
    for (double lam : interior_atoms)
        if (!(lam > m && lam < M))
            throw std::invalid_argument("stability_probe: interior atoms must lie in (m, M)");
    if (!(alpha >= 0.0) || alpha >= std::min(p, 1.0 - p))
        throw std::invalid_argument("stability_probe: alpha outside [0, min(p, 1-p))");

    std::vector<Atom> atoms;
    atoms.push_back({m, p});
    for (double lam : interior_atoms)
        atoms.push_back({lam, alpha / static_cast<double>(interior_atoms.size())});
    atoms.push_back({M, 1.0 - p - alpha});
    SpectralMeasure nu = SpectralMeasure::from_atoms(std::move(atoms));

    auto interior_mass = [&](const SpectralMeasure& v) {
        double s = 0.0;
        for (std::size_t i = 1; i + 1 < v.size(); ++i) s += v.mass(i);
        return s;
    };

    std::vector<double> trace;
    trace.reserve(n_steps + 1);
    trace.push_back(interior_mass(nu));
    for (std::size_t k = 0; k < n_steps; ++k) {
        if (nu.is_degenerate() || !(nu.variance() > 0.0)) break;
        nu = transform(nu);
        if (nu.is_degenerate() || !(nu.variance() > 0.0)) break;
        nu = transform(nu);
        trace.push_back(interior_mass(nu));
    }
    return trace;
}

/// Levy distance between nu and the two-point measure nu_p*, specialized to
/// cumulative-mass scans over the atoms.
inline double levy_distance_to_two_point(const SpectralMeasure& nu, double p, double m, double M) {
    auto satisfied = [&](double eps) {
        // F(x) <= p + eps for x < M - eps  and  F(x) >= p - eps for x >= m + eps
        double F = 0.0;
        double F_before_upper = 0.0;  // F just below M - eps
        for (std::size_t i = 0; i < nu.size(); ++i) {
            if (nu.lambda(i) < M - eps) F_before_upper += nu.mass(i);
        }
        if (F_before_upper > p + eps) return false;
        // smallest F value attained at x >= m + eps is F(m + eps)
        F = 0.0;
        for (std::size_t i = 0; i < nu.size(); ++i)
            if (nu.lambda(i) <= m + eps) F += nu.mass(i);
        return F >= p - eps;
    };
    double lo = 0.0, hi = std::max(1.0, M - m);
    if (satisfied(0.0)) return 0.0;
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (satisfied(mid))
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

}  // namespace pgrad
