#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "pgrad/measure.hpp"
#include "pgrad/trajectory.hpp"

namespace pgrad {

/// r = 1 - 1/L with L = mu_1 mu_{-1}.
inline double per_step_rate(const MomentVector& mv) {
    const double L = mv.mu1 * mv.mu_m1;
    return 1.0 - 1.0 / L;
}

/// V_n = [(W g_n, g_n) / (W g_0, g_0)]^{1/n} evaluated in log space.
/// Finite convergence reports rate 0.
inline double geometric_mean_rate(const TrajectoryRecord& rec, const PSpec& weight) {
    if (rec.steps.empty()) throw std::invalid_argument("geometric_mean_rate: empty trajectory");
    if (rec.reason == StopReason::FiniteConvergence) return 0.0;
    const std::size_t n = rec.steps.size() - 1;
    if (n == 0) throw std::invalid_argument("geometric_mean_rate: needs at least one step");
    const double log_ratio = rec.log_weighted_sq(weight, n) - rec.log_weighted_sq(weight, 0);
    return std::exp(log_ratio / static_cast<double>(n));
}

/// V_n at an intermediate index.
inline double geometric_mean_rate_at(const TrajectoryRecord& rec, const PSpec& weight,
                                     std::size_t n) {
    if (n == 0 || n >= rec.steps.size())
        throw std::invalid_argument("geometric_mean_rate_at: n out of range");
    const double log_ratio = rec.log_weighted_sq(weight, n) - rec.log_weighted_sq(weight, 0);
    return std::exp(log_ratio / static_cast<double>(n));
}

/// Asymptotic rate on the attractor: r(p) = p(1-p)(rho-1)^2 /
/// ([p + rho(1-p)] [(1-p) + rho p]).
inline double r_of_p(double p, double rho) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("r_of_p: p outside [0,1]");
    if (!(rho > 1.0)) throw std::invalid_argument("r_of_p: rho > 1 required");
    const double num = p * (1.0 - p) * (rho - 1.0) * (rho - 1.0);
    const double den = (p + rho * (1.0 - p)) * ((1.0 - p) + rho * p);
    return num / den;
}

struct RateBounds {
    double R_max = 0;       // ((rho-1)/(rho+1))^2, attained at p = 1/2
    double R_min_star = 0;  // rate at the edge of the stability interval
};

inline RateBounds rate_bounds(double rho) {
    if (!(rho > 1.0)) throw std::invalid_argument("rate_bounds: rho > 1 required");
    const double d = rho - 1.0, s = rho + 1.0;
    return {(d / s) * (d / s), d * d / (s * s + 4.0 * rho)};
}

/// Delta_N = log(R_max/R_min) / [log(R_max) log(R_min)]: spread of the
/// iteration count needed for a fixed precision across attractors.
inline double delta_N(double R_max, double R_min) {
    if (!(R_min > 0.0 && R_min <= R_max && R_max < 1.0))
        throw std::invalid_argument("delta_N: need 0 < R_min <= R_max < 1");
    return std::log(R_max / R_min) / (std::log(R_max) * std::log(R_min));
}

/// Limit of D_k on the attractor: D(p) = p(1-p)(M-m)^2.
inline double D_of_p(double p, double m, double M) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("D_of_p: p outside [0,1]");
    return p * (1.0 - p) * (M - m) * (M - m);
}

struct RateSummary {
    std::vector<double> r_sequence;
    double V_n = 0;
    double r_of_p = 0;
    double R_max = 0;
    double R_min_star = 0;
    double delta_N = 0;
};

}  // namespace pgrad
