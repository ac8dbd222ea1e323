#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "pgrad/measure.hpp"
#include "pgrad/pspec.hpp"
#include "pgrad/spectrum.hpp"

namespace pgrad {

struct RunConfig {
    std::int64_t max_iters = 1000;
    double gradient_stop = 0.0;
    double relaxation = 1.0;  // multiplies gamma_k; > 1 departs from Definition 1
    std::uint64_t seed = 0;

    void validate() const {
        if (max_iters < 1) throw std::invalid_argument("RunConfig: max_iters >= 1 required");
        if (!(gradient_stop >= 0.0))
            throw std::invalid_argument("RunConfig: gradient_stop >= 0 required");
        if (!(relaxation > 0.0) || !(relaxation <= 2.0))
            throw std::invalid_argument("RunConfig: relaxation must lie in (0, 2]");
    }
};

/// gamma_k = (P(A) A g, g) / (P(A) A^2 g, g); lies in [1/M, 1/m] and is
/// invariant under positive scaling of the P coefficients.
inline double step_length(const QuadraticProblem& p, const PSpec& ps, const Vec& g) {
    check_dim(p, g, "step_length");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double lam = p.spectrum.lambda(i);
        const double w = ps.evaluate(lam) * lam * g[i] * g[i];
        num += w;
        den += w * lam;
    }
    if (!(num > 0.0)) throw std::domain_error("step_length: zero gradient (converged)");
    return num / den;
}

enum class StopReason { GradientStop, MaxIters, FiniteConvergence, Diverged };

inline const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::GradientStop: return "gradient_stop";
        case StopReason::MaxIters: return "max_iters";
        case StopReason::FiniteConvergence: return "finite_convergence";
        case StopReason::Diverged: return "diverged";
    }
    return "?";
}

/// State at iterate k. The gradient is stored factored as
/// g_k = exp(log_gnorm) * unit_gradient so that multi-thousand-step runs do
/// not underflow; x_k and f(x_k) are reconstructed on demand.
struct TrajectoryStep {
    double gamma = 0;
    double log_gnorm = 0;
    Vec unit_gradient;
    MomentVector mu;
    double L = 0, D = 0, r = 0, detM = 0, detN = 0;
};

struct TrajectoryRecord {
    QuadraticProblem problem;
    PSpec pspec;
    RunConfig config;
    std::vector<TrajectoryStep> steps;
    StopReason reason = StopReason::MaxIters;
    std::int64_t divergence_step = -1;

    std::size_t iterations() const { return steps.size(); }

    double gradient_norm_at(std::size_t k) const { return std::exp(steps[k].log_gnorm); }

    Vec gradient_at(std::size_t k) const {
        Vec g = steps[k].unit_gradient;
        const double s = gradient_norm_at(k);
        for (double& v : g) v *= s;
        return g;
    }

    /// x_k = x* + A^{-1} g_k.
    Vec x_at(std::size_t k) const {
        Vec x = gradient_at(k);
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] = problem.x_star[i] + x[i] / problem.spectrum.lambda(i);
        return x;
    }

    /// log of f(x_k) - f(x*) = log( (A^{-1} g, g) / 2 ).
    double log_f_excess_at(std::size_t k) const {
        const TrajectoryStep& s = steps[k];
        double q = 0.0;
        for (std::size_t i = 0; i < s.unit_gradient.size(); ++i)
            q += s.unit_gradient[i] * s.unit_gradient[i] / problem.spectrum.lambda(i);
        return 2.0 * s.log_gnorm + std::log(0.5 * q);
    }

    double f_at(std::size_t k) const {
        return objective_minimum(problem) + std::exp(log_f_excess_at(k));
    }

    /// log (W g_k, g_k) for a positive Laurent weight W, in underflow-safe form.
    double log_weighted_sq(const PSpec& weight, std::size_t k) const {
        const TrajectoryStep& s = steps[k];
        double q = 0.0;
        for (std::size_t i = 0; i < s.unit_gradient.size(); ++i)
            q += weight.evaluate(problem.spectrum.lambda(i)) * s.unit_gradient[i] *
                 s.unit_gradient[i];
        return 2.0 * s.log_gnorm + std::log(q);
    }

    /// Measure of the renormalized variable at iterate k.
    SpectralMeasure measure_at(std::size_t k) const {
        return renormalize_gradient(problem, pspec, steps[k].unit_gradient);
    }
};

/// Runs the P-gradient iteration x_{k+1} = x_k - relaxation * gamma_k * g_k.
/// The update is carried in renormalized gradient form (unit direction plus
/// log magnitude), which is the same recursion in exact arithmetic.
inline TrajectoryRecord iterate(const QuadraticProblem& p, const PSpec& ps, const Vec& x0,
                                const RunConfig& config) {
    check_dim(p, x0, "iterate");
    config.validate();
    ps.validate_positive(p.spectrum);

    TrajectoryRecord rec{p, ps, config, {}, StopReason::MaxIters, -1};
    Vec g = gradient(p, x0);
    double gn = norm(g);
    if (gn == 0.0) {
        rec.reason = StopReason::FiniteConvergence;
        return rec;
    }
    Vec u(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) u[i] = g[i] / gn;
    double log_gnorm = std::log(gn);

    const double log_stop =
        config.gradient_stop > 0.0 ? std::log(config.gradient_stop) : -std::numeric_limits<double>::infinity();

    rec.steps.reserve(static_cast<std::size_t>(std::min<std::int64_t>(config.max_iters, 4096)));
    for (std::int64_t k = 0; k < config.max_iters; ++k) {
        TrajectoryStep step;
        step.unit_gradient = u;
        step.log_gnorm = log_gnorm;
        const SpectralMeasure nu = renormalize_gradient(p, ps, u);
        step.mu = moments(nu);
        const Diagnostics diag = diagnostics(nu);
        step.L = diag.L;
        step.D = diag.D;
        step.r = diag.r;
        step.detM = diag.detM;
        step.detN = diag.detN;
        step.gamma = 1.0 / step.mu.mu1;  // equals (P(A)Ag,g)/(P(A)A^2g,g)
        rec.steps.push_back(std::move(step));

        if (log_gnorm <= log_stop) {
            rec.reason = StopReason::GradientStop;
            return rec;
        }

        // g_{k+1} = (I - relaxation * gamma_k * A) g_k
        const double step_scale = config.relaxation * rec.steps.back().gamma;
        double wn2 = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            u[i] = (1.0 - step_scale * p.spectrum.lambda(i)) * u[i];
            wn2 += u[i] * u[i];
        }
        const double wn = std::sqrt(wn2);
        if (wn == 0.0) {
            rec.reason = StopReason::FiniteConvergence;
            return rec;
        }
        if (!std::isfinite(wn)) {
            rec.reason = StopReason::Diverged;
            rec.divergence_step = k;
            return rec;
        }
        for (double& v : u) v /= wn;
        log_gnorm += std::log(wn);
        if (!std::isfinite(log_gnorm)) {
            rec.reason = StopReason::Diverged;
            rec.divergence_step = k;
            return rec;
        }
    }
    rec.reason = StopReason::MaxIters;
    return rec;
}

/// Inverts the renormalization: picks the gradient realizing a given unit
/// z-vector (up to scale) and returns x = x* + A^{-1} g.
inline Vec x0_from_z(const QuadraticProblem& p, const PSpec& ps, const Vec& z) {
    check_dim(p, z, "x0_from_z");
    Vec x(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double lam = p.spectrum.lambda(i);
        const double g = z[i] / std::sqrt(ps.evaluate(lam) * lam);
        x[i] = p.x_star[i] + g / lam;
    }
    return x;
}

}  // namespace pgrad
