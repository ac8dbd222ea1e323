#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "pgrad/attractor.hpp"
#include "pgrad/config.hpp"
#include "pgrad/csv.hpp"
#include "pgrad/measure.hpp"
#include "pgrad/rates.hpp"
#include "pgrad/rng.hpp"
#include "pgrad/trajectory.hpp"
#include "pgrad/version.hpp"

namespace pgrad::experiments {

/// Runs fn(trial) for trial = 0..trials-1 on a worker pool. Results land in
/// trial order, so output does not depend on the worker count.
template <typename T, typename Fn>
std::vector<T> parallel_trials(std::size_t trials, std::size_t workers, Fn&& fn) {
    std::vector<T> out(trials);
    if (workers <= 1) {
        for (std::size_t i = 0; i < trials; ++i) out[i] = fn(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= trials) return;
                out[i] = fn(i);
            }
        });
    }
    for (auto& t : pool) t.join();
    return out;
}

inline PSpec pspec_from_config(const KeyValueConfig& cfg) {
    const std::string label = cfg.get_string("pspec", "steepest_descent");
    if (label == "steepest_descent") return PSpec::steepest_descent();
    if (label == "minimal_residues") return PSpec::minimal_residues();
    if (label.rfind("power(", 0) == 0 && label.back() == ')') {
        const int q = static_cast<int>(std::stol(label.substr(6, label.size() - 7)));
        return PSpec::power(q);
    }
    if (label == "custom") {
        const std::vector<double> exps = cfg.get_array("pspec_exponents");
        const std::vector<double> coefs = cfg.get_array("pspec_coefficients");
        if (exps.size() != coefs.size() || exps.empty())
            throw std::runtime_error("config: pspec_exponents/pspec_coefficients mismatch");
        std::map<int, double> m;
        for (std::size_t i = 0; i < exps.size(); ++i)
            m[static_cast<int>(exps[i])] = coefs[i];
        return PSpec::custom(std::move(m));
    }
    throw std::runtime_error("config: unknown pspec '" + label + "'");
}

inline QuadraticProblem problem_from_config(const KeyValueConfig& cfg) {
    const std::vector<double> eig = cfg.get_array("eigenvalues");
    std::vector<double> xs = cfg.get_array("x_star", std::vector<double>(eig.size(), 0.0));
    return {Spectrum(eig), std::move(xs)};
}

inline RunConfig run_config_from_config(const KeyValueConfig& cfg) {
    RunConfig rc;
    rc.max_iters = cfg.get_int("max_iters", 1000);
    rc.gradient_stop = cfg.get_double("gradient_stop", 0.0);
    rc.relaxation = cfg.get_double("relaxation", 1.0);
    rc.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
    rc.validate();
    return rc;
}

inline void write_sidecar(const std::filesystem::path& outdir, const std::string& experiment,
                          const KeyValueConfig& cfg) {
    nlohmann::json j;
    j["experiment"] = experiment;
    j["version"] = PGRAD_VERSION;
    j["seed"] = cfg.get_int("seed", 0);
    nlohmann::json raw = nlohmann::json::object();
    for (const auto& [k, v] : cfg.entries()) raw[k] = v;
    j["config"] = raw;
    std::ofstream out(outdir / (experiment + "_run.json"), std::ios::binary);
    out << j.dump(2) << '\n';
}

struct Histogram {
    std::vector<double> edges;   // bins + 1 edges over (0, 1)
    std::vector<std::size_t> counts;
    std::vector<double> density;  // counts / (total * width)

    explicit Histogram(std::size_t bins = 100) : edges(bins + 1), counts(bins, 0) {
        for (std::size_t i = 0; i <= bins; ++i)
            edges[i] = static_cast<double>(i) / static_cast<double>(bins);
    }

    void add(double p) {
        if (!(p >= 0.0 && p <= 1.0)) return;
        std::size_t b = static_cast<std::size_t>(p * static_cast<double>(counts.size()));
        if (b >= counts.size()) b = counts.size() - 1;
        ++counts[b];
    }

    void finalize() {
        std::size_t total = 0;
        for (std::size_t c : counts) total += c;
        density.assign(counts.size(), 0.0);
        if (total == 0) return;
        for (std::size_t i = 0; i < counts.size(); ++i) {
            const double width = edges[i + 1] - edges[i];
            density[i] = static_cast<double>(counts[i]) / (static_cast<double>(total) * width);
        }
    }
};

// ---------------------------------------------------------------------------
// density: Monte-Carlo density of attractor parameters for a d = 3 spectrum
// ---------------------------------------------------------------------------

struct DensityTrial {
    double p = 0;
    bool converged = false;
    bool finite_convergence = false;
};

struct DensityResult {
    Histogram hist{100};
    std::vector<std::pair<double, double>> phi_samples;
    std::vector<DensityTrial> trials;
    std::size_t converged = 0, finite_convergence = 0, non_converged = 0;
    double fraction_outside_Is = 0;
    Interval I_s;
    double lambda_star = 0;
};

inline DensityResult run_density(const QuadraticProblem& problem, const PSpec& pspec,
                                 std::size_t trials, std::uint64_t seed, std::size_t workers,
                                 std::size_t max_transforms = 4000,
                                 double threshold = kDefaultInteriorThreshold,
                                 std::size_t bins = 100, std::size_t phi_points = 1001) {
    if (problem.dim() != 3)
        throw std::invalid_argument("run_density: a d = 3 spectrum is required");
    pspec.validate_positive(problem.spectrum);

    const double m = problem.spectrum.m(), M = problem.spectrum.M();
    const double lam_mid = problem.spectrum.lambda(1);

    DensityResult res;
    res.hist = Histogram(bins);
    const StabilityReport rep = stability_intervals(problem.spectrum.eigenvalues(), m, M);
    res.I_s = rep.I_s;
    res.lambda_star = rep.lambda_star;

    res.trials = parallel_trials<DensityTrial>(trials, workers, [&](std::size_t t) {
        TrialRng rng(seed, t);
        const Vec z = rng.unit_sphere(3);
        DensityTrial out;
        try {
            const Vec x0 = x0_from_z(problem, pspec, z);
            const SpectralMeasure nu0 = renormalize(problem, pspec, x0);
            const AttractorEstimate est = run_to_attractor(nu0, max_transforms, threshold);
            out.p = est.p;
            out.converged = est.converged;
            out.finite_convergence = est.finite_convergence;
        } catch (const std::domain_error&) {
            out.finite_convergence = true;  // z_0 missed every direction but one
        }
        return out;
    });

    std::size_t with_p = 0, outside = 0;
    for (const DensityTrial& t : res.trials) {
        if (t.finite_convergence) {
            ++res.finite_convergence;
            continue;
        }
        if (t.converged)
            ++res.converged;
        else
            ++res.non_converged;
        ++with_p;
        if (t.converged) res.hist.add(t.p);
        if (!res.I_s.contains(t.p)) ++outside;
    }
    res.hist.finalize();
    res.fraction_outside_Is = with_p ? static_cast<double>(outside) / static_cast<double>(with_p)
                                     : 0.0;

    const PhiDensity phi(m, lam_mid, M);
    res.phi_samples.reserve(phi_points);
    for (std::size_t i = 0; i < phi_points; ++i) {
        const double p = static_cast<double>(i) / static_cast<double>(phi_points - 1);
        res.phi_samples.emplace_back(p, (p <= 0.0 || p >= 1.0) ? 0.0 : phi(p));
    }
    return res;
}

inline void write_density(const DensityResult& res, const std::filesystem::path& outdir) {
    {
        CsvWriter w((outdir / "histogram.csv").string());
        w.header({"bin_lo", "bin_hi", "count", "density"});
        for (std::size_t i = 0; i < res.hist.counts.size(); ++i)
            w.row({res.hist.edges[i], res.hist.edges[i + 1],
                   static_cast<double>(res.hist.counts[i]), res.hist.density[i]});
    }
    {
        CsvWriter w((outdir / "phi.csv").string());
        w.header({"p", "phi"});
        for (const auto& [p, v] : res.phi_samples) w.row({p, v});
    }
    {
        nlohmann::json j;
        j["trials"] = res.trials.size();
        j["converged"] = res.converged;
        j["finite_convergence"] = res.finite_convergence;
        j["non_converged"] = res.non_converged;
        j["fraction_outside_Is"] = res.fraction_outside_Is;
        j["I_s"] = {res.I_s.lo, res.I_s.hi};
        std::ofstream out(outdir / "density_report.json", std::ios::binary);
        out << j.dump(2) << '\n';
    }
}

// ---------------------------------------------------------------------------
// rate-curves and rate-range: closed-form figure data
// ---------------------------------------------------------------------------

inline void write_rate_curves(const std::vector<double>& rho_list,
                              const std::filesystem::path& outdir,
                              std::size_t grid_points = 1001) {
    for (double rho : rho_list) {
        char name[64];
        std::snprintf(name, sizeof(name), "rate_curve_rho_%g.csv", rho);
        CsvWriter w((outdir / name).string());
        w.header({"p", "r"});
        for (std::size_t i = 0; i < grid_points; ++i) {
            const double p = static_cast<double>(i) / static_cast<double>(grid_points - 1);
            w.row({p, r_of_p(p, rho)});
        }
    }
}

inline void write_rate_range(const std::filesystem::path& outdir,
                             std::size_t grid_points = 999) {
    CsvWriter w((outdir / "rate_range.csv").string());
    w.header({"inv_rho", "R_min_star", "R_max"});
    for (std::size_t j = 1; j <= grid_points; ++j) {
        const double inv_rho = static_cast<double>(j) / static_cast<double>(grid_points + 1);
        const RateBounds rb = rate_bounds(1.0 / inv_rho);
        w.row({inv_rho, rb.R_min_star, rb.R_max});
    }
}

// ---------------------------------------------------------------------------
// trajectory: one end-to-end run with on-the-fly invariant checks
// ---------------------------------------------------------------------------

struct InvariantViolations {
    std::size_t gamma_bounds = 0;
    std::size_t L_monotone = 0, D_monotone = 0, r_monotone = 0;
    std::size_t det_nonneg = 0;
    std::size_t det_identity = 0;
    std::size_t total() const {
        return gamma_bounds + L_monotone + D_monotone + r_monotone + det_nonneg + det_identity;
    }
};

inline InvariantViolations check_trajectory_invariants(const TrajectoryRecord& rec) {
    InvariantViolations v;
    const double m = rec.problem.spectrum.m(), M = rec.problem.spectrum.M();
    const bool relaxed = rec.config.relaxation != 1.0;
    for (std::size_t k = 0; k < rec.steps.size(); ++k) {
        const TrajectoryStep& s = rec.steps[k];
        if (!relaxed && !(s.gamma >= 1.0 / M - 1e-12 && s.gamma <= 1.0 / m + 1e-12))
            ++v.gamma_bounds;
        if (s.detM < -1e-12 * std::max(1.0, std::abs(s.detM))) ++v.det_nonneg;
        if (s.detN < -1e-12 * std::max(1.0, std::abs(s.detN))) ++v.det_nonneg;
        if (k == 0 || relaxed) continue;
        const TrajectoryStep& prev = rec.steps[k - 1];
        if (s.L < prev.L - 1e-12) ++v.L_monotone;
        if (s.D < prev.D - 1e-12) ++v.D_monotone;
        if (s.r < prev.r - 1e-12) ++v.r_monotone;
        const double rhs = (s.L - prev.L) * prev.D * prev.D / prev.mu.mu1;
        if (std::abs(prev.detM - rhs) > 1e-10 * std::max(1.0, std::abs(prev.detM)))
            ++v.det_identity;
    }
    return v;
}

struct TrajectoryResult {
    TrajectoryRecord record;
    InvariantViolations violations;
    AttractorEstimate attractor;
    RateSummary rates;
};

inline TrajectoryResult run_trajectory(const QuadraticProblem& problem, const PSpec& pspec,
                                       const Vec& x0, const RunConfig& rc,
                                       double threshold = kDefaultInteriorThreshold) {
    TrajectoryResult out{iterate(problem, pspec, x0, rc), {}, {}, {}};
    out.violations = check_trajectory_invariants(out.record);

    if (!out.record.steps.empty()) {
        std::vector<SpectralMeasure> orbit;
        orbit.reserve(out.record.steps.size());
        for (std::size_t k = 0; k < out.record.steps.size(); ++k)
            orbit.push_back(out.record.measure_at(k));
        out.attractor = extract_p(orbit, threshold);
        out.attractor.finite_convergence = out.record.reason == StopReason::FiniteConvergence;

        out.rates.r_sequence.reserve(out.record.steps.size());
        for (const TrajectoryStep& s : out.record.steps) out.rates.r_sequence.push_back(s.r);
        const double rho = condition_number(problem);
        const RateBounds rb = rate_bounds(rho);
        out.rates.R_max = rb.R_max;
        out.rates.R_min_star = rb.R_min_star;
        out.rates.delta_N = delta_N(rb.R_max, rb.R_min_star);
        out.rates.r_of_p = r_of_p(std::min(std::max(out.attractor.p, 0.0), 1.0), rho);
        out.rates.V_n = (out.record.steps.size() > 1 ||
                         out.record.reason == StopReason::FiniteConvergence)
                            ? geometric_mean_rate(out.record, pspec)
                            : 0.0;
    }
    return out;
}

inline void write_trajectory(const TrajectoryResult& res, const std::filesystem::path& outdir) {
    {
        CsvWriter w((outdir / "trajectory.csv").string());
        w.header({"k", "gamma", "log_gnorm", "log_f_excess", "mu_m1", "mu_1", "mu_2", "mu_3",
                  "mu_4", "L", "D", "r", "detM", "detN"});
        for (std::size_t k = 0; k < res.record.steps.size(); ++k) {
            const TrajectoryStep& s = res.record.steps[k];
            w.row({static_cast<double>(k), s.gamma, s.log_gnorm, res.record.log_f_excess_at(k),
                   s.mu.mu_m1, s.mu.mu1, s.mu.mu2, s.mu.mu3, s.mu.mu4, s.L, s.D, s.r, s.detM,
                   s.detN});
        }
    }
    {
        nlohmann::json j;
        j["stop_reason"] = to_string(res.record.reason);
        j["pspec"] = {{"label", to_string(res.record.pspec.label)},
                      {"coefficients", nlohmann::json::object()}};
        for (const auto& [k, c] : res.record.pspec.coefficients)
            j["pspec"]["coefficients"][std::to_string(k)] = c;
        j["relaxation"] = res.record.config.relaxation;
        j["iterations"] = res.record.steps.size();
        j["p"] = res.attractor.p;
        j["L_limit"] = res.attractor.L_limit;
        j["interior_residual"] = res.attractor.interior_residual;
        j["attractor_converged"] = res.attractor.converged;
        j["V_n"] = res.rates.V_n;
        j["r_of_p"] = res.rates.r_of_p;
        j["R_max"] = res.rates.R_max;
        j["R_min_star"] = res.rates.R_min_star;
        j["delta_N"] = res.rates.delta_N;
        j["violations"] = {{"gamma_bounds", res.violations.gamma_bounds},
                           {"L_monotone", res.violations.L_monotone},
                           {"D_monotone", res.violations.D_monotone},
                           {"r_monotone", res.violations.r_monotone},
                           {"det_nonneg", res.violations.det_nonneg},
                           {"det_identity", res.violations.det_identity}};
        std::ofstream out(outdir / "trajectory_report.json", std::ios::binary);
        out << j.dump(2) << '\n';
    }
}

// ---------------------------------------------------------------------------
// orbit: measure-space dynamics log
// ---------------------------------------------------------------------------

inline void write_orbit(const SpectralMeasure& nu0, std::size_t iterations,
                        const std::filesystem::path& outdir) {
    CsvWriter w((outdir / "orbit.csv").string());
    w.header({"k", "mu_m1", "mu_1", "mu_2", "L", "D", "r", "detM", "detN"});
    SpectralMeasure nu = nu0;
    for (std::size_t k = 0; k <= iterations; ++k) {
        const MomentVector mv = moments(nu);
        const Diagnostics d = diagnostics(nu);
        w.row({static_cast<double>(k), mv.mu_m1, mv.mu1, mv.mu2, d.L, d.D, d.r, d.detM, d.detN});
        if (k == iterations || nu.is_degenerate() || !(nu.variance() > 0.0)) break;
        nu = transform(nu);
    }
}

// ---------------------------------------------------------------------------
// hilbert: discretized continuous measure, mass below the midpoint per iterate
// ---------------------------------------------------------------------------

struct HilbertResult {
    std::vector<double> below_mid;  // per iterate
    double p_even = 0, p_odd = 0;
    double defect = 0;                       // |p_even + p_odd - 1|
    std::int64_t stabilization_iter = -1;    // first even k with diff <= tol
    double final_even_diff = 0;
    std::size_t atoms = 0;
};

inline HilbertResult run_hilbert(const SpectralMeasure& nu0, std::size_t iterations,
                                 double stabilization_tol = 1e-6) {
    HilbertResult res;
    res.atoms = nu0.size();
    const double mid = 0.5 * (nu0.lambda(0) + nu0.lambda(nu0.size() - 1));
    auto below = [&](const SpectralMeasure& nu) {
        double s = 0.0;
        for (std::size_t i = 0; i < nu.size() && nu.lambda(i) < mid; ++i) s += nu.mass(i);
        return s;
    };
    SpectralMeasure nu = nu0;
    res.below_mid.push_back(below(nu));
    for (std::size_t k = 1; k <= iterations; ++k) {
        if (nu.is_degenerate() || !(nu.variance() > 0.0)) break;
        nu = transform(nu);
        res.below_mid.push_back(below(nu));
        if (k % 2 == 0 && k >= 2) {
            const double diff = std::abs(res.below_mid[k] - res.below_mid[k - 2]);
            res.final_even_diff = diff;
            if (res.stabilization_iter < 0 && diff <= stabilization_tol)
                res.stabilization_iter = static_cast<std::int64_t>(k);
        }
    }
    const std::size_t last = res.below_mid.size() - 1;
    const std::size_t last_even = last - (last % 2);
    res.p_even = res.below_mid[last_even];
    res.p_odd = last_even >= 1 ? res.below_mid[last_even - 1]
                               : (last >= 1 ? res.below_mid[1] : 0.0);
    res.defect = std::abs(res.p_even + res.p_odd - 1.0);
    return res;
}

inline void write_hilbert(const HilbertResult& res, const std::filesystem::path& outdir) {
    {
        CsvWriter w((outdir / "hilbert.csv").string());
        w.header({"k", "below_mid_mass"});
        for (std::size_t k = 0; k < res.below_mid.size(); ++k)
            w.row({static_cast<double>(k), res.below_mid[k]});
    }
    nlohmann::json j;
    j["atoms"] = res.atoms;
    j["p_even"] = res.p_even;
    j["p_odd"] = res.p_odd;
    j["defect"] = res.defect;
    j["stabilization_iter"] = res.stabilization_iter;
    j["final_even_diff"] = res.final_even_diff;
    std::ofstream out(outdir / "hilbert_report.json", std::ios::binary);
    out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// stability: s profile, H/phi profile, and probe classification over a p grid
// ---------------------------------------------------------------------------

struct ProbePoint {
    double p = 0;
    double multiplier = 0;  // measured interior-mass factor per double-step
    bool grows = false;
};

struct StabilityResult {
    StabilityReport report;
    std::vector<ProbePoint> probes;
    std::vector<std::pair<double, double>> h_samples;    // (p, H(nu_p*, lambda*))
    std::vector<std::pair<double, double>> phi_samples;  // (p, phi(p)), d = 3 only
};

inline StabilityResult run_stability(const std::vector<double>& spectrum_points, double m,
                                     double M, double p_grid_step, double alpha,
                                     std::size_t probe_steps) {
    StabilityResult res;
    res.report = stability_intervals(spectrum_points, m, M);

    std::vector<double> interior;
    for (double lam : spectrum_points)
        if (lam > m && lam < M) interior.push_back(lam);

    std::optional<PhiDensity> phi;
    if (interior.size() == 1) phi.emplace(m, interior.front(), M);

    for (std::size_t i = 1;; ++i) {
        const double p = static_cast<double>(i) * p_grid_step;
        if (p >= 1.0 - 0.5 * p_grid_step) break;
        res.h_samples.emplace_back(p, H_fixed_point(p, res.report.lambda_star, m, M));
        res.phi_samples.emplace_back(p, phi ? (*phi)(p) : 0.0);
        if (!interior.empty()) {
            const double a = std::min(alpha, 0.25 * std::min(p, 1.0 - p));
            const std::vector<double> trace = stability_probe(p, interior, a, probe_steps, m, M);
            ProbePoint pt;
            pt.p = p;
            pt.multiplier = trace.size() >= 2 && trace[0] > 0.0 ? trace[1] / trace[0] : 0.0;
            pt.grows = pt.multiplier > 1.0;
            res.probes.push_back(pt);
        }
    }
    return res;
}

inline void write_stability(const StabilityResult& res, const std::filesystem::path& outdir) {
    {
        CsvWriter w((outdir / "s_profile.csv").string());
        w.header({"lambda", "s"});
        for (const auto& [lam, s] : res.report.s_values) w.row({lam, s});
    }
    {
        CsvWriter w((outdir / "h_phi.csv").string());
        w.header({"p", "H", "phi"});
        for (std::size_t i = 0; i < res.h_samples.size(); ++i)
            w.row({res.h_samples[i].first, res.h_samples[i].second, res.phi_samples[i].second});
    }
    {
        CsvWriter w((outdir / "probe.csv").string());
        w.header({"p", "multiplier", "grows"});
        for (const ProbePoint& pt : res.probes)
            w.row({pt.p, pt.multiplier, pt.grows ? 1.0 : 0.0});
    }
    nlohmann::json j;
    j["lambda_star"] = res.report.lambda_star;
    j["s_star"] = res.report.s_star;
    j["I_s"] = {res.report.I_s.lo, res.report.I_s.hi};
    std::ofstream out(outdir / "stability_report.json", std::ios::binary);
    out << j.dump(2) << '\n';
}

}  // namespace pgrad::experiments
