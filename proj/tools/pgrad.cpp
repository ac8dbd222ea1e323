#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pgrad/experiments.hpp"
#include "pgrad/version.hpp"

namespace fs = std::filesystem;
using namespace pgrad;
using namespace pgrad::experiments;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir = "out";
    std::int64_t seed = -1;
    std::int64_t trials = -1;
    std::int64_t workers = -1;
    std::int64_t max_iters = -1;
    double gradient_stop = -1.0;
    double relaxation = -1.0;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "configuration file (key = value)");
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--seed", args.seed, "override config seed");
    cmd->add_option("--trials", args.trials, "override config trials");
    cmd->add_option("--workers", args.workers, "override config workers");
    cmd->add_option("--max-iters", args.max_iters, "override config max_iters");
    cmd->add_option("--gradient-stop", args.gradient_stop, "override config gradient_stop");
    cmd->add_option("--relaxation", args.relaxation, "override config relaxation");
}

KeyValueConfig load_config(const CommonArgs& args) {
    KeyValueConfig cfg =
        args.config_path.empty() ? KeyValueConfig() : KeyValueConfig::parse_file(args.config_path);
    if (args.seed >= 0) cfg.set("seed", std::to_string(args.seed));
    if (args.trials >= 0) cfg.set("trials", std::to_string(args.trials));
    if (args.workers >= 0) cfg.set("workers", std::to_string(args.workers));
    if (args.max_iters >= 0) cfg.set("max_iters", std::to_string(args.max_iters));
    if (args.gradient_stop >= 0.0) cfg.set("gradient_stop", format_double(args.gradient_stop));
    if (args.relaxation >= 0.0) cfg.set("relaxation", format_double(args.relaxation));
    return cfg;
}

fs::path prepare_outdir(const CommonArgs& args) {
    fs::path dir(args.out_dir);
    fs::create_directories(dir);
    return dir;
}

Vec sample_or_read_x0(const KeyValueConfig& cfg, const QuadraticProblem& problem,
                      const PSpec& pspec) {
    if (cfg.has("x0")) return cfg.get_array("x0");
    TrialRng rng(static_cast<std::uint64_t>(cfg.get_int("seed", 0)), 0);
    return x0_from_z(problem, pspec, rng.unit_sphere(problem.dim()));
}

SpectralMeasure measure_from_config(const KeyValueConfig& cfg) {
    if (cfg.has("measure_csv")) return read_measure_csv(cfg.get_string("measure_csv"));
    if (cfg.has("atom_lambdas")) {
        const std::vector<double> lams = cfg.get_array("atom_lambdas");
        const std::vector<double> masses = cfg.get_array("atom_masses");
        if (lams.size() != masses.size() || lams.empty())
            throw std::runtime_error("config: atom_lambdas/atom_masses mismatch");
        std::vector<Atom> atoms(lams.size());
        for (std::size_t i = 0; i < lams.size(); ++i) atoms[i] = {lams[i], masses[i]};
        return SpectralMeasure::from_atoms(std::move(atoms));
    }
    // fall back to the renormalized measure of an x0 on the configured problem
    const QuadraticProblem problem = problem_from_config(cfg);
    const PSpec pspec = pspec_from_config(cfg);
    return renormalize(problem, pspec, sample_or_read_x0(cfg, problem, pspec));
}

int run_trajectory_cmd(const CommonArgs& args) {
    const KeyValueConfig cfg = load_config(args);
    const fs::path outdir = prepare_outdir(args);
    const QuadraticProblem problem = problem_from_config(cfg);
    const PSpec pspec = pspec_from_config(cfg);
    const RunConfig rc = run_config_from_config(cfg);
    const Vec x0 = sample_or_read_x0(cfg, problem, pspec);
    const TrajectoryResult res = run_trajectory(problem, pspec, x0, rc);
    write_trajectory(res, outdir);
    write_sidecar(outdir, "trajectory", cfg);
    std::cout << "trajectory: " << res.record.steps.size()
              << " iterations, stop=" << to_string(res.record.reason)
              << ", p=" << format_double(res.attractor.p)
              << ", V_n=" << format_double(res.rates.V_n)
              << ", invariant violations=" << res.violations.total() << "\n";
    if (res.record.reason == StopReason::Diverged)
        std::cout << "warning: diverged at step " << res.record.divergence_step
                  << " (relaxation=" << rc.relaxation << ")\n";
    return 0;
}

int run_orbit_cmd(const CommonArgs& args) {
    const KeyValueConfig cfg = load_config(args);
    const fs::path outdir = prepare_outdir(args);
    const SpectralMeasure nu0 = measure_from_config(cfg);
    const std::size_t iterations = static_cast<std::size_t>(cfg.get_int("iterations", 300));
    write_orbit(nu0, iterations, outdir);
    write_sidecar(outdir, "orbit", cfg);
    std::cout << "orbit: " << iterations << " transforms logged to " << outdir / "orbit.csv"
              << "\n";
    return 0;
}

int run_density_cmd(const CommonArgs& args) {
    const KeyValueConfig cfg = load_config(args);
    const fs::path outdir = prepare_outdir(args);
    const QuadraticProblem problem = problem_from_config(cfg);
    const PSpec pspec = pspec_from_config(cfg);
    const DensityResult res = run_density(
        problem, pspec, static_cast<std::size_t>(cfg.get_int("trials", 10000)),
        static_cast<std::uint64_t>(cfg.get_int("seed", 0)),
        static_cast<std::size_t>(cfg.get_int("workers", 1)),
        static_cast<std::size_t>(cfg.get_int("max_transforms", 4000)),
        cfg.get_double("interior_threshold", kDefaultInteriorThreshold),
        static_cast<std::size_t>(cfg.get_int("bins", 100)));
    write_density(res, outdir);
    write_sidecar(outdir, "density", cfg);
    std::cout << "density: " << res.trials.size() << " trials (" << res.converged
              << " converged, " << res.finite_convergence << " finite, " << res.non_converged
              << " non-converged), fraction outside I_s = "
              << format_double(res.fraction_outside_Is) << "\n";
    return 0;
}

int run_rate_curves_cmd(const CommonArgs& args) {
    const KeyValueConfig cfg = load_config(args);
    const fs::path outdir = prepare_outdir(args);
    const std::vector<double> rhos = cfg.get_array("rho_list", {2.0, 4.0, 8.0, 16.0});
    write_rate_curves(rhos, outdir);
    write_sidecar(outdir, "rate_curves", cfg);
    std::cout << "rate-curves: " << rhos.size() << " curves written\n";
    return 0;
}

int run_rate_range_cmd(const CommonArgs& args) {
    const KeyValueConfig cfg = load_config(args);
    const fs::path outdir = prepare_outdir(args);
    write_rate_range(outdir, static_cast<std::size_t>(cfg.get_int("grid_points", 999)));
    write_sidecar(outdir, "rate_range", cfg);
    std::cout << "rate-range: written to " << outdir / "rate_range.csv" << "\n";
    return 0;
}

int run_stability_cmd(const CommonArgs& args) {
    const KeyValueConfig cfg = load_config(args);
    const fs::path outdir = prepare_outdir(args);
    const std::vector<double> points = cfg.get_array("eigenvalues");
    const Spectrum spectrum(points);
    const StabilityResult res = run_stability(
        points, spectrum.m(), spectrum.M(), cfg.get_double("p_grid_step", 0.01),
        cfg.get_double("alpha", 1e-8),
        static_cast<std::size_t>(cfg.get_int("probe_steps", 50)));
    write_stability(res, outdir);
    if (cfg.has("probe_trace_p")) {
        const double p = cfg.get_double("probe_trace_p");
        std::vector<double> interior;
        for (double lam : points)
            if (lam > spectrum.m() && lam < spectrum.M()) interior.push_back(lam);
        const std::vector<double> trace =
            stability_probe(p, interior, cfg.get_double("alpha", 1e-8),
                            static_cast<std::size_t>(cfg.get_int("probe_steps", 50)),
                            spectrum.m(), spectrum.M());
        CsvWriter w((outdir / "probe_trace.csv").string());
        w.header({"step", "interior_mass"});
        for (std::size_t k = 0; k < trace.size(); ++k)
            w.row({static_cast<double>(k), trace[k]});
    }
    write_sidecar(outdir, "stability", cfg);
    std::cout << "stability: I_s = (" << format_double(res.report.I_s.lo) << ", "
              << format_double(res.report.I_s.hi) << "), lambda* = "
              << format_double(res.report.lambda_star) << "\n";
    return 0;
}

int run_hilbert_cmd(const CommonArgs& args) {
    const KeyValueConfig cfg = load_config(args);
    const fs::path outdir = prepare_outdir(args);
    const std::vector<double> interval = cfg.get_array("interval", {1.0, 10.0});
    if (interval.size() != 2) throw std::runtime_error("config: interval must be [lo, hi]");
    DensitySpec spec = DensitySpec::uniform(interval[0], interval[1]);
    if (cfg.has("atom_lambdas")) {
        const std::vector<double> lams = cfg.get_array("atom_lambdas");
        const std::vector<double> masses = cfg.get_array("atom_masses");
        for (std::size_t i = 0; i < lams.size(); ++i)
            spec.point_masses.push_back({lams[i], masses[i]});
    }
    const SpectralMeasure nu0 =
        discretize_continuous(spec, static_cast<std::size_t>(cfg.get_int("n_atoms", 10000)));
    const HilbertResult res =
        run_hilbert(nu0, static_cast<std::size_t>(cfg.get_int("iterations", 300)));
    write_hilbert(res, outdir);
    write_sidecar(outdir, "hilbert", cfg);
    std::cout << "hilbert: " << res.atoms << " atoms, p_even=" << format_double(res.p_even)
              << ", p_odd=" << format_double(res.p_odd)
              << ", defect=" << format_double(res.defect) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"P-gradient quadratic minimization experiments"};
    app.set_version_flag("--version", PGRAD_VERSION);
    app.require_subcommand(1);

    CommonArgs args;
    CLI::App* c_traj = app.add_subcommand("trajectory", "run one P-gradient trajectory");
    CLI::App* c_orbit = app.add_subcommand("orbit", "iterate the measure transformation");
    CLI::App* c_density = app.add_subcommand("density", "Monte-Carlo attractor density (d = 3)");
    CLI::App* c_curves = app.add_subcommand("rate-curves", "r(p) curves per condition number");
    CLI::App* c_range = app.add_subcommand("rate-range", "rate range vs inverse condition number");
    CLI::App* c_stab = app.add_subcommand("stability", "stability intervals and probes");
    CLI::App* c_hilb = app.add_subcommand("hilbert", "discretized continuous-measure orbit");
    for (CLI::App* c : {c_traj, c_orbit, c_density, c_curves, c_range, c_stab, c_hilb})
        add_common(c, args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (c_traj->parsed()) return run_trajectory_cmd(args);
        if (c_orbit->parsed()) return run_orbit_cmd(args);
        if (c_density->parsed()) return run_density_cmd(args);
        if (c_curves->parsed()) return run_rate_curves_cmd(args);
        if (c_range->parsed()) return run_rate_range_cmd(args);
        if (c_stab->parsed()) return run_stability_cmd(args);
        if (c_hilb->parsed()) return run_hilbert_cmd(args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
