#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "pgrad/measure.hpp"
#include "pgrad/rng.hpp"
#include "pgrad/trajectory.hpp"

using namespace pgrad;
using Catch::Approx;

namespace {

SpectralMeasure random_measure(TrialRng& rng, std::size_t n, double lo = 0.5, double hi = 8.0) {
    std::vector<Atom> atoms;
    double prev = lo;
    for (std::size_t i = 0; i < n; ++i) {
        prev += rng.uniform(0.05, (hi - lo) / static_cast<double>(n));
        atoms.push_back({prev, rng.uniform(0.05, 1.0)});
    }
    return SpectralMeasure::from_atoms(std::move(atoms));
}

double direct_det_M(const MomentVector& mv) {
    return detail::det3(mv.mu_m1, mv.mu0, mv.mu1, mv.mu0, mv.mu1, mv.mu2, mv.mu1, mv.mu2, mv.mu3);
}

double direct_det_N(const MomentVector& mv) {
    return detail::det3(mv.mu0, mv.mu1, mv.mu2, mv.mu1, mv.mu2, mv.mu3, mv.mu2, mv.mu3, mv.mu4);
}

}  // namespace

TEST_CASE("measure construction merges equal eigenvalues and normalizes") {
    const SpectralMeasure nu = SpectralMeasure::from_atoms({{2.0, 1.0}, {1.0, 1.0}, {2.0, 2.0}});
    REQUIRE(nu.size() == 2);
    CHECK(nu.lambda(0) == 1.0);
    CHECK(nu.lambda(1) == 2.0);
    CHECK(nu.mass(0) == Approx(0.25));
    CHECK(nu.mass(1) == Approx(0.75));
    CHECK(nu.total_mass() == Approx(1.0).epsilon(1e-15));

    CHECK_THROWS_AS(SpectralMeasure::from_atoms({{1.0, -0.5}, {2.0, 1.0}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(SpectralMeasure::from_atoms({{-1.0, 0.5}, {2.0, 0.5}}),
                    std::invalid_argument);
}

TEST_CASE("renormalize") {
    const QuadraticProblem p{Spectrum({1, 2}), {0, 0}};

    // g along a single eigenvector: point mass
    {
        const SpectralMeasure nu = renormalize(p, PSpec::minimal_residues(), {0, 1});
        // gradient is (0, 2): all mass at lambda = 2
        CHECK(nu.mass(0) == 0.0);
        CHECK(nu.mass(1) == Approx(1.0));
    }
    // P = I: weights lambda g^2 -> (1/3, 2/3) for g = (1,1)
    {
        const Vec x{1, 0.5};  // g = (1, 1)
        const SpectralMeasure nu = renormalize(p, PSpec::minimal_residues(), x);
        CHECK(nu.mass(0) == Approx(1.0 / 3.0).epsilon(1e-14));
        CHECK(nu.mass(1) == Approx(2.0 / 3.0).epsilon(1e-14));
    }
    // P = A^{-1}: P(lambda) lambda = 1 -> masses (1/2, 1/2)
    {
        const Vec x{1, 0.5};
        const SpectralMeasure nu = renormalize(p, PSpec::steepest_descent(), x);
        CHECK(nu.mass(0) == Approx(0.5).epsilon(1e-14));
        CHECK(nu.mass(1) == Approx(0.5).epsilon(1e-14));
    }
    CHECK_THROWS_AS(renormalize(p, PSpec::steepest_descent(), p.x_star), std::domain_error);
}

TEST_CASE("moments") {
    // point mass
    {
        const SpectralMeasure nu = SpectralMeasure::from_atoms({{3.0, 1.0}, {5.0, 0.0}});
        const MomentVector mv = moments(nu);
        for (int j = -1; j <= 4; ++j) CHECK(mv.at(j) == Approx(int_pow(3.0, j)).epsilon(1e-15));
        const Diagnostics d = diagnostics(nu);
        CHECK(d.L == Approx(1.0).epsilon(1e-15));
        CHECK(d.D == Approx(0.0).margin(1e-15));
    }
    // {0.3 @ 1, 0.7 @ 2}
    {
        const SpectralMeasure nu = SpectralMeasure::two_point(0.3, 1.0, 2.0);
        const MomentVector mv = moments(nu);
        CHECK(mv.mu1 == Approx(1.7).epsilon(1e-15));
        CHECK(mv.mu_m1 == Approx(0.65).epsilon(1e-15));
        CHECK(mv.mu2 == Approx(3.1).epsilon(1e-15));
        const Diagnostics d = diagnostics(nu);
        CHECK(d.L == Approx(1.105).epsilon(1e-15));
        CHECK(d.D == Approx(0.21).epsilon(1e-13));
    }
    // half-half two-point measure attains the Kantorovich bounds
    {
        const SpectralMeasure nu = SpectralMeasure::two_point(0.5, 1.0, 10.0);
        const Diagnostics d = diagnostics(nu);
        CHECK(d.L == Approx(3.025).epsilon(1e-15));   // (M+m)^2/(4mM)
        CHECK(d.D == Approx(20.25).epsilon(1e-15));   // (M-m)^2/4
    }
}

TEST_CASE("transform") {
    // two-point swap: {p@m, (1-p)@M} -> {(1-p)@m, p@M}
    {
        const SpectralMeasure nu = SpectralMeasure::two_point(0.3, 1.0, 2.0);
        const SpectralMeasure out = transform(nu);
        CHECK(out.mass(0) == Approx(0.7).epsilon(1e-14));
        CHECK(out.mass(1) == Approx(0.3).epsilon(1e-14));
    }
    // T^2 fixed point, exactly
    {
        const SpectralMeasure nu = SpectralMeasure::two_point(0.37, 0.8, 11.0);
        const SpectralMeasure out = transform(transform(nu));
        CHECK(std::abs(out.mass(0) - 0.37) <= 1e-14);
        CHECK(std::abs(out.mass(1) - 0.63) <= 1e-14);
    }
    // point mass cannot be transformed
    {
        const SpectralMeasure nu = SpectralMeasure::from_atoms({{3.0, 1.0}, {5.0, 0.0}});
        CHECK_THROWS_AS(transform(nu), std::domain_error);
    }
    // atom sitting exactly at the mean receives zero mass
    {
        const SpectralMeasure with_mid = SpectralMeasure::from_atoms(
            {{1.0, 0.375}, {1.5, 0.25}, {2.0, 0.375}});  // exactly representable, mean = 1.5
        CHECK(with_mid.mean() == 1.5);
        const SpectralMeasure out = transform(with_mid);
        CHECK(out.mass(1) == 0.0);
    }
}

TEST_CASE("moment_update") {
    // hand evaluation on {0.3@1, 0.7@2}: mu_1' = 1.3
    {
        const SpectralMeasure nu = SpectralMeasure::two_point(0.3, 1.0, 2.0);
        const MomentVector mv = moments(nu);
        const MomentVector upd = moment_update(mv, nu.moment(5), nu.moment(6));
        CHECK(upd.mu1 == Approx(1.3).epsilon(1e-12));
    }
    // symmetric two-point measure: mu_1 unchanged
    {
        const SpectralMeasure nu = SpectralMeasure::two_point(0.5, 1.0, 9.0);
        const MomentVector upd = moment_update(moments(nu), nu.moment(5), nu.moment(6));
        CHECK(upd.mu1 == Approx(moments(nu).mu1).epsilon(1e-13));
    }
    // degenerate measure rejected
    {
        const SpectralMeasure nu = SpectralMeasure::from_atoms({{2.0, 1.0}, {3.0, 0.0}});
        CHECK_THROWS_AS(moment_update(moments(nu), nu.moment(5), nu.moment(6)),
                        std::domain_error);
    }
    // dual-path consistency on random measures
    TrialRng rng(5150, 0);
    for (int t = 0; t < 100; ++t) {
        const SpectralMeasure nu = random_measure(rng, 3 + rng.next_u64() % 8);
        const MomentVector via_measure = moments(transform(nu));
        const MomentVector via_update = moment_update(moments(nu), nu.moment(5), nu.moment(6));
        for (int j = -1; j <= 4; ++j)
            CHECK(via_update.at(j) == Approx(via_measure.at(j)).epsilon(1e-10));
    }
}

TEST_CASE("diagnostics determinants") {
    // two-point measure: detM = detN = 0 exactly (no triples)
    {
        const Diagnostics d = diagnostics(SpectralMeasure::two_point(0.4, 1.0, 7.0));
        CHECK(d.detM == 0.0);
        CHECK(d.detN == 0.0);
    }
    // uniform three-point measure on {1,2,3}: detM = 4/162
    {
        const SpectralMeasure nu = SpectralMeasure::from_atoms(
            {{1.0, 1.0 / 3.0}, {2.0, 1.0 / 3.0}, {3.0, 1.0 / 3.0}});
        const Diagnostics d = diagnostics(nu);
        CHECK(d.detM == Approx(4.0 / 162.0).epsilon(1e-14));
        // cross-check against the direct 3x3 determinant
        CHECK(d.detM == Approx(direct_det_M(moments(nu))).epsilon(1e-12));
        CHECK(d.detN == Approx(direct_det_N(moments(nu))).epsilon(1e-12));
    }
    // triple-sum route agrees with the 3x3 determinants on random measures
    TrialRng rng(31337, 0);
    for (int t = 0; t < 50; ++t) {
        const SpectralMeasure nu = random_measure(rng, 3 + rng.next_u64() % 10);
        const Diagnostics d = diagnostics(nu);
        const MomentVector mv = moments(nu);
        CHECK(d.detM >= 0.0);
        CHECK(d.detN >= 0.0);
        CHECK(d.detM == Approx(direct_det_M(mv)).epsilon(1e-9).margin(1e-12));
        CHECK(d.detN == Approx(direct_det_N(mv)).epsilon(1e-9).margin(1e-12));
    }
}

TEST_CASE("det identity along random orbits") {
    // det M_k = (L_{k+1} - L_k) D_k^2 / mu_1^k
    TrialRng rng(40, 0);
    for (int t = 0; t < 30; ++t) {
        SpectralMeasure nu = random_measure(rng, 3 + rng.next_u64() % 8);
        for (int k = 0; k < 25; ++k) {
            const Diagnostics d = diagnostics(nu);
            const MomentVector mv = moments(nu);
            if (!(nu.variance() > 0.0)) break;
            const SpectralMeasure next = transform(nu);
            const Diagnostics dn = diagnostics(next);
            const double rhs = (dn.L - d.L) * d.D * d.D / mv.mu1;
            CHECK(std::abs(d.detM - rhs) <= 1e-10 * std::max(1.0, d.detM));
            nu = next;
        }
    }
}

TEST_CASE("L and D are monotone and bounded along orbits") {
    TrialRng rng(41, 0);
    for (int t = 0; t < 30; ++t) {
        SpectralMeasure nu = random_measure(rng, 3 + rng.next_u64() % 8);
        const double m = nu.lambda(0), M = nu.lambda(nu.size() - 1);
        const double L_star = (M + m) * (M + m) / (4.0 * m * M);
        const double D_star = (M - m) * (M - m) / 4.0;
        Diagnostics prev = diagnostics(nu);
        for (int k = 0; k < 60; ++k) {
            if (!(nu.variance() > 0.0)) break;
            nu = transform(nu);
            const Diagnostics d = diagnostics(nu);
            CHECK(d.L >= prev.L - 1e-12);
            CHECK(d.D >= prev.D - 1e-12);
            CHECK(d.L >= 1.0 - 1e-14);
            CHECK(d.L <= L_star + 1e-10);
            CHECK(d.D <= D_star + 1e-10);
            prev = d;
        }
    }
}

TEST_CASE("moment bounds and Cauchy-Schwarz chain") {
    TrialRng rng(42, 0);
    for (int t = 0; t < 50; ++t) {
        const SpectralMeasure nu = random_measure(rng, 2 + rng.next_u64() % 10);
        const double m = nu.lambda(0), M = nu.lambda(nu.size() - 1);
        const MomentVector mv = moments(nu);
        CHECK(mv.mu0 == Approx(1.0).epsilon(1e-14));
        for (int j = 1; j <= 4; ++j) {
            CHECK(mv.at(j) >= int_pow(m, j) * (1 - 1e-14));
            CHECK(mv.at(j) <= int_pow(M, j) * (1 + 1e-14));
        }
        CHECK(mv.mu_m1 >= 1.0 / M * (1 - 1e-14));
        CHECK(mv.mu_m1 <= 1.0 / m * (1 + 1e-14));
        CHECK(mv.mu1 * mv.mu1 <= mv.mu2 * (1 + 1e-14));
        CHECK(mv.mu2 * mv.mu2 <= mv.mu1 * mv.mu3 * (1 + 1e-14));
    }
}

TEST_CASE("cross-representation: trajectory moments equal transform-orbit moments") {
    TrialRng rng(43, 0);
    const QuadraticProblem p{Spectrum({0.5, 1.0, 2.5, 4.0, 7.0}), Vec(5, 0.0)};
    for (const PSpec& ps : {PSpec::steepest_descent(), PSpec::minimal_residues(),
                            PSpec::power(2)}) {
        Vec x0(5);
        for (double& v : x0) v = rng.uniform(0.2, 2.0);
        RunConfig rc;
        rc.max_iters = 40;
        const TrajectoryRecord rec = iterate(p, ps, x0, rc);
        SpectralMeasure nu = renormalize(p, ps, x0);
        for (std::size_t k = 0; k < rec.steps.size(); ++k) {
            const MomentVector traj_mv = rec.steps[k].mu;
            const MomentVector orbit_mv = moments(nu);
            for (int j = -1; j <= 4; ++j)
                CHECK(traj_mv.at(j) == Approx(orbit_mv.at(j)).epsilon(1e-10));
            if (k + 1 < rec.steps.size()) nu = transform(nu);
        }
    }
}

TEST_CASE("D equals the x-space criterion ratio") {
    // D_k = (P(A)A g_{k+1}, g_{k+1}) / (gamma_k^2 (P(A)A g_k, g_k))
    TrialRng rng(44, 0);
    const QuadraticProblem p{Spectrum({1.0, 2.0, 3.5, 6.0}), Vec(4, 0.0)};
    const PSpec ps = PSpec::minimal_residues();
    Vec x0(4);
    for (double& v : x0) v = rng.uniform(0.3, 1.5);
    RunConfig rc;
    rc.max_iters = 30;
    const TrajectoryRecord rec = iterate(p, ps, x0, rc);
    PSpec pa = PSpec::custom({{1, 1.0}});  // weight P(A) A for P = I
    for (std::size_t k = 0; k + 1 < rec.steps.size(); ++k) {
        const double log_ratio = rec.log_weighted_sq(pa, k + 1) - rec.log_weighted_sq(pa, k);
        const double x_space = std::exp(log_ratio) / (rec.steps[k].gamma * rec.steps[k].gamma);
        CHECK(x_space == Approx(rec.steps[k].D).epsilon(1e-10));
    }
}

TEST_CASE("interior mass underflow is clamped to zero") {
    SpectralMeasure nu = SpectralMeasure::from_atoms({{1.0, 0.3}, {2.5, 0.4}, {10.0, 0.3}});
    for (int k = 0; k < 1200; ++k) {
        if (!(nu.variance() > 0.0)) break;
        nu = transform(nu);
    }
    CHECK(nu.mass(1) == 0.0);
    CHECK(nu.mass(0) + nu.mass(2) == Approx(1.0).epsilon(1e-14));
}

TEST_CASE("discretize_continuous") {
    // uniform density, 2 atoms on [1, 10]: midpoints 3.25 and 7.75, mass 1/2 each
    {
        const SpectralMeasure nu = discretize_continuous(DensitySpec::uniform(1.0, 10.0), 2);
        REQUIRE(nu.size() == 2);
        CHECK(nu.lambda(0) == Approx(3.25).epsilon(1e-15));
        CHECK(nu.lambda(1) == Approx(7.75).epsilon(1e-15));
        CHECK(nu.mass(0) == Approx(0.5).epsilon(1e-15));
    }
    // 1e4 atoms: mean within 1e-6 of (m+M)/2
    {
        const SpectralMeasure nu = discretize_continuous(DensitySpec::uniform(1.0, 10.0), 10000);
        CHECK(nu.mean() == Approx(5.5).margin(1e-6));
    }
    // point masses pass through exactly
    {
        DensitySpec spec = DensitySpec::uniform(4.0, 6.0);
        spec.point_masses = {{1.0, 0.3}, {10.0, 0.3}};
        const SpectralMeasure nu = discretize_continuous(spec, 10);
        CHECK(nu.lambda(0) == 1.0);
        CHECK(nu.mass(0) == Approx(0.3).epsilon(1e-15));
        CHECK(nu.lambda(nu.size() - 1) == 10.0);
        CHECK(nu.mass(nu.size() - 1) == Approx(0.3).epsilon(1e-15));
        CHECK(nu.total_mass() == Approx(1.0).epsilon(1e-14));
    }
    // non-positive density rejected
    {
        DensitySpec spec{1.0, 10.0, [](double a) { return a - 5.0; }, {}};
        CHECK_THROWS_AS(discretize_continuous(spec, 100), std::domain_error);
    }
    CHECK_THROWS_AS(discretize_continuous(DensitySpec::uniform(1.0, 10.0), 1),
                    std::invalid_argument);
}
