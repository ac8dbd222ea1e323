#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "pgrad/rng.hpp"
#include "pgrad/trajectory.hpp"

using namespace pgrad;
using Catch::Approx;

namespace {

QuadraticProblem random_problem(TrialRng& rng, std::size_t d, double max_rho) {
    const double m = rng.uniform(0.3, 1.0);
    const double rho = std::exp(rng.uniform(std::log(1.5), std::log(max_rho)));
    Vec eig{m, m * rho};
    for (std::size_t i = 2; i < d; ++i) eig.push_back(rng.uniform(m, m * rho));
    std::sort(eig.begin(), eig.end());
    Vec xs(d, 0.0);
    return {Spectrum(std::move(eig)), std::move(xs)};
}

}  // namespace

TEST_CASE("step_length closed forms") {
    const QuadraticProblem p{Spectrum({1, 2}), {0, 0}};
    // steepest descent: gamma = (g,g)/(Ag,g)
    CHECK(step_length(p, PSpec::steepest_descent(), {1, 1}) == Approx(2.0 / 3.0).epsilon(1e-15));
    // minimal residues: gamma = (Ag,g)/(A^2 g,g)
    CHECK(step_length(p, PSpec::minimal_residues(), {1, 1}) == Approx(3.0 / 5.0).epsilon(1e-15));

    // gradient on a single eigendirection: gamma = 1/lambda for every P
    const QuadraticProblem p3{Spectrum({1, 4, 10}), {0, 0, 0}};
    for (int q : {-1, 0, 1, 2}) {
        CHECK(step_length(p3, PSpec::power(q), {0, 1, 0}) == Approx(0.25).epsilon(1e-14));
        CHECK(step_length(p3, PSpec::power(q), {0, 0, 2}) == Approx(0.1).epsilon(1e-14));
    }

    CHECK_THROWS_AS(step_length(p, PSpec::steepest_descent(), {0, 0}), std::domain_error);
}

TEST_CASE("iterate hand-checked first step") {
    // A = diag(1,2), x* = 0, x0 = (1,1), steepest descent.
    // g0 = (1,2), gamma0 = (g,g)/(Ag,g) = 5/9, x1 = (4/9, -1/9), g1 = (4/9, -2/9).
    const QuadraticProblem p{Spectrum({1, 2}), {0, 0}};
    RunConfig rc;
    rc.max_iters = 3;
    const TrajectoryRecord rec = iterate(p, PSpec::steepest_descent(), {1, 1}, rc);
    REQUIRE(rec.steps.size() == 3);
    CHECK(rec.steps[0].gamma == Approx(5.0 / 9.0).epsilon(1e-14));
    const Vec x1 = rec.x_at(1);
    CHECK(x1[0] == Approx(4.0 / 9.0).epsilon(1e-13));
    CHECK(x1[1] == Approx(-1.0 / 9.0).epsilon(1e-13));
    const Vec g1 = rec.gradient_at(1);
    CHECK(g1[0] == Approx(4.0 / 9.0).epsilon(1e-13));
    CHECK(g1[1] == Approx(-2.0 / 9.0).epsilon(1e-13));
}

TEST_CASE("single active eigendirection converges in one step") {
    const QuadraticProblem p{Spectrum({1, 4, 10}), {1, 2, 3}};
    // gradient along e_1 only
    Vec x0 = p.x_star;
    x0[0] += 0.7;
    RunConfig rc;
    rc.max_iters = 50;
    const TrajectoryRecord rec = iterate(p, PSpec::minimal_residues(), x0, rc);
    CHECK(rec.reason == StopReason::FiniteConvergence);
    REQUIRE(rec.steps.size() == 1);
    CHECK(rec.steps[0].gamma == Approx(1.0).epsilon(1e-14));  // 1/m with m = 1
}

TEST_CASE("iterate at the minimizer reports finite convergence immediately") {
    const QuadraticProblem p{Spectrum({1, 2}), {3, -1}};
    RunConfig rc;
    const TrajectoryRecord rec = iterate(p, PSpec::steepest_descent(), p.x_star, rc);
    CHECK(rec.reason == StopReason::FiniteConvergence);
    CHECK(rec.steps.empty());
}

TEST_CASE("scale invariance of the step length") {
    TrialRng rng(7, 0);
    const auto p = random_problem(rng, 6, 50.0);
    const PSpec base = PSpec::custom({{-1, 0.4}, {0, 0.2}, {1, 0.1}});
    const PSpec scaled = PSpec::custom({{-1, 0.4 * 37.5}, {0, 0.2 * 37.5}, {1, 0.1 * 37.5}});
    RunConfig rc;
    rc.max_iters = 40;
    Vec x0(p.dim());
    for (double& v : x0) v = rng.uniform(-1.0, 1.0);
    const TrajectoryRecord a = iterate(p, base, x0, rc);
    const TrajectoryRecord b = iterate(p, scaled, x0, rc);
    REQUIRE(a.steps.size() == b.steps.size());
    for (std::size_t k = 0; k < a.steps.size(); ++k)
        CHECK(a.steps[k].gamma == Approx(b.steps[k].gamma).epsilon(1e-14));
}

TEST_CASE("Kantorovich step bound and monotone criterion on random trajectories") {
    TrialRng rng(11, 0);
    for (int t = 0; t < 20; ++t) {
        const std::size_t d = 2 + static_cast<std::size_t>(rng.next_u64() % 9);
        const auto p = random_problem(rng, d, 100.0);
        const PSpec ps = PSpec::power(static_cast<int>(rng.next_u64() % 4) - 1);
        Vec x0(d);
        for (double& v : x0) v = rng.uniform(-2.0, 2.0);
        RunConfig rc;
        rc.max_iters = 100;
        const TrajectoryRecord rec = iterate(p, ps, x0, rc);
        const double lo = 1.0 / p.spectrum.M() - 1e-12;
        const double hi = 1.0 / p.spectrum.m() + 1e-12;
        for (std::size_t k = 0; k < rec.steps.size(); ++k) {
            CHECK(rec.steps[k].gamma >= lo);
            CHECK(rec.steps[k].gamma <= hi);
            if (k > 0) {
                // minimized criterion (P(A)g,g) is non-increasing
                const double diff =
                    rec.log_weighted_sq(ps, k) - rec.log_weighted_sq(ps, k - 1);
                CHECK(diff <= 1e-12);
            }
        }
    }
}

TEST_CASE("two-dimensional problems have a constant rate") {
    TrialRng rng(13, 0);
    for (int t = 0; t < 20; ++t) {
        const auto p = random_problem(rng, 2, 80.0);
        const PSpec ps = PSpec::power(static_cast<int>(rng.next_u64() % 4) - 1);
        Vec x0{rng.uniform(0.1, 2.0), rng.uniform(0.1, 2.0)};
        RunConfig rc;
        rc.max_iters = 100;
        const TrajectoryRecord rec = iterate(p, ps, x0, rc);
        REQUIRE(!rec.steps.empty());
        const double r0 = rec.steps[0].r;
        for (const TrajectoryStep& s : rec.steps) CHECK(std::abs(s.r - r0) <= 1e-12);
    }
}

TEST_CASE("relaxation changes the d = 2 behaviour") {
    const QuadraticProblem p{Spectrum({1, 3}), {0, 0}};
    RunConfig rc;
    rc.max_iters = 60;
    const TrajectoryRecord plain = iterate(p, PSpec::steepest_descent(), {1, 0.5}, rc);
    rc.relaxation = 0.9;
    const TrajectoryRecord relaxed = iterate(p, PSpec::steepest_descent(), {1, 0.5}, rc);
    REQUIRE(!plain.steps.empty());
    REQUIRE(relaxed.steps.size() > 10);
    double max_dev = 0.0;
    for (const TrajectoryStep& s : relaxed.steps)
        max_dev = std::max(max_dev, std::abs(s.r - plain.steps[0].r));
    CHECK(max_dev > 1e-6);
}

TEST_CASE("RunConfig validation") {
    RunConfig rc;
    rc.relaxation = 2.0;
    CHECK_NOTHROW(rc.validate());
    rc.relaxation = 2.5;
    CHECK_THROWS_AS(rc.validate(), std::invalid_argument);
    rc.relaxation = 0.0;
    CHECK_THROWS_AS(rc.validate(), std::invalid_argument);
    rc = RunConfig{};
    rc.max_iters = 0;
    CHECK_THROWS_AS(rc.validate(), std::invalid_argument);
    rc = RunConfig{};
    rc.gradient_stop = -1.0;
    CHECK_THROWS_AS(rc.validate(), std::invalid_argument);
}

TEST_CASE("PSpec positivity is checked against the spectrum") {
    const QuadraticProblem p{Spectrum({1, 2}), {0, 0}};
    const PSpec bad = PSpec::custom({{0, 1.0}, {1, -1.0}});  // P(a) = 1 - a, zero at a = 1
    RunConfig rc;
    CHECK_THROWS_AS(iterate(p, bad, {1, 1}, rc), std::domain_error);
    // fine on a spectrum where P stays positive
    const QuadraticProblem p2{Spectrum({0.25, 0.5}), {0, 0}};
    CHECK_NOTHROW(iterate(p2, bad, {1, 1}, rc));
}

TEST_CASE("gradient_stop terminates the run") {
    const QuadraticProblem p{Spectrum({1, 2, 5}), {0, 0, 0}};
    RunConfig rc;
    rc.max_iters = 100000;
    rc.gradient_stop = 1e-6;
    const TrajectoryRecord rec = iterate(p, PSpec::steepest_descent(), {1, 1, 1}, rc);
    CHECK(rec.reason == StopReason::GradientStop);
    CHECK(rec.gradient_norm_at(rec.steps.size() - 1) <= 1e-6);
    if (rec.steps.size() >= 2)
        CHECK(rec.gradient_norm_at(rec.steps.size() - 2) > 1e-6);
}
