#include <catch_amalgamated.hpp>

#include "pgrad/rng.hpp"
#include "pgrad/spectrum.hpp"

using namespace pgrad;
using Catch::Approx;

namespace {

QuadraticProblem make_problem(Vec eig, Vec xs) { return {Spectrum(std::move(eig)), std::move(xs)}; }

QuadraticProblem random_problem(TrialRng& rng, std::size_t d, double max_rho) {
    const double m = rng.uniform(0.3, 1.0);
    const double rho = std::exp(rng.uniform(std::log(1.5), std::log(max_rho)));
    Vec eig{m, m * rho};
    for (std::size_t i = 2; i < d; ++i) eig.push_back(rng.uniform(m, m * rho));
    std::sort(eig.begin(), eig.end());
    Vec xs(d);
    for (double& v : xs) v = rng.uniform(-2.0, 2.0);
    return make_problem(std::move(eig), std::move(xs));
}

}  // namespace

TEST_CASE("Spectrum validation") {
    CHECK_THROWS_AS(Spectrum({1.0}), std::invalid_argument);
    CHECK_THROWS_AS(Spectrum({2.0, 2.0}), std::invalid_argument);  // m == M rejected
    CHECK_THROWS_AS(Spectrum({2.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(Spectrum({-1.0, 2.0}), std::invalid_argument);
    CHECK_THROWS_AS(Spectrum({0.0, 2.0}), std::invalid_argument);
    const Spectrum s({1.0, 1.0, 2.0});  // duplicates inside are fine
    CHECK(s.m() == 1.0);
    CHECK(s.M() == 2.0);
}

TEST_CASE("gradient") {
    const auto p = make_problem({1, 2}, {0, 0});
    CHECK(gradient(p, {1, 1}) == Vec{1, 2});
    CHECK(gradient(p, {0, 0}) == Vec{0, 0});

    const auto p3 = make_problem({1, 4, 10}, {1, 0, 0});
    CHECK(gradient(p3, {2, 1, 1}) == Vec{1, 4, 10});

    CHECK_THROWS_AS(gradient(p, {1, 2, 3}), std::invalid_argument);
}

TEST_CASE("objective") {
    const auto p = make_problem({1, 2}, {0, 0});
    CHECK(objective(p, {1, 1}) == Approx(1.5).epsilon(1e-15));
    CHECK(objective(p, {0, 0}) == 0.0);

    // f(x*) = -1/2 (A x*, x*)
    const auto p2 = make_problem({1, 4, 10}, {1, -1, 2});
    const double fstar = objective(p2, p2.x_star);
    CHECK(fstar == Approx(-0.5 * (1 + 4 + 40)).epsilon(1e-15));
    CHECK(fstar == Approx(objective_minimum(p2)).epsilon(1e-15));

    // 2 [f - f*] = (A^{-1} g, g), both sides evaluated independently
    const Vec x{1, 1};
    const Vec g = gradient(p, x);
    CHECK(2.0 * (objective(p, x) - objective(p, p.x_star)) ==
          Approx(dot(apply_power(p, g, -1), g)).epsilon(1e-13));
    CHECK(dot(apply_power(p, g, -1), g) == Approx(3.0).epsilon(1e-15));
}

TEST_CASE("apply_power") {
    const auto p = make_problem({1, 2}, {0, 0});
    CHECK(apply_power(p, {3, -4}, 0) == Vec{3, -4});
    CHECK(apply_power(p, {1, 1}, -1) == Vec{1, 0.5});

    const auto p3 = make_problem({1, 4, 10}, {0, 0, 0});
    CHECK(apply_power(p3, {1, 1, 1}, 2) == Vec{1, 16, 100});
}

TEST_CASE("condition_number") {
    CHECK(condition_number(make_problem({1, 10}, {0, 0})) == Approx(10.0));
    CHECK(condition_number(make_problem({1, 2}, {0, 0})) == Approx(2.0));
}

TEST_CASE("quadratic core properties on random problems") {
    TrialRng rng(99, 0);
    for (int t = 0; t < 50; ++t) {
        const std::size_t d = 2 + static_cast<std::size_t>(rng.next_u64() % 9);
        const auto p = random_problem(rng, d, 100.0);
        Vec x(d);
        for (double& v : x) v = rng.uniform(-3.0, 3.0);

        // gradient vanishes exactly at the minimizer
        CHECK(gradient(p, p.x_star) == Vec(d, 0.0));

        // 2 [f(x) - f(x*)] = (A^{-1} g, g)
        const Vec g = gradient(p, x);
        const double lhs = 2.0 * (objective(p, x) - objective(p, p.x_star));
        const double rhs = dot(apply_power(p, g, -1), g);
        if (rhs > 1e-12)
            CHECK(lhs == Approx(rhs).epsilon(1e-12));

        // f(x) >= f(x*)
        CHECK(objective(p, x) >= objective(p, p.x_star) - 1e-12);

        // apply_power roundtrip
        const int k = static_cast<int>(rng.next_u64() % 7) - 3;
        const Vec back = apply_power(p, apply_power(p, x, k), -k);
        for (std::size_t i = 0; i < d; ++i)
            CHECK(back[i] == Approx(x[i]).epsilon(1e-12).margin(1e-300));
    }
}
