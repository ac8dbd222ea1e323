#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pgrad/spectrum.hpp"

namespace pgrad {

using GradientOracle = std::function<Vec(const Vec&)>;

/// Number of gradient evaluations one iteration needs when P(A) = A^q,
/// including the evaluation at the current point: ceil(q/2) + 2 for q >= 0.
/// q = -1 (steepest descent) is reported as 1, since the step length can be
/// found from the gradient at x_k alone together with objective values.
inline int gradient_eval_count(int q) {
    if (q < -1) throw std::invalid_argument("gradient_eval_count: q >= -1 required");
    if (q == -1) return 1;
    return (q + 1) / 2 + 2;
}

/// Estimates (A^n g, g) for n = 0..n_max from gradient evaluations only.
/// Walks x^{(i+1)} = x^{(i)} - beta g(x^{(i)}), pairs the gradients as
/// P_{2j} = (g^{(j)}, g^{(j)}), P_{2j+1} = (g^{(j+1)}, g^{(j)}), and solves the
/// lower-triangular binomial system. Calls the oracle ceil(n_max/2) + 1 times,
/// the call at x itself included; pass g0 = g(x) when already known to skip
/// that first call.
inline std::vector<double> estimate_inner_products(const GradientOracle& oracle, const Vec& x,
                                                   int n_max, double beta,
                                                   const Vec* g0 = nullptr) {
    if (n_max < 0) throw std::invalid_argument("estimate_inner_products: n_max >= 0 required");
    if (!(beta > 0.0)) throw std::invalid_argument("estimate_inner_products: beta > 0 required");

    const int j_max = (n_max + 1) / 2;  // highest gradient index needed
    std::vector<Vec> g(static_cast<std::size_t>(j_max) + 1);
    Vec xi = x;
    for (int i = 0; i <= j_max; ++i) {
        g[static_cast<std::size_t>(i)] = (i == 0 && g0) ? *g0 : oracle(xi);
        if (i < j_max) {
            const Vec& gi = g[static_cast<std::size_t>(i)];
            for (std::size_t c = 0; c < xi.size(); ++c) xi[c] -= beta * gi[c];
        }
    }

    std::vector<double> P(static_cast<std::size_t>(n_max) + 1);
    for (int i = 0; i <= n_max; ++i) {
        const int j = i / 2;
        P[static_cast<std::size_t>(i)] =
            (i % 2 == 0) ? dot(g[static_cast<std::size_t>(j)], g[static_cast<std::size_t>(j)])
                         : dot(g[static_cast<std::size_t>(j + 1)], g[static_cast<std::size_t>(j)]);
    }

    // forward substitution on P = Q G, Q[i][j] = C(i,j) (-beta)^j
    std::vector<double> G(P.size());
    std::vector<double> binom(P.size(), 0.0);  // current Pascal row
    for (int i = 0; i <= n_max; ++i) {
        for (int j = i; j >= 1; --j)
            binom[static_cast<std::size_t>(j)] =
                binom[static_cast<std::size_t>(j)] + binom[static_cast<std::size_t>(j - 1)];
        binom[0] = 1.0;
        double acc = P[static_cast<std::size_t>(i)];
        for (int j = 0; j < i; ++j)
            acc -= binom[static_cast<std::size_t>(j)] * int_pow(-beta, j) *
                   G[static_cast<std::size_t>(j)];
        G[static_cast<std::size_t>(i)] = acc / int_pow(-beta, i);
        if (!std::isfinite(G[static_cast<std::size_t>(i)]))
            throw std::runtime_error("estimate_inner_products: ill-conditioned (extreme beta)");
    }
    return G;
}

struct OracleStepLength {
    double gamma = 0;
    int oracle_calls = 0;
};

/// Drives the P(A) = A^q iteration through a gradient oracle alone, never
/// reading the operator. The walk length beta defaults to the previous step's
/// gamma; one iteration spends ceil(q/2) + 2 gradient evaluations, the one at
/// x_k included.
class OracleStepper {
public:
    OracleStepper(GradientOracle oracle, int q, double beta0)
        : oracle_(std::move(oracle)), q_(q), beta_(beta0) {
        if (q < 0) throw std::invalid_argument("OracleStepper: q >= 0 required");
        if (!(beta0 > 0.0)) throw std::invalid_argument("OracleStepper: beta0 > 0 required");
    }

    Vec step(const Vec& x) {
        ++total_calls_;
        const Vec g = oracle_(x);
        const std::vector<double> G =
            estimate_inner_products([this](const Vec& v) { ++total_calls_; return oracle_(v); },
                                    x, q_ + 2, beta_, &g);
        const double num = G[static_cast<std::size_t>(q_ + 1)];
        const double den = G[static_cast<std::size_t>(q_ + 2)];
        if (!(num > 0.0)) throw std::domain_error("OracleStepper: zero gradient");
        last_gamma_ = num / den;
        beta_ = last_gamma_;  // next estimation walks with the step just taken
        Vec next = x;
        for (std::size_t i = 0; i < next.size(); ++i) next[i] -= last_gamma_ * g[i];
        return next;
    }

    double last_gamma() const { return last_gamma_; }
    int total_oracle_calls() const { return total_calls_; }

private:
    GradientOracle oracle_;
    int q_;
    double beta_;
    double last_gamma_ = 0;
    int total_calls_ = 0;
};

/// Step length for P(A) = A^q computed through the gradient oracle alone;
/// needs (A^n g, g) for n = q..q+2 and reports the calls actually used.
inline OracleStepLength step_length_via_oracle(const GradientOracle& oracle, const Vec& x, int q,
                                               double beta) {
    if (q < -1) throw std::invalid_argument("step_length_via_oracle: q >= -1 required");
    int calls = 0;
    GradientOracle counted = [&](const Vec& v) {
        ++calls;
        return oracle(v);
    };
    // q = -1: gamma = (g,g)/(Ag,g), so n_max = 1 suffices.
    const int n_max = q + 2;
    std::vector<double> G = estimate_inner_products(counted, x, std::max(n_max, 1), beta);
    const double num = (q == -1) ? G[0] : G[static_cast<std::size_t>(q + 1)];
    const double den = (q == -1) ? G[1] : G[static_cast<std::size_t>(q + 2)];
    if (!(num > 0.0)) throw std::domain_error("step_length_via_oracle: zero gradient");
    return {num / den, calls};
}

}  // namespace pgrad
