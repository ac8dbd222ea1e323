#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace pgrad {

using Vec = std::vector<double>;

inline double dot(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

/// Integer power with negative exponents allowed (base must be nonzero for k < 0).
inline double int_pow(double base, int k) {
    if (k == 0) return 1.0;
    const bool neg = k < 0;
    unsigned long e = neg ? static_cast<unsigned long>(-(static_cast<long>(k)))
                          : static_cast<unsigned long>(k);
    double acc = 1.0;
    double b = base;
    while (e > 0) {
        if (e & 1ul) acc *= b;
        b *= b;
        e >>= 1;
    }
    return neg ? 1.0 / acc : acc;
}

/// Eigenvalues of the operator in its diagonalizing basis, sorted ascending.
/// Duplicates are allowed; the spectral bounds must be strictly separated.
class Spectrum {
public:
    explicit Spectrum(Vec eigenvalues) : eig_(std::move(eigenvalues)) {
        if (eig_.size() < 2)
            throw std::invalid_argument("Spectrum: at least two eigenvalues required");
        for (std::size_t i = 0; i < eig_.size(); ++i) {
            if (!(eig_[i] > 0.0) || !std::isfinite(eig_[i]))
                throw std::invalid_argument("Spectrum: eigenvalues must be positive finite");
            if (i > 0 && eig_[i] < eig_[i - 1])
                throw std::invalid_argument("Spectrum: eigenvalues must be sorted ascending");
        }
        if (!(eig_.front() < eig_.back()))
            throw std::invalid_argument("Spectrum: degenerate spectrum (m == M) rejected");
    }

    std::size_t dim() const { return eig_.size(); }
    double lambda(std::size_t i) const { return eig_[i]; }
    const Vec& eigenvalues() const { return eig_; }
    double m() const { return eig_.front(); }
    double M() const { return eig_.back(); }

private:
    Vec eig_;
};

/// f(x) = 1/2 (Ax, x) - (x, y) with y = A x*, minimized at x*.
struct QuadraticProblem {
    Spectrum spectrum;
    Vec x_star;

    QuadraticProblem(Spectrum s, Vec xs) : spectrum(std::move(s)), x_star(std::move(xs)) {
        if (x_star.size() != spectrum.dim())
            throw std::invalid_argument("QuadraticProblem: x_star dimension mismatch");
    }

    std::size_t dim() const { return spectrum.dim(); }
};

inline void check_dim(const QuadraticProblem& p, const Vec& x, const char* who) {
    if (x.size() != p.dim())
        throw std::invalid_argument(std::string(who) + ": dimension mismatch");
}

inline Vec gradient(const QuadraticProblem& p, const Vec& x) {
    check_dim(p, x, "gradient");
    Vec g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        g[i] = p.spectrum.lambda(i) * (x[i] - p.x_star[i]);
    return g;
}

inline double objective(const QuadraticProblem& p, const Vec& x) {
    check_dim(p, x, "objective");
    double quad = 0.0, lin = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lam = p.spectrum.lambda(i);
        quad += lam * x[i] * x[i];
        lin += x[i] * lam * p.x_star[i];
    }
    return 0.5 * quad - lin;
}

inline double objective_minimum(const QuadraticProblem& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.dim(); ++i)
        s += p.spectrum.lambda(i) * p.x_star[i] * p.x_star[i];
    return -0.5 * s;
}

/// Coordinates of A^k v; k may be negative since the spectrum is bounded below.
inline Vec apply_power(const QuadraticProblem& p, const Vec& v, int k) {
    check_dim(p, v, "apply_power");
    Vec out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        out[i] = int_pow(p.spectrum.lambda(i), k) * v[i];
    return out;
}

inline double condition_number(const QuadraticProblem& p) {
    return p.spectrum.M() / p.spectrum.m();
}

}  // namespace pgrad
