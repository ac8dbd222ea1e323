#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pgrad/pspec.hpp"
#include "pgrad/spectrum.hpp"

namespace pgrad {

/// Masses this small are treated as having left the measure entirely.
inline constexpr double kMassFloor = 1e-300;

struct Atom {
    double lambda;
    double mass;
};

/// Discrete probability measure on the spectrum. Atoms are kept sorted with
/// distinct lambdas (exactly equal eigenvalues are merged by summing masses).
/// The support is fixed under the dynamics: atoms may carry zero mass.
class SpectralMeasure {
public:
    static SpectralMeasure from_atoms(std::vector<Atom> atoms) {
        if (atoms.empty()) throw std::invalid_argument("SpectralMeasure: no atoms");
        for (const Atom& a : atoms) {
            if (!(a.lambda > 0.0) || !std::isfinite(a.lambda))
                throw std::invalid_argument("SpectralMeasure: lambda must be positive finite");
            if (a.mass < 0.0 || !std::isfinite(a.mass))
                throw std::invalid_argument("SpectralMeasure: negative or non-finite mass");
        }
        std::sort(atoms.begin(), atoms.end(),
                  [](const Atom& a, const Atom& b) { return a.lambda < b.lambda; });
        SpectralMeasure nu;
        for (const Atom& a : atoms) {
            if (!nu.lambda_.empty() && a.lambda == nu.lambda_.back()) {
                nu.mass_.back() += a.mass;  // merge equal eigenvalues
            } else {
                nu.lambda_.push_back(a.lambda);
                nu.mass_.push_back(a.mass);
            }
        }
        nu.normalize();
        return nu;
    }

    /// nu_p*: mass p at m, 1-p at M.
    static SpectralMeasure two_point(double p, double m, double M) {
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("two_point: p outside [0,1]");
        return from_atoms({{m, p}, {M, 1.0 - p}});
    }

    std::size_t size() const { return lambda_.size(); }
    double lambda(std::size_t i) const { return lambda_[i]; }
    double mass(std::size_t i) const { return mass_[i]; }
    const std::vector<double>& lambdas() const { return lambda_; }
    const std::vector<double>& masses() const { return mass_; }

    bool has_amplitudes() const { return !amplitude_.empty(); }
    double amplitude(std::size_t i) const { return amplitude_[i]; }
    void set_amplitudes(std::vector<double> z) {
        if (z.size() != lambda_.size())
            throw std::invalid_argument("set_amplitudes: size mismatch");
        amplitude_ = std::move(z);
    }
    void drop_amplitudes() { amplitude_.clear(); }

    double total_mass() const {
        double s = 0.0;
        for (double w : mass_) s += w;
        return s;
    }

    /// mu_j = sum_i w_i lambda_i^j for any integer j.
    double moment(int j) const {
        double s = 0.0;
        for (std::size_t i = 0; i < lambda_.size(); ++i) s += mass_[i] * int_pow(lambda_[i], j);
        return s;
    }

    double mean() const {
        double s = 0.0;
        for (std::size_t i = 0; i < lambda_.size(); ++i) s += mass_[i] * lambda_[i];
        return s;
    }

    /// Two-pass variance; equals mu_2 - mu_1^2 without the cancellation.
    double variance() const {
        const double mu1 = mean();
        double s = 0.0;
        for (std::size_t i = 0; i < lambda_.size(); ++i) {
            const double d = lambda_[i] - mu1;
            s += mass_[i] * d * d;
        }
        return s;
    }

    /// Support reduced to a single point (D = 0): the dynamics has terminated.
    bool is_degenerate() const {
        std::size_t positive = 0;
        for (double w : mass_) positive += (w > 0.0) ? 1u : 0u;
        return positive <= 1;
    }

    void normalize() {
        double s = total_mass();
        if (!(s > 0.0) || !std::isfinite(s))
            throw std::invalid_argument("SpectralMeasure: total mass must be positive finite");
        for (double& w : mass_) {
            w /= s;
            if (w < kMassFloor) w = 0.0;
        }
        // renormalize once more after clamping so the total is exactly restored
        s = total_mass();
        for (double& w : mass_) w /= s;
        if (!amplitude_.empty()) {
            for (std::size_t i = 0; i < mass_.size(); ++i) {
                const double sign = amplitude_[i] < 0.0 ? -1.0 : 1.0;
                amplitude_[i] = sign * std::sqrt(mass_[i]);
            }
        }
    }

private:
    std::vector<double> lambda_;
    std::vector<double> mass_;
    std::vector<double> amplitude_;  // optional signed z-coordinates, z_i^2 = w_i
};

/// Moments mu_j for j in {-1, 0, 1, 2, 3, 4}.
struct MomentVector {
    double mu_m1 = 0, mu0 = 1, mu1 = 0, mu2 = 0, mu3 = 0, mu4 = 0;

    double at(int j) const {
        switch (j) {
            case -1: return mu_m1;
            case 0: return mu0;
            case 1: return mu1;
            case 2: return mu2;
            case 3: return mu3;
            case 4: return mu4;
        }
        throw std::invalid_argument("MomentVector::at: j outside [-1,4]");
    }
};

inline MomentVector moments(const SpectralMeasure& nu) {
    MomentVector mv;
    double m_m1 = 0, m0 = 0, m1 = 0, m2 = 0, m3 = 0, m4 = 0;
    for (std::size_t i = 0; i < nu.size(); ++i) {
        const double w = nu.mass(i), lam = nu.lambda(i);
        m_m1 += w / lam;
        m0 += w;
        const double wl = w * lam;
        m1 += wl;
        m2 += wl * lam;
        m3 += wl * lam * lam;
        m4 += wl * lam * lam * lam;
    }
    mv.mu_m1 = m_m1;
    mv.mu0 = m0;
    mv.mu1 = m1;
    mv.mu2 = m2;
    mv.mu3 = m3;
    mv.mu4 = m4;
    return mv;
}

struct Diagnostics {
    double L = 0;     // mu_1 mu_{-1}
    double D = 0;     // mu_2 - mu_1^2
    double r = 0;     // 1 - 1/L
    double detM = 0;  // Hankel determinant on mu_{-1}..mu_3
    double detN = 0;  // Hankel determinant on mu_0..mu_4
};

namespace detail {

/// det of the moment matrix via the expansion over eigenvalue triples
/// (sum of non-negative terms, no cancellation). with_inverse_weight selects
/// the mu_{-1}-anchored matrix (divide each term by lambda_i lambda_j lambda_l).
inline double hankel_det_triple_sum(const SpectralMeasure& nu, bool with_inverse_weight) {
    const std::size_t n = nu.size();
    double s = 0.0;
    for (std::size_t i = 0; i + 2 < n; ++i) {
        if (nu.mass(i) == 0.0) continue;
        for (std::size_t j = i + 1; j + 1 < n; ++j) {
            if (nu.mass(j) == 0.0) continue;
            const double dij = nu.lambda(i) - nu.lambda(j);
            const double wij = nu.mass(i) * nu.mass(j) * dij * dij;
            for (std::size_t l = j + 1; l < n; ++l) {
                if (nu.mass(l) == 0.0) continue;
                const double dil = nu.lambda(i) - nu.lambda(l);
                const double djl = nu.lambda(j) - nu.lambda(l);
                double t = wij * nu.mass(l) * dil * dil * djl * djl;
                if (with_inverse_weight) t /= nu.lambda(i) * nu.lambda(j) * nu.lambda(l);
                s += t;
            }
        }
    }
    return s;
}

inline double det3(double a00, double a01, double a02, double a10, double a11, double a12,
                   double a20, double a21, double a22) {
    return a00 * (a11 * a22 - a12 * a21) - a01 * (a10 * a22 - a12 * a20) +
           a02 * (a10 * a21 - a11 * a20);
}

}  // namespace detail

/// Above this support size the determinant triple sum is too expensive and the
/// direct 3x3 evaluation is used instead.
inline constexpr std::size_t kTripleSumMaxAtoms = 64;

inline Diagnostics diagnostics(const SpectralMeasure& nu) {
    const MomentVector mv = moments(nu);
    Diagnostics d;
    d.L = mv.mu1 * mv.mu_m1;
    d.D = nu.variance();
    d.r = 1.0 - 1.0 / d.L;
    if (nu.size() <= kTripleSumMaxAtoms) {
        d.detM = detail::hankel_det_triple_sum(nu, true);
        d.detN = detail::hankel_det_triple_sum(nu, false);
    } else {
        d.detM = detail::det3(mv.mu_m1, mv.mu0, mv.mu1, mv.mu0, mv.mu1, mv.mu2, mv.mu1, mv.mu2,
                              mv.mu3);
        d.detN = detail::det3(mv.mu0, mv.mu1, mv.mu2, mv.mu1, mv.mu2, mv.mu3, mv.mu2, mv.mu3,
                              mv.mu4);
    }
    return d;
}

/// One application of the measure transformation T:
/// w'_i = (lambda_i - mu_1)^2 w_i / D, renormalized. Amplitudes, when present,
/// follow the signed z-update.
inline SpectralMeasure transform(const SpectralMeasure& nu) {
    if (nu.is_degenerate())
        throw std::domain_error("transform: degenerate measure (finite convergence)");
    const double mu1 = nu.mean();
    const double D = nu.variance();
    if (!(D > 0.0))
        throw std::domain_error("transform: degenerate measure (finite convergence)");

    std::vector<Atom> atoms(nu.size());
    for (std::size_t i = 0; i < nu.size(); ++i) {
        const double diff = nu.lambda(i) - mu1;
        atoms[i] = {nu.lambda(i), diff * diff * nu.mass(i) / D};
    }
    SpectralMeasure out = SpectralMeasure::from_atoms(std::move(atoms));
    if (nu.has_amplitudes()) {
        std::vector<double> z(out.size());
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double sign_update = (1.0 - out.lambda(i) / mu1) < 0.0 ? -1.0 : 1.0;
            const double sign_old = nu.amplitude(i) < 0.0 ? -1.0 : 1.0;
            z[i] = sign_update * sign_old * std::sqrt(out.mass(i));
        }
        out.set_amplitudes(std::move(z));
    }
    return out;
}

/// Moment update of the transformation without touching the measure:
/// mu'_j = (mu_j - 2 mu_{j+1}/mu_1 + mu_{j+2}/mu_1^2) / (mu_2/mu_1^2 - 1).
/// mu_5 and mu_6 are needed to update mu_3 and mu_4.
inline MomentVector moment_update(const MomentVector& mv, double mu5, double mu6) {
    const double mu1 = mv.mu1;
    const double denom = mv.mu2 / (mu1 * mu1) - 1.0;
    if (!(denom > 0.0)) throw std::domain_error("moment_update: degenerate measure (D = 0)");
    const double ext[8] = {mv.mu_m1, mv.mu0, mv.mu1, mv.mu2, mv.mu3, mv.mu4, mu5, mu6};
    auto upd = [&](int j) {
        const double a = ext[j + 1], b = ext[j + 2], c = ext[j + 3];
        return (a - 2.0 * b / mu1 + c / (mu1 * mu1)) / denom;
    };
    MomentVector out;
    out.mu_m1 = upd(-1);
    out.mu0 = upd(0);
    out.mu1 = upd(1);
    out.mu2 = upd(2);
    out.mu3 = upd(3);
    out.mu4 = upd(4);
    return out;
}

/// Renormalized measure of a gradient direction: mass at lambda_i proportional
/// to P(lambda_i) lambda_i g_i^2; signed amplitudes are tracked.
inline SpectralMeasure renormalize_gradient(const QuadraticProblem& p, const PSpec& ps,
                                            const Vec& g) {
    check_dim(p, g, "renormalize_gradient");
    double total = 0.0;
    std::vector<double> weight(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double lam = p.spectrum.lambda(i);
        weight[i] = ps.evaluate(lam) * lam * g[i] * g[i];
        total += weight[i];
    }
    if (!(total > 0.0)) throw std::domain_error("renormalize: zero gradient");

    // merge equal eigenvalues while remembering where each atom went
    std::vector<Atom> atoms(g.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        atoms[i] = {p.spectrum.lambda(i), weight[i] / total};
    SpectralMeasure nu = SpectralMeasure::from_atoms(std::move(atoms));

    // amplitudes: per distinct eigenvalue; sign taken from the summed signed weight
    std::vector<double> z(nu.size(), 0.0);
    std::vector<double> signed_sum(nu.size(), 0.0);
    std::size_t j = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        while (nu.lambda(j) != p.spectrum.lambda(i)) ++j;
        signed_sum[j] += g[i];
    }
    for (std::size_t k = 0; k < nu.size(); ++k)
        z[k] = (signed_sum[k] < 0.0 ? -1.0 : 1.0) * std::sqrt(nu.mass(k));
    nu.set_amplitudes(std::move(z));
    return nu;
}

inline SpectralMeasure renormalize(const QuadraticProblem& p, const PSpec& ps, const Vec& x) {
    return renormalize_gradient(p, ps, gradient(p, x));
}

/// Continuous-measure input: a positive density on [lo, hi] plus optional
/// point masses. The continuous part carries whatever mass the atoms leave.
struct DensitySpec {
    double lo = 0, hi = 0;
    std::function<double(double)> density;  // up to scale
    std::vector<Atom> point_masses;         // masses are absolute (sum <= 1)

    static DensitySpec uniform(double lo, double hi) {
        return DensitySpec{lo, hi, [](double) { return 1.0; }, {}};
    }
};

/// Midpoint-rule discretization on a uniform grid of [lo, hi]; point masses
/// pass through exactly.
inline SpectralMeasure discretize_continuous(const DensitySpec& spec, std::size_t n_atoms) {
    if (n_atoms < 2) throw std::invalid_argument("discretize_continuous: n_atoms >= 2 required");
    if (!(spec.lo < spec.hi))
        throw std::invalid_argument("discretize_continuous: empty interval");
    double atom_total = 0.0;
    for (const Atom& a : spec.point_masses) atom_total += a.mass;
    if (atom_total > 1.0 + 1e-12)
        throw std::invalid_argument("discretize_continuous: point masses exceed total mass 1");
    const double continuous_mass = std::max(0.0, 1.0 - atom_total);

    std::vector<Atom> atoms = spec.point_masses;
    if (continuous_mass > 0.0) {
        const double h = (spec.hi - spec.lo) / static_cast<double>(n_atoms);
        std::vector<double> vals(n_atoms);
        double sum = 0.0;
        for (std::size_t i = 0; i < n_atoms; ++i) {
            const double mid = spec.lo + h * (static_cast<double>(i) + 0.5);
            const double v = spec.density(mid);
            if (!(v > 0.0) || !std::isfinite(v))
                throw std::domain_error("discretize_continuous: density must be positive");
            vals[i] = v;
            sum += v;
        }
        for (std::size_t i = 0; i < n_atoms; ++i) {
            const double mid = spec.lo + h * (static_cast<double>(i) + 0.5);
            atoms.push_back({mid, continuous_mass * vals[i] / sum});
        }
    }
    return SpectralMeasure::from_atoms(std::move(atoms));
}

}  // namespace pgrad
