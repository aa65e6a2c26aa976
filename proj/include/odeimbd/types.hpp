#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace odeimbd {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.141592653589793238462643383279502884;

/** Thrown when parameters sit on (or within 1e-6 of) an exponent resonance. */
struct ResonanceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/** Thrown when a solver fails to reach its tolerance. */
struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/**
 * The triple (alpha, g, s): exponent of the potential p(z) = z^{3 alpha} - s^{3 alpha},
 * coupling of the origin singularity, and the scale parameter.
 */
struct ModelParams {
    double alpha = 1.0;
    double g = 0.1;
    double s = 1.0;

    // needs_wkb: large-rho asymptotic data is requested, which requires alpha > 1/2.
    void validate(bool needs_wkb = false) const {
        if (!(alpha > 0.0)) throw std::invalid_argument("ModelParams: alpha must be positive");
        if (needs_wkb && !(alpha > 0.5))
            throw std::invalid_argument("ModelParams: alpha must exceed 1/2 for WKB initial data");
        if (!(g > -1.0 && g < 0.5))
            throw std::invalid_argument("ModelParams: g must lie in (-1, 1/2)");
        if (!(s >= 0.0)) throw std::invalid_argument("ModelParams: s must be non-negative");
    }
};

inline bool nearly_integer(double x, double tol = 1e-12) {
    return std::abs(x - std::round(x)) < tol;
}

/** p(z) = z^{3 alpha} - s^{3 alpha} on the principal branch. */
inline cplx potential(cplx z, const ModelParams& p) {
    const double m = 3.0 * p.alpha;
    const double smu = p.s > 0.0 ? std::pow(p.s, m) : 0.0;
    if (z == cplx(0.0, 0.0)) return cplx(-smu, 0.0);
    if (!nearly_integer(m) && z.imag() == 0.0 && z.real() < 0.0)
        throw std::domain_error("potential: z on the branch cut (negative real axis) with non-integer 3*alpha");
    return std::pow(z, m) - smu;
}

/** omega = exp(2 pi i / (3 alpha + 3)). */
inline cplx omega(double alpha) {
    if (!(alpha > 0.0)) throw std::invalid_argument("omega: alpha must be positive");
    const double t = 2.0 * kPi / (3.0 * alpha + 3.0);
    return cplx(std::cos(t), std::sin(t));
}

/** omega^p for real p, kept in exp form so half-integer powers stay branch-free. */
inline cplx omega_pow(double alpha, double p) {
    const double t = 2.0 * kPi * p / (3.0 * alpha + 3.0);
    return cplx(std::cos(t), std::sin(t));
}

/**
 * Spectral point: theta with lambda = e^theta and the scaled pair
 * E = s^{3a} e^{3 theta a/(a+1)}, Etilde = s^{3a} e^{-3 theta a/(a+1)}.
 */
struct SpectralPoint {
    cplx theta;
    cplx E;
    cplx Etilde;
};

inline SpectralPoint scaling_map(cplx theta, const ModelParams& p) {
    if (!(p.s > 0.0)) throw std::invalid_argument("scaling_map: degenerate at s = 0");
    const double smu = std::pow(p.s, 3.0 * p.alpha);
    const cplx w = 3.0 * p.alpha / (p.alpha + 1.0) * theta;
    return SpectralPoint{theta, smu * std::exp(w), smu * std::exp(-w)};
}

/** E(theta) in the conformal problem, where the scale s has been sent to zero. */
inline cplx conformal_E_of_theta(cplx theta, double alpha) {
    return std::exp(3.0 * alpha / (alpha + 1.0) * theta);
}

inline cplx conformal_theta_of_E(cplx E, double alpha) {
    return (alpha + 1.0) / (3.0 * alpha) * std::log(E);
}

/**
 * Distance of the parameter pair to the nearest exponent degeneracy of the
 * small-rho expansion: collision of the (g+1)- and (1-2g)-families with each
 * other or with the harmonic lattice {3m + 3 alpha n}.
 */
inline double resonance_margin(double alpha, double g, double span = 40.0) {
    double margin = std::abs(3.0 * g);  // (g+1) vs (1-2g) family collision
    const double probes[] = {g + 1.0, 1.0 - 2.0 * g, 2.0 * g + 2.0, 2.0 - 4.0 * g};
    for (double q : probes) {
        for (int m = 0; 3.0 * m <= span; ++m) {
            for (int n = 0; 3.0 * m + 3.0 * alpha * n <= span; ++n) {
                if (m == 0 && n == 0) continue;
                margin = std::min(margin, std::abs(q - (3.0 * m + 3.0 * alpha * n)));
            }
        }
    }
    return margin;
}

inline void require_nonresonant(double alpha, double g, double tol = 1e-6) {
    const double m = resonance_margin(alpha, g);
    if (m < tol)
        throw ResonanceError("parameters within " + std::to_string(m) +
                             " of an exponent resonance (threshold " + std::to_string(tol) + ")");
}

/**
 * Connection coefficients at one spectral point. `gauge` records the frame
 * normalization: "Psi0-unit" (massive frame), "paper" (asy-normalized scalar
 * against unit chi's), or "chi-unit" (conformal).
 */
struct QTriple {
    cplx theta{};
    cplx q_plus{}, q_zero{}, q_minus{};
    std::string gauge;
    double cond = 0.0;          // condition number of the projection
    double drift = 0.0;         // relative change under rho_min -> 2 rho_min
    double fit_residual = 0.0;  // rho_max-extrapolation residual (massive only)

    cplx get(int which) const {  // +1, 0, -1
        return which > 0 ? q_plus : (which < 0 ? q_minus : q_zero);
    }
};

}  // namespace odeimbd
