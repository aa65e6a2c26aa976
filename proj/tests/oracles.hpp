#pragma once

// Test-only oracles, kept independent of the library's integrators.

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "odeimbd/types.hpp"

namespace oracles {

using odeimbd::cplx;

/**
 * Fixed-step Taylor-recurrence integrator for
 *   y''' - g(g+2)(y'/x^2 - y/x^3) + psign (x^{3a} - E) y = 0
 * marched along the real axis. Independent of the adaptive GBS transport.
 */
struct TaylorThirdOrder {
    double g = 0.0;
    double three_alpha = 3.0;
    cplx E{};
    double psign = 1.0;
    int order = 26;

    // Taylor coefficients of p(x) = x^{3a} - E about x0
    std::vector<cplx> p_coeffs(double x0, int K) const {
        std::vector<cplx> p(K + 1, 0.0);
        if (std::abs(three_alpha - std::round(three_alpha)) < 1e-12) {
            const int M = int(std::round(three_alpha));
            double binom = 1.0;
            for (int k = 0; k <= std::min(M, K); ++k) {
                p[k] = binom * std::pow(x0, M - k);
                binom *= double(M - k) / double(k + 1);
            }
        } else {
            if (!(x0 > 0.0)) throw std::domain_error("TaylorThirdOrder: x0 must be positive");
            double c = 1.0;
            for (int k = 0; k <= K; ++k) {
                p[k] = c * std::pow(x0, three_alpha - k);
                c *= (three_alpha - k) / double(k + 1);
            }
        }
        p[0] -= E;
        return p;
    }

    void step(double x0, double h, std::array<cplx, 3>& Y) const {
        const int K = order;
        std::vector<cplx> b(K + 4, 0.0);
        b[0] = Y[0];
        b[1] = Y[1];
        b[2] = Y[2] / 2.0;
        const double gg = g * (g + 2.0);

        std::vector<double> i2(K + 1, 0.0), i3(K + 1, 0.0);
        const bool at_origin = (x0 == 0.0);
        if (!at_origin) {
            for (int k = 0; k <= K; ++k) {
                const double sgn = (k % 2) ? -1.0 : 1.0;
                i2[k] = sgn * (k + 1) / std::pow(x0, k + 2);
                i3[k] = sgn * (k + 1) * (k + 2) / 2.0 / std::pow(x0, k + 3);
            }
        } else if (gg != 0.0) {
            throw std::domain_error("TaylorThirdOrder: singular point needs g(g+2) = 0");
        }
        const std::vector<cplx> p = p_coeffs(x0, K);

        for (int n = 0; n + 3 <= K + 3; ++n) {
            cplx rhs = 0.0;
            for (int k = 0; k <= n; ++k) {
                const cplx yk = b[k];
                const cplx dyk = double(k + 1) * b[k + 1];
                if (!at_origin) rhs += gg * (i2[n - k] * dyk - i3[n - k] * yk);
                rhs -= psign * p[n - k] * yk;
            }
            b[n + 3] = rhs / double((n + 1) * (n + 2) * (n + 3));
        }

        cplx y = 0.0, dy = 0.0, ddy = 0.0;
        for (int n = K + 3; n >= 0; --n) {
            y = y * h + b[n];
            if (n >= 1) dy = dy * h + double(n) * b[n];
            if (n >= 2) ddy = ddy * h + double(n) * (n - 1) * b[n];
        }
        Y = {y, dy, ddy};
    }

    /** March from x0 to x1 (either direction) in steps of at most hmax. */
    std::array<cplx, 3> integrate(double x0, double x1, std::array<cplx, 3> Y,
                                  double hmax = 0.15) const {
        const double dir = x1 > x0 ? 1.0 : -1.0;
        double x = x0;
        while (dir * (x1 - x) > 1e-14) {
            double h = dir * std::min(hmax, dir * (x1 - x));
            if (x != 0.0) h = dir * std::min(std::abs(h), 0.35 * std::abs(x));
            step(x, h, Y);
            x += h;
        }
        return Y;
    }
};

/** Centered finite difference of a scalar function, for derivative oracles. */
template <class F>
double central_diff(F&& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace oracles
