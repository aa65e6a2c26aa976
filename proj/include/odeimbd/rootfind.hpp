#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "odeimbd/types.hpp"

namespace odeimbd {

struct RootOptions {
    double tol = 1e-10;        // stop when |f| <= tol * |f(seed)|
    int max_iter = 80;
    double window = std::numeric_limits<double>::infinity();  // max |root - seed|
};

struct RootResult {
    cplx root{};
    cplx f_at_root{};
    double f_seed_abs = 0.0;
    int iterations = 0;
};

/**
 * Complex secant iteration from a seed (typically a grid minimum of |f|).
 * Succeeds when |f| drops below tol * |f(seed)|; throws ConvergenceError on
 * stagnation or when the iterate leaves the search window.
 */
inline RootResult find_zero(const std::function<cplx(cplx)>& f, cplx seed,
                            const RootOptions& opt = {}) {
    cplx x0 = seed;
    cplx f0 = f(x0);
    const double scale = std::abs(f0);
    if (scale == 0.0) return {x0, f0, 0.0, 0};
    const double target = opt.tol * scale;

    cplx x1 = x0 + 1e-4 * (1.0 + std::abs(x0));
    cplx f1 = f(x1);
    int it = 0;
    while (std::abs(f1) > target) {
        if (++it > opt.max_iter)
            throw ConvergenceError("find_zero: no convergence after max iterations");
        cplx df = f1 - f0;
        if (std::abs(df) == 0.0) {
            x1 += 1e-7 * (1.0 + std::abs(x1));
            f1 = f(x1);
            continue;
        }
        const cplx xn = x1 - f1 * (x1 - x0) / df;
        if (std::abs(xn - seed) > opt.window)
            throw ConvergenceError("find_zero: iterate escaped the search window");
        x0 = x1;
        f0 = f1;
        x1 = xn;
        f1 = f(x1);
        if (!std::isfinite(f1.real()) || !std::isfinite(f1.imag()))
            throw ConvergenceError("find_zero: non-finite function value");
    }
    return {x1, f1, scale, it};
}

/** Indices of strict local minima of |values| on a grid. */
inline std::vector<std::size_t> grid_minima(const std::vector<double>& absvals) {
    std::vector<std::size_t> out;
    for (std::size_t i = 1; i + 1 < absvals.size(); ++i)
        if (absvals[i] < absvals[i - 1] && absvals[i] < absvals[i + 1]) out.push_back(i);
    return out;
}

}  // namespace odeimbd
