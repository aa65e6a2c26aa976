#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "odeimbd/types.hpp"

namespace odeimbd {

using Vec3 = std::array<cplx, 3>;
using Mat3 = std::array<std::array<cplx, 3>, 3>;

inline Vec3 matvec(const Mat3& A, const Vec3& v) {
    Vec3 r;
    for (int i = 0; i < 3; ++i)
        r[i] = A[i][0] * v[0] + A[i][1] * v[1] + A[i][2] * v[2];
    return r;
}

inline cplx det3(const Mat3& A) {
    return A[0][0] * (A[1][1] * A[2][2] - A[1][2] * A[2][1]) -
           A[0][1] * (A[1][0] * A[2][2] - A[1][2] * A[2][0]) +
           A[0][2] * (A[1][0] * A[2][1] - A[1][1] * A[2][0]);
}

/** Solve A x = b by partial-pivot elimination. Returns an inf-norm condition estimate. */
inline double solve3(Mat3 A, Vec3 b, Vec3& x) {
    double anorm = 0.0;
    for (int i = 0; i < 3; ++i)
        anorm = std::max(anorm, std::abs(A[i][0]) + std::abs(A[i][1]) + std::abs(A[i][2]));
    for (int c = 0; c < 3; ++c) {
        int piv = c;
        for (int r = c + 1; r < 3; ++r)
            if (std::abs(A[r][c]) > std::abs(A[piv][c])) piv = r;
        if (piv != c) {
            std::swap(A[piv], A[c]);
            std::swap(b[piv], b[c]);
        }
        if (std::abs(A[c][c]) == 0.0) return std::numeric_limits<double>::infinity();
        for (int r = c + 1; r < 3; ++r) {
            const cplx f = A[r][c] / A[c][c];
            for (int j = c; j < 3; ++j) A[r][j] -= f * A[c][j];
            b[r] -= f * b[c];
        }
    }
    for (int r = 2; r >= 0; --r) {
        cplx acc = b[r];
        for (int j = r + 1; j < 3; ++j) acc -= A[r][j] * x[j];
        x[r] = acc / A[r][r];
    }
    // ||A^-1||_inf estimated from the triangular factor only; adequate as a diagnostic
    double ainv = 0.0;
    for (int k = 0; k < 3; ++k) {
        cplx y[3] = {0.0, 0.0, 0.0};
        for (int r = 2; r >= 0; --r) {
            cplx acc = (r == k) ? cplx(1.0) : cplx(0.0);
            for (int j = r + 1; j < 3; ++j) acc -= A[r][j] * y[j];
            y[r] = acc / A[r][r];
        }
        ainv = std::max(ainv, std::abs(y[0]) + std::abs(y[1]) + std::abs(y[2]));
    }
    return anorm * ainv;
}

/**
 * Trajectory of a 3-component linear transport along a real parameter.
 * True state at t[i] is v[i] * exp(logscale[i]); carrying the scale separately
 * keeps exp(-x^{a+1}/(a+1))-sized data inside double range.
 */
struct RayTrajectory {
    std::vector<double> t;
    std::vector<Vec3> v;
    std::vector<double> logscale;
    double achieved_tol = 0.0;
    long n_steps = 0;
    long n_evals = 0;

    Vec3 state(std::size_t i) const {
        const double f = std::exp(logscale[i]);
        return {v[i][0] * f, v[i][1] * f, v[i][2] * f};
    }
};

struct IntegrateOptions {
    double rtol = 1e-11;
    double atol = 1e-300;
    long max_steps = 2'000'000;
    double initial_step = 0.0;  // 0 = auto
};

namespace detail {

// One Gragg modified-midpoint pass over [t, t+H] with n substeps (n even).
template <class MatFn>
inline Vec3 gragg_midpoint(MatFn&& A, double t, double H, const Vec3& y0, int n, long& evals) {
    const double h = H / n;
    auto f = [&](double tt, const Vec3& y) {
        Mat3 M;
        A(tt, M);
        Vec3 r = matvec(M, y);
        for (auto& c : r) c = -c;  // dv/dt = -A v
        return r;
    };
    Vec3 zm = y0;
    Vec3 k = f(t, y0);
    ++evals;
    Vec3 z;
    for (int i = 0; i < 3; ++i) z[i] = y0[i] + h * k[i];
    for (int m = 1; m < n; ++m) {
        k = f(t + m * h, z);
        ++evals;
        Vec3 znext;
        for (int i = 0; i < 3; ++i) znext[i] = zm[i] + 2.0 * h * k[i];
        zm = z;
        z = znext;
    }
    k = f(t + H, z);
    ++evals;
    Vec3 out;
    for (int i = 0; i < 3; ++i) out[i] = 0.5 * (z[i] + zm[i] + h * k[i]);
    return out;
}

}  // namespace detail

/**
 * Adaptive Gragg-Bulirsch-Stoer transport of dv/dt = -A(t) v from t0 to t1
 * (either direction). `samples` must be monotone from t0 toward t1; the
 * trajectory records the state at each sample (t1 is always appended).
 *
 * MatFn: void(double t, Mat3& out).
 */
template <class MatFn>
inline RayTrajectory integrate_ray(MatFn&& A, double t0, double t1, Vec3 v0,
                                   const IntegrateOptions& opt = {},
                                   std::vector<double> samples = {},
                                   double logscale0 = 0.0) {
    if (t0 == t1) throw std::invalid_argument("integrate_ray: empty interval");
    if (!(opt.rtol > 0.0)) throw std::invalid_argument("integrate_ray: rtol must be positive");
    const double dir = t1 > t0 ? 1.0 : -1.0;
    for (std::size_t i = 0; i + 1 < samples.size(); ++i)
        if ((samples[i + 1] - samples[i]) * dir <= 0.0)
            throw std::invalid_argument("integrate_ray: samples must be monotone toward t1");
    if (samples.empty() || samples.back() != t1) samples.push_back(t1);

    static const int seq[] = {2, 4, 6, 8, 10, 12, 14, 16};
    constexpr int KMAX = 8;

    RayTrajectory traj;
    traj.t.reserve(samples.size());

    Vec3 y = v0;
    double logscale = logscale0;
    double t = t0;
    double H = opt.initial_step != 0.0 ? std::abs(opt.initial_step)
                                       : std::min(1.0, std::abs(t1 - t0) / 16.0);
    std::size_t isample = 0;
    long steps = 0;
    double worst = 0.0;

    auto renorm = [&]() {
        const double m = std::max({std::abs(y[0]), std::abs(y[1]), std::abs(y[2])});
        if (!std::isfinite(m) || m == 0.0)
            throw ConvergenceError("integrate_ray: non-finite or vanished state");
        if (m > 1e8 || m < 1e-8) {
            for (auto& c : y) c /= m;
            logscale += std::log(m);
        }
    };

    while (isample < samples.size()) {
        const double target = samples[isample];
        if ((target - t) * dir <= 1e-14 * std::max(1.0, std::abs(target))) {
            traj.t.push_back(target);
            traj.v.push_back(y);
            traj.logscale.push_back(logscale);
            ++isample;
            continue;
        }
        const double h = std::min(H, std::abs(target - t));
        if (h <= std::abs(t) * 1e-15 + 1e-305)
            throw ConvergenceError("integrate_ray: step underflow (stiffness)");

        // polynomial extrapolation in (H/n)^2; rows[j] = best value using j+1 passes
        std::vector<Vec3> prev;
        bool accepted = false;
        double err = 0.0;
        int used = 0;
        for (int kk = 0; kk < KMAX; ++kk) {
            std::vector<Vec3> cur(kk + 1);
            cur[0] = detail::gragg_midpoint(A, t, dir * h, y, seq[kk], traj.n_evals);
            for (int j = 1; j <= kk; ++j) {
                const double r = double(seq[kk]) / double(seq[kk - j]);
                const double den = r * r - 1.0;
                for (int i = 0; i < 3; ++i)
                    cur[j][i] = cur[j - 1][i] + (cur[j - 1][i] - prev[j - 1][i]) / den;
            }
            if (kk >= 1) {
                double scale = 0.0, diff = 0.0;
                for (int i = 0; i < 3; ++i) {
                    scale = std::max(scale, std::abs(cur[kk][i]));
                    diff = std::max(diff, std::abs(cur[kk][i] - cur[kk - 1][i]));
                }
                if (diff <= opt.rtol * std::max(scale, opt.atol)) {
                    y = cur[kk];
                    err = scale > 0.0 ? diff / scale : 0.0;
                    used = kk;
                    accepted = true;
                    break;
                }
            }
            prev = std::move(cur);
        }
        if (++steps > opt.max_steps)
            throw ConvergenceError("integrate_ray: max step count exceeded");
        if (!accepted) {
            H = h * 0.25;
            continue;
        }
        t += dir * h;
        worst = std::max(worst, err);
        renorm();
        const double grow = used <= 3 ? 1.9 : (used <= 5 ? 1.25 : 0.65);
        H = h * grow;
    }
    traj.achieved_tol = worst;
    traj.n_steps = steps;
    return traj;
}

}  // namespace odeimbd
