#pragma once

#include <array>
#include <cmath>
#include <map>
#include <vector>

#include "odeimbd/integrate.hpp"
#include "odeimbd/series.hpp"
#include "odeimbd/types.hpp"

namespace odeimbd {

/** Parameters of the conformal-limit spectral problem
 *  y''' - g(g+2)(y'/x^2 - y/x^3) + (x^{3a} - E) y = 0. */
struct ConformalParams {
    double alpha = 1.0;
    double g = 0.1;

    void validate(bool needs_wkb = true) const {
        if (needs_wkb && !(alpha > 0.5))
            throw std::invalid_argument("ConformalParams: alpha must exceed 1/2");
        if (!(alpha > 0.0)) throw std::invalid_argument("ConformalParams: alpha must be positive");
        if (!(g > -1.0 && g < 0.5))
            throw std::invalid_argument("ConformalParams: g must lie in (-1, 1/2)");
    }
};

/** Sector S_k: |arg x - 2 pi k/(3a+3)| < pi/(3a+3); k half-integer, stored as 2k. */
struct StokesSector {
    double alpha = 1.0;
    int twok = 0;

    double center() const { return 2.0 * kPi * (twok / 2.0) / (3.0 * alpha + 3.0); }
    double halfwidth() const { return kPi / (3.0 * alpha + 3.0); }
    bool contains(double arg) const { return std::abs(arg - center()) < halfwidth(); }
};

/** Angular bound of the subdominant asymptotics, |arg x| < 4 pi/(3a+3). */
inline double sibuya_sector_halfwidth(double alpha) { return 4.0 * kPi / (3.0 * alpha + 3.0); }

/**
 * Asymptotic expansion of the log-derivative q = -y'/y of the subdominant
 * solution, q^3 - 3 q q' + q'' = p + g(g+2)(q/x^2 + 1/x^3), solved as a
 * generalized power series descending from x^alpha.
 */
struct WkbExpansion {
    double alpha = 1.0, g = 0.0;
    cplx E{};
    Series q, dq;
    double span = 0.0;     // exponents kept down to alpha - span
    double log_coef = 0.0; // coefficient of 1/x in q; must equal alpha

    cplx q_at(double log_r, double arg) const { return q.eval(log_r, arg); }

    /** Full phase S with S' = q, normalized so y = e^{-S} ~ x^{-a} e^{-x^{a+1}/(a+1)}. */
    cplx S_at(double log_r, double arg) const {
        const cplx L(log_r, arg);
        cplx acc = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i) {
            const double e = q.e[i];
            if (std::abs(e - alpha) < 1e-9) {
                acc += q.c[i] / (alpha + 1.0) * std::exp((alpha + 1.0) * L);
            } else if (std::abs(e + 1.0) < 1e-9) {
                acc += q.c[i] * L;
            } else {
                acc += q.c[i] / (e + 1.0) * std::exp((e + 1.0) * L);
            }
        }
        return acc;
    }

    /** (y, y', y'') at the cover point, as unit-scale vector plus real log factor. */
    void init_triple(double log_r, double arg, Vec3& v, double& logscale) const {
        const cplx S = S_at(log_r, arg);
        const cplx qq = q.eval(log_r, arg);
        const cplx dqq = dq.eval(log_r, arg);
        const cplx phase = std::exp(cplx(0.0, -S.imag()));
        v = {phase, -qq * phase, (qq * qq - dqq) * phase};
        logscale = -S.real();
    }
};

inline WkbExpansion build_wkb(const ConformalParams& cp, cplx E, double span = 0.0) {
    cp.validate(true);
    const double a = cp.alpha, g = cp.g;
    if (span <= 0.0) span = a + 16.0;
    const double e_lo = a - span;
    const double gg = g * (g + 2.0);

    Series p;  // x^{3a} - E
    p.e = {0.0, 3.0 * a};
    p.c = {-E, 1.0};
    if (E == cplx(0.0)) p = Series::mono(3.0 * a, 1.0);
    p.sort_merge();

    Series q = series_cbrt_desc(p, e_lo);
    for (int it = 0; it < 80; ++it) {
        Series dq = q.deriv();
        Series rhs = series_add(p, series_mul(q, dq, e_lo, 3.0 * a), 3.0);
        rhs = series_add(rhs, dq.deriv(), -1.0);
        rhs = series_add(rhs, series_shift(q, -2.0, gg));
        rhs = series_add(rhs, Series::mono(-3.0, gg));
        Series qn = series_cbrt_desc(rhs, e_lo);
        double diff = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < qn.size(); ++i) scale = std::max(scale, std::abs(qn.c[i]));
        Series d = series_add(qn, q, -1.0);
        for (std::size_t i = 0; i < d.size(); ++i) diff = std::max(diff, std::abs(d.c[i]));
        q = std::move(qn);
        if (diff < 1e-15 * std::max(1.0, scale)) break;
    }

    WkbExpansion w;
    w.alpha = a;
    w.g = g;
    w.E = E;
    w.span = span;
    // exponents between -1 and alpha would break the closed-form antiderivative;
    // for alpha > 1/2 the lattice excludes them
    for (double e : q.e)
        if (e > -1.0 + 1e-9 && std::abs(e - a) > 1e-9)
            throw ConvergenceError("build_wkb: unexpected exponent between -1 and alpha");
    for (std::size_t i = 0; i < q.size(); ++i)
        if (std::abs(q.e[i] + 1.0) < 1e-9) w.log_coef = q.c[i].real();
    if (std::abs(w.log_coef - a) > 1e-8 * (1.0 + a))
        throw ConvergenceError("build_wkb: 1/x coefficient differs from alpha");
    w.dq = q.deriv();
    w.q = std::move(q);
    return w;
}

struct ConformalOptions {
    double x_min = 0.75;
    double x_max = 0.0;  // 0 = auto from the dominance requirement
    double rtol = 1e-12;
    double ray_angle = 0.0;
    double span = 0.0;
};

/** Transported subdominant solution along one ray; samples descend in |x|. */
struct ConformalRun {
    ConformalParams params;
    cplx E{};
    double beta = 0.0;
    double x_max = 0.0;
    RayTrajectory traj;

    std::array<cplx, 3> triple_at(std::size_t i) const {
        const Vec3 s = traj.state(i);
        return {s[0], s[1], s[2]};
    }
};

/** Choose x_max so the x^{3a} term dominates E by three orders. */
inline double auto_x_max(const ConformalParams& cp, cplx E, double floor_val = 10.0) {
    const double need = std::pow(1e3 * std::max(std::abs(E), 1e-6), 1.0 / (3.0 * cp.alpha));
    return std::max(floor_val, 1.05 * need);
}

template <class Err = std::invalid_argument>
inline void check_dominance(const ConformalParams& cp, cplx E, double x_max) {
    if (std::pow(x_max, 3.0 * cp.alpha) <= 1e3 * std::abs(E))
        throw Err("solve_y: x_max too small for the asymptotic initial data");
}

inline ConformalRun solve_y(const ConformalParams& cp, cplx E, std::vector<double> r_samples,
                            const ConformalOptions& opt = {}) {
    cp.validate(true);
    if (std::abs(opt.ray_angle) >= sibuya_sector_halfwidth(cp.alpha))
        throw std::invalid_argument("solve_y: ray outside the sector of validity");
    ConformalRun run;
    run.params = cp;
    run.E = E;
    run.beta = opt.ray_angle;
    run.x_max = opt.x_max > 0.0 ? opt.x_max : auto_x_max(cp, E);
    check_dominance(cp, E, run.x_max);

    WkbExpansion w = build_wkb(cp, E, opt.span);
    Vec3 v0;
    double ls0;
    w.init_triple(std::log(run.x_max), run.beta, v0, ls0);

    const double gg = cp.g * (cp.g + 2.0);
    const cplx eib = std::exp(cplx(0.0, run.beta));
    auto A = [&](double r, Mat3& M) {
        const cplx x = r * eib;
        const cplx x2 = x * x, x3 = x2 * x;
        const cplx p = std::exp(3.0 * cp.alpha * std::log(x)) - E;
        // dY/dr = e^{i beta} C(x) Y with C the companion matrix of
        // y''' = g(g+2) y'/x^2 + (-g(g+2)/x^3 - p) y; integrate_ray applies
        // dv/dt = -A v, so A = -e^{i beta} C.
        M[0] = {0.0, -eib, 0.0};
        M[1] = {0.0, 0.0, -eib};
        M[2] = {-eib * (-gg / x3 - p), -eib * (gg / x2), 0.0};
    };

    std::sort(r_samples.begin(), r_samples.end(), std::greater<double>());
    const double r_end = r_samples.empty() ? opt.x_min : r_samples.back();
    IntegrateOptions io;
    io.rtol = opt.rtol;
    run.traj = integrate_ray(A, run.x_max, r_end, v0, io, r_samples, ls0);
    return run;
}

/**
 * Frobenius basis chi^{+,0,-} at the origin, exponents {-g, 1, g+2}, unit
 * leading coefficients; series over the lattice 3m + 3(a+1)n.
 */
struct FrobeniusBasis {
    ConformalParams params;
    cplx E{};
    cplx phase{1.0, 0.0};  // e^{-2 pi i k} factor on p for rotated equations
    std::array<double, 3> sigma{};  // order: plus (-g), zero (1), minus (g+2)
    std::array<std::vector<std::vector<cplx>>, 3> a;
    double radius = 1.0;

    static double indicial(double g, double mu) {
        return (mu - 1.0) * (mu * (mu - 2.0) - g * (g + 2.0));
    }

    /** chi, chi', chi'' for basis member s at the cover point. */
    std::array<cplx, 3> eval(int s, double log_r, double arg) const {
        const double al = params.alpha;
        cplx f = 0.0, df = 0.0, ddf = 0.0;
        for (std::size_t m = 0; m < a[s].size(); ++m)
            for (std::size_t n = 0; n < a[s][m].size(); ++n) {
                const cplx coef = a[s][m][n];
                if (coef == cplx(0.0)) continue;
                const double ex = sigma[s] + 3.0 * m + 3.0 * (al + 1.0) * n;
                const cplx xe = std::exp(cplx(ex * log_r, ex * arg));
                f += coef * xe;
                const cplx xe1 = std::exp(cplx((ex - 1.0) * log_r, (ex - 1.0) * arg));
                df += coef * ex * xe1;
                const cplx xe2 = std::exp(cplx((ex - 2.0) * log_r, (ex - 2.0) * arg));
                ddf += coef * ex * (ex - 1.0) * xe2;
            }
        return {f, df, ddf};
    }

    /** Magnitude of the outermost kept terms at radius r (series truncation gauge). */
    double tail_estimate(double r) const {
        const double al = params.alpha;
        double worst = 0.0;
        for (int s = 0; s < 3; ++s) {
            for (std::size_t m = 0; m < a[s].size(); ++m)
                for (std::size_t n = 0; n < a[s][m].size(); ++n) {
                    if (m + 1 != a[s].size() && n + 1 != a[s][m].size()) continue;
                    const double ex = 3.0 * m + 3.0 * (al + 1.0) * n;
                    worst = std::max(worst, std::abs(a[s][m][n]) * std::pow(r, ex));
                }
        }
        return worst;
    }
};

inline FrobeniusBasis make_frobenius_basis(const ConformalParams& cp, cplx E,
                                           double radius = 2.5, int mmax = 48, int nmax = 14,
                                           cplx phase = cplx(1.0, 0.0)) {
    cp.validate(false);
    require_nonresonant(cp.alpha, cp.g);
    FrobeniusBasis b;
    b.params = cp;
    b.E = E;
    b.phase = phase;
    b.radius = radius;
    b.sigma = {-cp.g, 1.0, cp.g + 2.0};
    for (int s = 0; s < 3; ++s) {
        auto& tab = b.a[s];
        tab.assign(mmax + 1, std::vector<cplx>(nmax + 1, cplx(0.0)));
        tab[0][0] = 1.0;
        for (int m = 0; m <= mmax; ++m)
            for (int n = 0; n <= nmax; ++n) {
                if (m == 0 && n == 0) continue;
                const double delta = 3.0 * m + 3.0 * (cp.alpha + 1.0) * n;
                const double I = FrobeniusBasis::indicial(cp.g, b.sigma[s] + delta);
                if (std::abs(I) < 1e-6 * std::max(1.0, std::pow(std::abs(b.sigma[s]) + delta, 3)))
                    throw ResonanceError("make_frobenius_basis: indicial resonance at shift " +
                                         std::to_string(delta));
                cplx num = 0.0;
                if (m >= 1) num += phase * E * tab[m - 1][n];
                if (n >= 1) num -= phase * tab[m][n - 1];
                tab[m][n] = num / I;
            }
    }
    return b;
}

/** One solved spectral point: Q-coefficients plus the basis for global evaluation. */
struct ConformalSolution {
    ConformalParams params;
    cplx E{};
    QTriple q;
    FrobeniusBasis basis;
    double x_min = 0.0;

    /** y, y', y'' anywhere within the basis radius (any ray on the cover). */
    std::array<cplx, 3> eval_triple(double log_r, double arg) const {
        std::array<cplx, 3> acc{0.0, 0.0, 0.0};
        const cplx qs[3] = {q.q_plus, q.q_zero, q.q_minus};
        for (int s = 0; s < 3; ++s) {
            const auto t = basis.eval(s, log_r, arg);
            for (int i = 0; i < 3; ++i) acc[i] += qs[s] * t[i];
        }
        return acc;
    }
};

/** Project the transported solution onto the Frobenius frame at x_min ("chi-unit" gauge). */
inline ConformalSolution conformal_q_triple(const ConformalParams& cp, cplx E,
                                            const ConformalOptions& opt = {}) {
    ConformalSolution sol;
    sol.params = cp;
    sol.E = E;
    sol.x_min = opt.x_min;
    sol.basis = make_frobenius_basis(cp, E);

    ConformalRun run = solve_y(cp, E, {2.0 * opt.x_min, opt.x_min}, opt);

    auto project = [&](std::size_t idx, double r, double& cond) {
        const auto Y = run.triple_at(idx);
        const double lr = std::log(r);
        Mat3 F;
        for (int s = 0; s < 3; ++s) {
            const auto t = sol.basis.eval(s, lr, 0.0);
            for (int i = 0; i < 3; ++i) F[i][s] = t[i];
        }
        Vec3 rhs{Y[0], Y[1], Y[2]}, qv;
        cond = solve3(F, rhs, qv);
        return qv;
    };

    double cond1 = 0.0, cond2 = 0.0;
    const Vec3 q2 = project(0, 2.0 * opt.x_min, cond2);
    const Vec3 q1 = project(1, opt.x_min, cond1);
    double drift = 0.0;
    for (int s = 0; s < 3; ++s)
        drift = std::max(drift, std::abs(q2[s] - q1[s]) / std::max(1e-300, std::abs(q1[s])));

    sol.q.theta = conformal_theta_of_E(E, cp.alpha);
    sol.q.q_plus = q1[0];
    sol.q.q_zero = q1[1];
    sol.q.q_minus = q1[2];
    sol.q.gauge = "chi-unit";
    sol.q.cond = cond1;
    sol.q.drift = drift;
    return sol;
}

/**
 * Cache of rotated solutions y_k(x, E) = w^k y(w^{-k} x, w^{-3ak} E) for one
 * base spectral point. Indexed by 2k so half-integers are exact.
 */
class ConformalFamily {
  public:
    ConformalFamily(const ConformalParams& cp, cplx E, ConformalOptions opt = {})
        : params_(cp), E_(E), opt_(opt) {}

    const ConformalSolution& at_twok(int twok) {
        auto it = cache_.find(twok);
        if (it != cache_.end()) return it->second;
        const cplx Ek = omega_pow(params_.alpha, -3.0 * params_.alpha * (twok / 2.0)) * E_;
        return cache_.emplace(twok, conformal_q_triple(params_, Ek, opt_)).first->second;
    }

    /** (y_k, y_k', y_k'') at the cover point x = exp(log_r + i arg). */
    std::array<cplx, 3> yk(int twok, double log_r, double arg) {
        const double k = twok / 2.0;
        const auto& sol = at_twok(twok);
        const double rot = 2.0 * kPi * k / (3.0 * params_.alpha + 3.0);
        const auto t = sol.eval_triple(log_r, arg - rot);
        const cplx wk = omega_pow(params_.alpha, k);
        const cplx wmk = omega_pow(params_.alpha, -k);
        return {wk * t[0], t[1], wmk * t[2]};
    }

    const ConformalParams& params() const { return params_; }
    cplx E() const { return E_; }

  private:
    ConformalParams params_;
    cplx E_{};
    ConformalOptions opt_;
    std::map<int, ConformalSolution> cache_;
};

/** 3x3 Wronskian W[y_{k1}, y_{k2}, y_{k3}] at the point x (rows y, y', y''). */
inline cplx wronskian3(ConformalFamily& fam, int twok1, int twok2, int twok3, double x) {
    const double lr = std::log(x);
    Mat3 W;
    const int ks[3] = {twok1, twok2, twok3};
    for (int r = 0; r < 3; ++r) {
        const auto t = fam.yk(ks[r], lr, 0.0);
        W[r] = {t[0], t[1], t[2]};
    }
    return det3(W);
}

/** z_{k1,k2} = y_{k1} y_{k2}' - y_{k2} y_{k1}' at x; needs |k1 - k2| <= 3. */
inline cplx z_function(ConformalFamily& fam, int twok1, int twok2, double x) {
    if (std::abs(twok1 - twok2) > 6)
        throw std::invalid_argument("z_function: |k1 - k2| must not exceed 3");
    const double lr = std::log(x);
    const auto a = fam.yk(twok1, lr, 0.0);
    const auto b = fam.yk(twok2, lr, 0.0);
    return a[0] * b[1] - b[0] * a[1];
}

}  // namespace odeimbd
