#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "odeimbd/types.hpp"

namespace odeimbd {

/**
 * Sparse generalized power series sum_i c_i x^{e_i} with real exponents.
 * Exponents within 1e-9 are merged; the window [e_lo, e_hi] bounds what is
 * kept during arithmetic so both descending (WKB) and ascending (Frobenius)
 * expansions truncate consistently.
 */
struct Series {
    std::vector<double> e;
    std::vector<cplx> c;

    std::size_t size() const { return e.size(); }
    bool empty() const { return e.empty(); }

    static Series mono(double expo, cplx coef) { return Series{{expo}, {coef}}; }

    void sort_merge(double merge_tol = 1e-9, double prune = 0.0) {
        std::vector<std::size_t> idx(e.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return e[a] < e[b]; });
        std::vector<double> ne;
        std::vector<cplx> nc;
        for (auto i : idx) {
            if (!ne.empty() && std::abs(e[i] - ne.back()) < merge_tol) {
                nc.back() += c[i];
            } else {
                ne.push_back(e[i]);
                nc.push_back(c[i]);
            }
        }
        if (prune > 0.0) {
            std::vector<double> pe;
            std::vector<cplx> pc;
            for (std::size_t i = 0; i < ne.size(); ++i)
                if (std::abs(nc[i]) > prune) {
                    pe.push_back(ne[i]);
                    pc.push_back(nc[i]);
                }
            ne.swap(pe);
            nc.swap(pc);
        }
        e.swap(ne);
        c.swap(nc);
    }

    cplx eval_pow(double log_r, double arg, double expo) const {
        return std::exp(cplx(expo * log_r, expo * arg));
    }

    /** Evaluate at the cover point x = exp(log_r + i arg). */
    cplx eval(double log_r, double arg) const {
        cplx acc = 0.0;
        for (std::size_t i = 0; i < e.size(); ++i)
            acc += c[i] * std::exp(cplx(e[i] * log_r, e[i] * arg));
        return acc;
    }

    cplx eval_real(double x) const {
        if (!(x > 0.0)) throw std::domain_error("Series::eval_real: needs x > 0");
        return eval(std::log(x), 0.0);
    }

    Series deriv() const {
        Series d;
        d.e.reserve(e.size());
        d.c.reserve(e.size());
        for (std::size_t i = 0; i < e.size(); ++i) {
            if (e[i] == 0.0) continue;
            d.e.push_back(e[i] - 1.0);
            d.c.push_back(c[i] * e[i]);
        }
        return d;
    }
};

inline Series series_add(const Series& a, const Series& b, double sb = 1.0) {
    Series r = a;
    for (std::size_t i = 0; i < b.size(); ++i) {
        r.e.push_back(b.e[i]);
        r.c.push_back(sb * b.c[i]);
    }
    r.sort_merge();
    return r;
}

inline Series series_scale(Series a, cplx f) {
    for (auto& x : a.c) x *= f;
    return a;
}

/** Shift every exponent by de and multiply by f (i.e. multiply by f x^{de}). */
inline Series series_shift(Series a, double de, cplx f = 1.0) {
    for (auto& x : a.e) x += de;
    for (auto& x : a.c) x *= f;
    return a;
}

inline Series series_mul(const Series& a, const Series& b, double e_lo, double e_hi,
                         double prune = 0.0) {
    Series r;
    r.e.reserve(a.size() * b.size() / 2 + 4);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) {
            const double ee = a.e[i] + b.e[j];
            if (ee < e_lo || ee > e_hi) continue;
            r.e.push_back(ee);
            r.c.push_back(a.c[i] * b.c[j]);
        }
    r.sort_merge(1e-9, prune);
    return r;
}

/** Reciprocal of a series whose lowest term dominates, to the given window. */
inline Series series_inv(const Series& a, double e_hi, int max_terms = 80) {
    if (a.empty()) throw std::invalid_argument("series_inv: empty series");
    const double e0 = a.e.front();
    const cplx c0 = a.c.front();
    // a = c0 x^{e0} (1 + u), inv = x^{-e0}/c0 * (1 - u + u^2 - ...)
    Series u;
    for (std::size_t i = 1; i < a.size(); ++i) {
        u.e.push_back(a.e[i] - e0);
        u.c.push_back(a.c[i] / c0);
    }
    const double rel_hi = e_hi + e0;  // final exponent = rel - e0
    Series acc = Series::mono(0.0, 1.0);
    Series pw = Series::mono(0.0, 1.0);
    for (int k = 1; k <= max_terms && !pw.empty(); ++k) {
        pw = series_mul(pw, u, 0.0, rel_hi, 1e-300);
        if (pw.empty()) break;
        acc = series_add(acc, pw, (k % 2) ? -1.0 : 1.0);
    }
    return series_shift(acc, -e0, 1.0 / c0);
}

/** Principal cube root of a series whose lowest term dominates (relative-window e_hi). */
inline Series series_cbrt(const Series& a, double e_hi) {
    if (a.empty()) throw std::invalid_argument("series_cbrt: empty series");
    const double e0 = a.e.front();
    const cplx c0 = a.c.front();
    Series u;
    for (std::size_t i = 1; i < a.size(); ++i) {
        u.e.push_back(a.e[i] - e0);
        u.c.push_back(a.c[i] / c0);
    }
    const double rel_hi = e_hi - e0 / 3.0;  // final exponent = e0/3 + rel
    Series acc = Series::mono(0.0, 1.0);
    Series pw = Series::mono(0.0, 1.0);
    double binom = 1.0;
    for (int k = 1; k <= 80 && !pw.empty(); ++k) {
        binom *= (1.0 / 3.0 - (k - 1)) / k;
        pw = series_mul(pw, u, 0.0, std::max(0.0, rel_hi), 1e-300);
        if (pw.empty()) break;
        acc = series_add(acc, series_scale(pw, binom));
    }
    return series_shift(acc, e0 / 3.0, std::pow(c0, 1.0 / 3.0));
}

/** Reciprocal when the HIGHEST exponent dominates (asymptotic, x -> infinity). */
inline Series series_inv_desc(const Series& a, double e_lo, int max_terms = 80) {
    if (a.empty()) throw std::invalid_argument("series_inv_desc: empty series");
    const double e0 = a.e.back();
    const cplx c0 = a.c.back();
    Series u;  // relative exponents are negative
    for (std::size_t i = 0; i + 1 < a.size(); ++i) {
        u.e.push_back(a.e[i] - e0);
        u.c.push_back(a.c[i] / c0);
    }
    const double rel_lo = e_lo + e0;
    Series acc = Series::mono(0.0, 1.0);
    Series pw = Series::mono(0.0, 1.0);
    for (int k = 1; k <= max_terms && !pw.empty(); ++k) {
        pw = series_mul(pw, u, rel_lo, 0.0, 1e-300);
        if (pw.empty()) break;
        acc = series_add(acc, pw, (k % 2) ? -1.0 : 1.0);
    }
    return series_shift(acc, -e0, 1.0 / c0);
}

/** Principal cube root when the highest exponent dominates. */
inline Series series_cbrt_desc(const Series& a, double e_lo, int max_terms = 80) {
    if (a.empty()) throw std::invalid_argument("series_cbrt_desc: empty series");
    const double e0 = a.e.back();
    const cplx c0 = a.c.back();
    Series u;
    for (std::size_t i = 0; i + 1 < a.size(); ++i) {
        u.e.push_back(a.e[i] - e0);
        u.c.push_back(a.c[i] / c0);
    }
    const double rel_lo = e_lo - e0 / 3.0;
    Series acc = Series::mono(0.0, 1.0);
    Series pw = Series::mono(0.0, 1.0);
    double binom = 1.0;
    for (int k = 1; k <= max_terms && !pw.empty(); ++k) {
        binom *= (1.0 / 3.0 - (k - 1)) / k;
        pw = series_mul(pw, u, std::min(0.0, rel_lo), 0.0, 1e-300);
        if (pw.empty()) break;
        acc = series_add(acc, series_scale(pw, binom));
    }
    return series_shift(acc, e0 / 3.0, std::pow(c0, 1.0 / 3.0));
}

/** exp of a series with strictly positive exponents times a constant term. */
inline Series series_exp(const Series& a, double e_hi, double prune = 1e-300) {
    cplx a0 = 0.0;
    Series rest;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a.e[i] <= 1e-12) {
            if (a.e[i] < -1e-12)
                throw std::invalid_argument("series_exp: negative exponent present");
            a0 += a.c[i];
        } else {
            rest.e.push_back(a.e[i]);
            rest.c.push_back(a.c[i]);
        }
    }
    Series acc = Series::mono(0.0, 1.0);
    Series pw = Series::mono(0.0, 1.0);
    double fact = 1.0;
    for (int k = 1; k <= 80 && !pw.empty(); ++k) {
        fact /= k;
        pw = series_mul(pw, rest, 0.0, e_hi, prune);
        if (pw.empty()) break;
        acc = series_add(acc, series_scale(pw, fact));
    }
    return series_scale(acc, std::exp(a0));
}

}  // namespace odeimbd
