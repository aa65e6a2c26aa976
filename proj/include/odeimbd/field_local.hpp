#pragma once

#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "odeimbd/series.hpp"
#include "odeimbd/types.hpp"

namespace odeimbd {

/**
 * Local expansion of the field about the apex:
 *   eta = -g ln(z zbar) + sum h_{ab} z^a zbar^b,
 * exponents on the lattice a = i(g+1) + j(1-2g) + ka*3a, b likewise with kb.
 * All coefficients beyond eta0 and the gamma_k are generated from the field
 * equation by fixed-point iteration; they are real with h_{ab} = h_{ba}.
 */
struct LocalExpansion {
    struct Term {
        double a, b;
        double coeff;
    };
    ModelParams params;
    double eta0 = 0.0;
    std::vector<double> gammas;
    double grade_cap = 16.0;  // terms kept with a + b <= grade_cap
    std::vector<Term> terms;

    double eval(double rho, double phi) const {  // the h-part only
        double acc = 0.0;
        for (const auto& t : terms)
            acc += t.coeff * std::pow(rho, t.a + t.b) * std::cos((t.a - t.b) * phi);
        return acc;
    }
};

namespace detail_local {

// packed lattice key (i, j, ka, kb), each in [0, 255]
using Key = std::uint32_t;
inline Key pack(int i, int j, int ka, int kb) {
    return (Key(i) << 24) | (Key(j) << 16) | (Key(ka) << 8) | Key(kb);
}
inline int k_i(Key k) { return int(k >> 24); }
inline int k_j(Key k) { return int((k >> 16) & 0xff); }
inline int k_ka(Key k) { return int((k >> 8) & 0xff); }
inline int k_kb(Key k) { return int(k & 0xff); }

using Dict = std::unordered_map<Key, double>;

inline double grade(Key k, double g, double a3) {
    return 2.0 * (k_i(k) * (g + 1.0) + k_j(k) * (1.0 - 2.0 * g)) + (k_ka(k) + k_kb(k)) * a3;
}

inline void add_to(Dict& d, Key k, double c) {
    auto [it, fresh] = d.emplace(k, c);
    if (!fresh) it->second += c;
}

inline Dict mul(const Dict& x, const Dict& y, double g, double a3, double cap) {
    Dict r;
    r.reserve(x.size() * 2);
    for (const auto& [kx, cx] : x)
        for (const auto& [ky, cy] : y) {
            const int i = k_i(kx) + k_i(ky), j = k_j(kx) + k_j(ky);
            const int ka = k_ka(kx) + k_ka(ky), kb = k_kb(kx) + k_kb(ky);
            if (i > 255 || j > 255 || ka > 255 || kb > 255) continue;
            const Key kk = pack(i, j, ka, kb);
            if (grade(kk, g, a3) > cap) continue;
            add_to(r, kk, cx * cy);
        }
    return r;
}

// exp(f * h) for a dictionary with no constant term
inline Dict dict_exp(const Dict& h, double f, double g, double a3, double cap) {
    Dict acc{{pack(0, 0, 0, 0), 1.0}};
    Dict pw{{pack(0, 0, 0, 0), 1.0}};
    Dict fh;
    for (const auto& [k, c] : h) fh[k] = f * c;
    double fact = 1.0;
    for (int n = 1; n <= 64; ++n) {
        pw = mul(pw, fh, g, a3, cap);
        if (pw.empty()) break;
        fact /= n;
        double biggest = 0.0;
        for (const auto& [k, c] : pw) {
            add_to(acc, k, fact * c);
            biggest = std::max(biggest, std::abs(fact * c));
        }
        if (biggest < 1e-22) break;
    }
    return acc;
}

}  // namespace detail_local

/**
 * Generate the local expansion from (eta0, gamma_k): every further coefficient
 * is forced by the field equation. Iterates h <- seeds + integral of
 * [-(z zbar)^g e^{-h} + p pbar (z zbar)^{-2g} e^{2h}] until stable.
 */
inline LocalExpansion build_local_expansion(const ModelParams& p, double eta0,
                                            const std::vector<double>& gammas,
                                            double grade_cap = 16.0) {
    using namespace detail_local;
    const double g = p.g, a3 = 3.0 * p.alpha;
    const double smu = p.s > 0.0 ? std::pow(p.s, a3) : 0.0;

    Dict seeds;
    seeds[pack(0, 0, 0, 0)] = eta0;
    for (std::size_t k = 0; k < gammas.size(); ++k) {
        if (a3 * double(k + 1) > grade_cap) break;
        seeds[pack(0, 0, int(k + 1), 0)] = gammas[k];
        seeds[pack(0, 0, 0, int(k + 1))] = gammas[k];
    }

    auto h_nonconst = [&](const Dict& h) {
        Dict r = h;
        r.erase(pack(0, 0, 0, 0));
        return r;
    };

    Dict h = seeds;
    const int iters = int(grade_cap / std::min({2.0 * g + 2.0, 2.0 - 4.0 * g, a3})) + 3;
    for (int it = 0; it < iters; ++it) {
        const double e0 = std::exp(-eta0), e2 = std::exp(2.0 * eta0);
        Dict hn = h_nonconst(h);
        Dict emh = dict_exp(hn, -1.0, g, a3, grade_cap);
        Dict eph = dict_exp(hn, 2.0, g, a3, grade_cap);

        Dict next = seeds;
        // source 1: -(z zbar)^g e^{-h}; integrating shifts (a,b) by (g+1, g+1)
        for (const auto& [k, c] : emh) {
            const int i = k_i(k) + 1;
            if (i > 255) continue;
            const Key kk = pack(i, k_j(k), k_ka(k), k_kb(k));
            if (grade(kk, g, a3) > grade_cap) continue;
            const double a = g + 1.0 + (k_i(k)) * (g + 1.0) + k_j(k) * (1.0 - 2.0 * g) +
                             k_ka(k) * a3;
            const double b = g + 1.0 + (k_i(k)) * (g + 1.0) + k_j(k) * (1.0 - 2.0 * g) +
                             k_kb(k) * a3;
            add_to(next, kk, -e0 * c / (a * b));
        }
        // source 2: (z^{3a} - s^{3a})(zbar^{3a} - s^{3a}) (z zbar)^{-2g} e^{2h};
        // integrating shifts (a,b) by (1-2g, 1-2g) on top of the p-shifts
        const double pc[4] = {1.0, -smu, -smu, smu * smu};
        const int pka[4] = {1, 1, 0, 0};
        const int pkb[4] = {1, 0, 1, 0};
        for (int q = 0; q < 4; ++q) {
            if (pc[q] == 0.0) continue;
            for (const auto& [k, c] : eph) {
                const int i = k_i(k), j = k_j(k) + 1;
                const int ka = k_ka(k) + pka[q], kb = k_kb(k) + pkb[q];
                if (j > 255 || ka > 255 || kb > 255) continue;
                const Key kk = pack(i, j, ka, kb);
                if (grade(kk, g, a3) > grade_cap) continue;
                const double a =
                    1.0 - 2.0 * g + i * (g + 1.0) + k_j(k) * (1.0 - 2.0 * g) + ka * a3;
                const double b =
                    1.0 - 2.0 * g + i * (g + 1.0) + k_j(k) * (1.0 - 2.0 * g) + kb * a3;
                add_to(next, kk, e2 * pc[q] * c / (a * b));
            }
        }
        h = std::move(next);
    }

    LocalExpansion out;
    out.params = p;
    out.eta0 = eta0;
    out.gammas = gammas;
    out.grade_cap = grade_cap;
    for (const auto& [k, c] : h) {
        if (k == pack(0, 0, 0, 0)) {
            out.terms.push_back({0.0, 0.0, c});
            continue;
        }
        if (std::abs(c) < 1e-300) continue;
        const double a = k_i(k) * (g + 1.0) + k_j(k) * (1.0 - 2.0 * g) + k_ka(k) * a3;
        const double b = k_i(k) * (g + 1.0) + k_j(k) * (1.0 - 2.0 * g) + k_kb(k) * a3;
        out.terms.push_back({a, b, c});
    }
    return out;
}

/** Ray-collapsed series of h and its z-derivative combinations at fixed phi. */
struct RaySeries {
    Series hs;        // h(rho) along the ray
    Series d1z;       // e^{i phi} dz h  (the -g/rho log part is handled separately)
    Series d1zb;      // e^{-i phi} dzbar h
    Series d2z_e2ip;  // e^{2 i phi} dz^2 h
};

inline RaySeries collapse_on_ray(const LocalExpansion& le, double phi) {
    RaySeries r;
    for (const auto& t : le.terms) {
        const cplx ang = std::exp(cplx(0.0, (t.a - t.b) * phi));
        r.hs.e.push_back(t.a + t.b);
        r.hs.c.push_back(t.coeff * ang);
        if (t.a != 0.0) {
            r.d1z.e.push_back(t.a + t.b - 1.0);
            r.d1z.c.push_back(t.a * t.coeff * ang);
            if (t.a != 1.0) {
                r.d2z_e2ip.e.push_back(t.a + t.b - 2.0);
                r.d2z_e2ip.c.push_back(t.a * (t.a - 1.0) * t.coeff * ang);
            }
        }
        if (t.b != 0.0) {
            r.d1zb.e.push_back(t.a + t.b - 1.0);
            r.d1zb.c.push_back(t.b * t.coeff * ang);
        }
    }
    r.hs.sort_merge();
    r.d1z.sort_merge();
    r.d1zb.sort_merge();
    r.d2z_e2ip.sort_merge();
    return r;
}

}  // namespace odeimbd
