#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "odeimbd/field.hpp"
#include "odeimbd/field_local.hpp"
#include "odeimbd/integrate.hpp"
#include "odeimbd/series.hpp"
#include "odeimbd/types.hpp"

namespace odeimbd {

/**
 * The sl(3) connection components A_z and A_zbar at fixed lambda = e^theta.
 * Sign convention: the lambda e^{-eta/2} entries of A_z enter with a plus so
 * that D Psi = 0 holds for the vector built from a scalar solution of the
 * third-order reduction (the subdiagonal minus signs in the printed matrix
 * contradict that map; see the row-by-row check in the tests).
 */
struct LaxMatrices {
    const FieldSolution* sol;
    cplx theta;

    Mat3 Az(double rho, double phi) const {
        const ModelParams& p = sol->params;
        const EtaJet j = sol->eta_eval(rho, phi);
        const cplx eip = std::exp(cplx(0.0, phi));
        const cplx dz = 0.5 * (j.d_rho - cplx(0.0, 1.0) * j.d_phi / rho) / eip;
        const cplx lam = std::exp(theta);
        const cplx pz = potential(rho * eip, p);
        const double eh = std::exp(j.eta), emh2 = std::exp(-0.5 * j.eta);
        Mat3 M{};
        M[0] = {0.5 * dz, 0.0, lam * eh * pz};
        M[1] = {lam * emh2, 0.0, 0.0};
        M[2] = {0.0, lam * emh2, -0.5 * dz};
        return M;
    }

    Mat3 Azb(double rho, double phi) const {
        const ModelParams& p = sol->params;
        const EtaJet j = sol->eta_eval(rho, phi);
        const cplx eip = std::exp(cplx(0.0, phi));
        const cplx dzb = 0.5 * (j.d_rho + cplx(0.0, 1.0) * j.d_phi / rho) * eip;
        const cplx ilam = std::exp(-theta);
        const cplx pzb = potential(rho / eip, p);
        const double eh = std::exp(j.eta), emh2 = std::exp(-0.5 * j.eta);
        Mat3 M{};
        M[0] = {-0.5 * dzb, ilam * emh2, 0.0};
        M[1] = {0.0, 0.0, ilam * emh2};
        M[2] = {ilam * eh * pzb, 0.0, 0.5 * dzb};
        return M;
    }
};

/**
 * Radial combination e^{i phi} A_z + e^{-i phi} A_zbar of the connection at
 * fixed lambda = e^theta along the ray z = rho e^{i phi}. The transport
 * convention downstream is dPsi/drho = -A(rho) Psi.
 */
class RadialSystem {
  public:
    RadialSystem(const FieldSolution& sol, cplx theta, double phi)
        : sol_(&sol), phi_(phi), lam_(std::exp(theta)), ilam_(std::exp(-theta)) {
        const double a3 = 3.0 * sol.params.alpha;
        smu_ = sol.params.s > 0.0 ? std::pow(sol.params.s, a3) : 0.0;
        eip_ = std::exp(cplx(0.0, phi));
        emp_ = std::exp(cplx(0.0, -phi));
        zpow_ = std::exp(cplx(0.0, a3 * phi));
    }

    void operator()(double rho, Mat3& A) const {
        const EtaJet j = sol_->eta_eval(rho, phi_);
        // e^{i phi} dz eta and e^{-i phi} dzbar eta on the real slice
        const cplx dz = 0.5 * (j.d_rho - cplx(0.0, 1.0) * j.d_phi / rho);
        const cplx dzb = 0.5 * (j.d_rho + cplx(0.0, 1.0) * j.d_phi / rho);
        const double r3a = std::pow(rho, 3.0 * sol_->params.alpha);
        const cplx pz = r3a * zpow_ - smu_;
        const cplx pzb = r3a / zpow_ - smu_;
        const double eh = std::exp(j.eta), emh2 = std::exp(-0.5 * j.eta);
        const cplx diag = 0.5 * (dz - dzb);
        A[0] = {diag, ilam_ * emp_ * emh2, lam_ * eip_ * eh * pz};
        A[1] = {lam_ * eip_ * emh2, 0.0, ilam_ * emp_ * emh2};
        A[2] = {ilam_ * emp_ * eh * pzb, lam_ * eip_ * emh2, -diag};
    }

  private:
    const FieldSolution* sol_;
    double phi_, smu_;
    cplx lam_, ilam_, eip_, emp_, zpow_;
};

/** The printed large-rho vector e^{theta/2}(e^{i phi a}, 1, e^{-i phi a})
 *  exp(-2 rho^{a+1} cosh(theta + i(a+1) phi)/(a+1)), in log-split form. */
inline void wkb_initial_vector(const ModelParams& p, cplx theta, double rho, double phi,
                               Vec3& v, double& logscale) {
    p.validate(true);
    const double a = p.alpha;
    const double wedge = theta.imag() + (a + 1.0) * phi;
    if (!(std::abs(wedge) < 0.5 * kPi))
        throw std::invalid_argument("wkb_initial_vector: (theta, phi) outside the subdominance wedge");
    const cplx expo = -2.0 * std::pow(rho, a + 1.0) / (a + 1.0) *
                      std::cosh(theta + cplx(0.0, (a + 1.0) * phi));
    const cplx phase = std::exp(cplx(0.0, expo.imag()) + 0.5 * theta);
    v = {phase * std::exp(cplx(0.0, phi * a)), phase, phase * std::exp(cplx(0.0, -phi * a))};
    logscale = expo.real();
}

/**
 * Correction to the WKB phase from the s^{3a} part of the potential:
 * e^{theta} T(z) + e^{-theta} T(zbar) with T(z) = int_z^inf (w^a - p(w)^{1/3}) dw
 * along the ray. Returned as a complex log-factor to add to the initial data;
 * it removes the slowest (rho^{1-2a}) initialization error family.
 */
inline cplx wkb_tail_log(const ModelParams& p, cplx theta, double rho, double phi) {
    if (p.s == 0.0) return 0.0;
    const double a = p.alpha, a3 = 3.0 * a;
    const double smu = std::pow(p.s, a3);
    auto T = [&](double ang) {
        // t = rho u^{-q}, q = 1/(2a-1): the integrand becomes smooth on (0,1]
        const double q = 1.0 / (2.0 * a - 1.0);
        static const int NG = 48;
        static std::vector<double> gx, gw;
        if (gx.empty()) {  // Gauss-Legendre nodes on (0,1) by Newton on P_NG
            gx.resize(NG);
            gw.resize(NG);
            for (int i = 0; i < NG; ++i) {
                double x = std::cos(kPi * (i + 0.75) / (NG + 0.5));
                for (int it = 0; it < 100; ++it) {
                    double p0 = 1.0, p1 = x;
                    for (int k = 2; k <= NG; ++k) {
                        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                        p0 = p1;
                        p1 = p2;
                    }
                    const double dp = NG * (x * p1 - p0) / (x * x - 1.0);
                    const double dx = p1 / dp;
                    x -= dx;
                    if (std::abs(dx) < 1e-15) break;
                }
                double p0 = 1.0, p1 = x;
                for (int k = 2; k <= NG; ++k) {
                    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                const double dp = NG * (x * p1 - p0) / (x * x - 1.0);
                gx[i] = 0.5 * (1.0 + x);
                gw[i] = 1.0 / ((1.0 - x * x) * dp * dp);  // * 2 / ... scaled below
            }
        }
        const cplx eia = std::exp(cplx(0.0, ang));
        cplx acc = 0.0;
        for (int i = 0; i < NG; ++i) {
            const double u = gx[i];
            const double t = rho * std::pow(u, -q);
            const cplx w = t * eia;
            const cplx wa = std::pow(t, a) * std::exp(cplx(0.0, a * ang));
            const cplx ratio = smu / (std::pow(t, a3) * std::exp(cplx(0.0, a3 * ang)));
            const cplx f = wa * (1.0 - std::pow(1.0 - ratio, 1.0 / 3.0));
            (void)w;
            // dt = -rho q u^{-q-1} du; the outer minus flips the orientation to (0,1]
            acc += gw[i] * f * rho * q * std::pow(u, -q - 1.0);
        }
        return eia * acc;  // the ray direction factor from dw = e^{i ang} dt
    };
    return -(std::exp(theta) * T(phi) + std::exp(-theta) * T(-phi));
}

/**
 * Frobenius frame of the linear problem at the apex: three vector solutions
 * with Psi(0) equal to the printed leading forms (gauge "Psi0-unit"), built by
 * exponent-lattice recursion on the ray-collapsed connection.
 */
struct OriginFrame {
    ModelParams params;
    cplx theta{};
    double phi = 0.0;
    cplx lam{}, ilam{};
    std::vector<double> delta;            // sorted exponents, delta[0] = 0
    std::array<std::vector<Vec3>, 3> col;  // coefficients per solution
    RaySeries ray;
    double order = 0.0;

    Mat3 eval_frame(double rho) const {
        Mat3 F{};
        const double lr = std::log(rho);
        for (int a = 0; a < 3; ++a)
            for (std::size_t d = 0; d < delta.size(); ++d) {
                const double pw = std::exp(delta[d] * lr);
                for (int i = 0; i < 3; ++i) F[i][a] += col[a][d][i] * pw;
            }
        return F;
    }

    double tail_estimate(double rho) const {
        double worst = 0.0;
        const std::size_t lo = delta.size() > 6 ? delta.size() - 6 : 0;
        for (int a = 0; a < 3; ++a)
            for (std::size_t d = lo; d < delta.size(); ++d)
                for (int i = 0; i < 3; ++i)
                    worst = std::max(worst,
                                     std::abs(col[a][d][i]) * std::pow(rho, delta[d]));
        return worst;
    }

    /** Vector value of solution a at rho. */
    Vec3 eval_col(int a, double rho) const {
        Vec3 v{};
        const double lr = std::log(rho);
        for (std::size_t d = 0; d < delta.size(); ++d) {
            const double pw = std::exp(delta[d] * lr);
            for (int i = 0; i < 3; ++i) v[i] += col[a][d][i] * pw;
        }
        return v;
    }

    /** (psi, dz psi, dz^2 psi) extracted from a vector value at rho on this ray. */
    std::array<cplx, 3> scalar_readoff(const Vec3& Psi, double rho) const {
        const double g = params.g;
        const double lr = std::log(rho);
        const cplx hs = ray.hs.eval(lr, 0.0);
        const cplx emip = std::exp(cplx(0.0, -phi));
        const cplx eh2 = std::exp(-g * lr + 0.5 * hs);   // e^{eta/2}
        const cplx emh2 = std::exp(g * lr - 0.5 * hs);   // e^{-eta/2}
        const cplx dzeta = emip * (-g / rho + ray.d1z.eval(lr, 0.0));
        const cplx dz2eta = emip * emip * (g / (rho * rho) + ray.d2z_e2ip.eval(lr, 0.0));
        const cplx lam_m32 = std::exp(-1.5 * theta), lam_m12 = std::exp(-0.5 * theta),
                   lam_p12 = std::exp(0.5 * theta);
        const cplx psi = lam_m32 * eh2 * Psi[2];
        const cplx dzpsi = dzeta * psi - lam_m12 * Psi[1];
        const cplx dz2psi = lam_p12 * emh2 * Psi[0] + dz2eta * psi + dzeta * dzpsi;
        return {psi, dzpsi, dz2psi};
    }
};

inline OriginFrame build_origin_frame(const LocalExpansion& le, cplx theta, double phi,
                                      double order = 16.0) {
    const ModelParams& p = le.params;
    require_nonresonant(p.alpha, p.g);
    const double g = p.g, a3 = 3.0 * p.alpha;
    const double smu = p.s > 0.0 ? std::pow(p.s, a3) : 0.0;

    OriginFrame fr;
    fr.params = p;
    fr.theta = theta;
    fr.phi = phi;
    fr.lam = std::exp(theta);
    fr.ilam = std::exp(-theta);
    fr.order = order;
    fr.ray = collapse_on_ray(le, phi);

    // entry series of A(rho); window keeps exponents e with 1 + e <= order
    const double e_hi = order;
    Series exp_h = series_exp(fr.ray.hs, e_hi);
    Series exp_mh2 = series_exp(series_scale(fr.ray.hs, -0.5), e_hi);
    const cplx eip = std::exp(cplx(0.0, phi)), emp = std::exp(cplx(0.0, -phi));
    const cplx z3 = std::exp(cplx(0.0, a3 * phi));

    struct ATerm {
        double e;
        int i, j;
        cplx c;
    };
    std::vector<ATerm> terms;
    auto push_series = [&](const Series& s, double shift, cplx f, int i, int j) {
        for (std::size_t k = 0; k < s.size(); ++k) {
            const double e = s.e[k] + shift;
            if (e > e_hi) continue;
            terms.push_back({e, i, j, f * s.c[k]});
        }
    };
    // diag: (a-b)/2-weighted h-derivative series
    {
        Series diag = series_add(fr.ray.d1z, fr.ray.d1zb, -1.0);
        push_series(diag, 0.0, 0.5, 0, 0);
        push_series(diag, 0.0, -0.5, 2, 2);
    }
    push_series(exp_h, a3 - 2.0 * g, fr.lam * eip * z3, 0, 2);         // z^{3a} part of p(z)
    if (smu != 0.0) push_series(exp_h, -2.0 * g, -fr.lam * eip * smu, 0, 2);
    push_series(exp_h, a3 - 2.0 * g, fr.ilam * emp / z3, 2, 0);        // p(zbar) e^{eta}
    if (smu != 0.0) push_series(exp_h, -2.0 * g, -fr.ilam * emp * smu, 2, 0);
    push_series(exp_mh2, g, fr.lam * eip, 1, 0);
    push_series(exp_mh2, g, fr.lam * eip, 2, 1);
    push_series(exp_mh2, g, fr.ilam * emp, 0, 1);
    push_series(exp_mh2, g, fr.ilam * emp, 1, 2);

    for (const auto& t : terms)
        if (t.e <= -1.0)
            throw ConvergenceError("build_origin_frame: non-integrable connection entry");

    // exponent lattice: closure of sums of the shifts (1 + e); 0 is the seed
    std::vector<double> shifts;
    for (const auto& t : terms) shifts.push_back(1.0 + t.e);
    std::sort(shifts.begin(), shifts.end());
    shifts.erase(std::unique(shifts.begin(), shifts.end(),
                             [](double a, double b) { return std::abs(a - b) < 1e-9; }),
                 shifts.end());
    std::vector<double> lat{0.0};
    for (std::size_t head = 0; head < lat.size(); ++head) {
        for (double s : shifts) {
            const double cand = lat[head] + s;
            if (cand > order) continue;
            bool seen = false;
            for (double x : lat) seen = seen || std::abs(x - cand) < 1e-9;
            if (!seen) lat.push_back(cand);
        }
        std::sort(lat.begin() + head + 1, lat.end());
        if (lat.size() > 4000)
            throw ConvergenceError("build_origin_frame: exponent lattice explosion");
    }
    std::sort(lat.begin(), lat.end());
    fr.delta = lat;

    auto find_delta = [&](double x) -> int {
        auto it = std::lower_bound(fr.delta.begin(), fr.delta.end(), x - 1e-9);
        if (it == fr.delta.end() || std::abs(*it - x) > 1e-9) return -1;
        return int(it - fr.delta.begin());
    };

    const cplx psi0g = std::exp((cplx(0.0, -phi) - theta) * g);
    const Vec3 v0s[3] = {{0.0, 0.0, psi0g}, {0.0, 1.0, 0.0}, {1.0 / psi0g, 0.0, 0.0}};
    for (int a = 0; a < 3; ++a) {
        fr.col[a].assign(fr.delta.size(), Vec3{});
        fr.col[a][0] = v0s[a];
        for (std::size_t d = 1; d < fr.delta.size(); ++d) {
            Vec3 acc{};
            for (const auto& t : terms) {
                const int src = find_delta(fr.delta[d] - 1.0 - t.e);
                if (src < 0) continue;
                acc[t.i] += t.c * fr.col[a][src][t.j];
            }
            const double dd = fr.delta[d];
            fr.col[a][d] = {-acc[0] / dd, -acc[1] / dd, -acc[2] / dd};
        }
    }
    return fr;
}

struct MassiveOptions {
    double rho_min = 0.04;
    double frame_order = 16.0;
    double r0 = 60.0;          // smallest initialization radius
    double r_ratio = 1.5;
    int r_count = 5;
    int ladder_terms = 4;
    double rtol = 1e-11;
};

/** Ladder of correction exponents mu for the rho_max extrapolation. */
inline std::vector<double> wkb_error_exponents(double alpha, int count) {
    const double atoms[3] = {alpha + 1.0, 3.0 * alpha, 4.0 * alpha - 2.0};
    std::vector<double> cand;
    for (int i = 0; i <= 3; ++i)
        for (int j = 0; j <= 3; ++j)
            for (int k = 0; k <= 3; ++k) {
                if (i + j + k == 0 || i + j + k > 3) continue;
                cand.push_back(i * atoms[0] + j * atoms[1] + k * atoms[2]);
            }
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end(),
                           [](double a, double b) { return std::abs(a - b) < 0.05; }),
               cand.end());
    cand.resize(std::min<std::size_t>(cand.size(), count));
    return cand;
}

/**
 * Transport + projection machinery for one field solution. Q-triples are
 * cached per spectral point; rays are adjusted so the WKB direction is
 * maximally subdominant.
 */
class MassiveContext {
  public:
    explicit MassiveContext(const FieldSolution& sol, MassiveOptions opt = {})
        : sol_(&sol), opt_(opt) {
        if (!sol.fit_valid)
            throw std::invalid_argument("MassiveContext: field solution lacks local-fit data");
        le_ = build_local_expansion(sol.params, sol.eta0, sol.gamma, opt.frame_order + 2.0);
        const double need = opt_.r0 * std::pow(opt_.r_ratio, opt_.r_count - 1) * 1.01;
        if (sol.config.rho_max < need)
            throw std::invalid_argument(
                "MassiveContext: field grid too short for the initialization ladder (needs rho_max >= " +
                std::to_string(need) + ")");
    }

    const FieldSolution& field() const { return *sol_; }
    const LocalExpansion& local() const { return le_; }
    const MassiveOptions& options() const { return opt_; }
    double ray_angle(cplx theta) const { return -theta.imag() / (sol_->params.alpha + 1.0); }

    /** Q in the Psi0-unit gauge at one spectral point (cached). */
    const QTriple& q_triple(cplx theta) const {
        const auto key = std::make_pair(theta.real(), theta.imag());
        auto it = qcache_.find(key);
        if (it != qcache_.end()) return it->second;
        return qcache_.emplace(key, compute_q(theta)).first->second;
    }

    /** Q against the asy-normalized scalar and unit local basis ("paper" gauge). */
    QTriple q_paper(cplx theta) const {
        const QTriple& q = q_triple(theta);
        const double a = sol_->params.alpha, g = sol_->params.g;
        const double eta0 = sol_->eta0;
        QTriple out = q;
        out.gauge = "paper";
        const cplx c = theta / (a + 1.0);
        out.q_plus = std::exp((1.0 + g) * c - (g + 1.5) * theta + 0.5 * eta0) * q.q_plus;
        out.q_zero = -std::exp(-0.5 * theta) / (g + 1.0) * q.q_zero;
        out.q_minus = std::exp(-(g + 1.0) * c + (g + 0.5) * theta - 0.5 * eta0) /
                      (2.0 * (g + 1.0) * (g + 1.0)) * q.q_minus;
        return out;
    }

    const OriginFrame& frame(cplx theta, double phi) const {
        const auto key = std::make_tuple(theta.real(), theta.imag(), phi);
        auto it = fcache_.find(key);
        if (it != fcache_.end()) return it->second;
        return fcache_
            .emplace(key, build_origin_frame(le_, theta, phi, opt_.frame_order))
            .first->second;
    }

  private:
    const FieldSolution* sol_;
    MassiveOptions opt_;
    LocalExpansion le_;
    mutable std::map<std::pair<double, double>, QTriple> qcache_;
    mutable std::map<std::tuple<double, double, double>, OriginFrame> fcache_;

    QTriple compute_q(cplx theta) const;
};

inline QTriple MassiveContext::compute_q(cplx theta) const {
    const ModelParams& p = sol_->params;
    const double phi = ray_angle(theta);
    const OriginFrame& fr = frame(theta, phi);
    RadialSystem A(*sol_, theta, phi);

    const double rin = opt_.rho_min;
    std::vector<cplx> qs[3], qs2[3];
    double cond = 0.0;
    std::vector<double> Rs;
    for (int k = 0; k < opt_.r_count; ++k)
        Rs.push_back(opt_.r0 * std::pow(opt_.r_ratio, k));

    for (double R : Rs) {
        Vec3 v0;
        double ls0;
        wkb_initial_vector(p, theta, R, phi, v0, ls0);
        const cplx tail = wkb_tail_log(p, theta, R, phi);
        ls0 += tail.real();
        const cplx ph = std::exp(cplx(0.0, tail.imag()));
        for (auto& c : v0) c *= ph;

        IntegrateOptions io;
        io.rtol = opt_.rtol;
        auto traj = integrate_ray(A, R, rin, v0, io, {2.0 * rin, rin}, ls0);

        for (int pass = 0; pass < 2; ++pass) {
            const double rho = pass == 0 ? 2.0 * rin : rin;
            const Mat3 F = fr.eval_frame(rho);
            const Vec3 Y = traj.state(pass);
            Vec3 q;
            const double c = solve3(F, Y, q);
            if (pass == 1) cond = c;
            for (int a = 0; a < 3; ++a) (pass == 0 ? qs2 : qs)[a].push_back(q[a]);
        }
    }

    // remove the initialization error: Q(R) = Q_inf (1 + sum c_l R^{-mu_l})
    const auto mus = wkb_error_exponents(p.alpha, opt_.ladder_terms);
    const int L = int(mus.size());
    auto extrapolate = [&](const std::vector<cplx>& vals, double& resid) {
        const int NR = int(vals.size());
        Eigen::MatrixXcd M(NR, L + 1);
        Eigen::VectorXcd rhs(NR);
        for (int r = 0; r < NR; ++r) {
            M(r, 0) = 1.0;
            for (int l = 0; l < L; ++l) M(r, l + 1) = std::pow(Rs[r], -mus[l]);
            rhs(r) = vals[r];
        }
        Eigen::VectorXcd sol = M.colPivHouseholderQr().solve(rhs);
        resid = (M * sol - rhs).norm() / std::max(1e-300, rhs.norm());
        return sol(0);
    };

    QTriple out;
    out.theta = theta;
    out.gauge = "Psi0-unit";
    out.cond = cond;
    double worst_fit = 0.0, drift = 0.0;
    cplx qv[3], qv2[3];
    for (int a = 0; a < 3; ++a) {
        double r1 = 0.0, r2 = 0.0;
        qv[a] = extrapolate(qs[a], r1);
        qv2[a] = extrapolate(qs2[a], r2);
        worst_fit = std::max(worst_fit, r1);
        drift = std::max(drift, std::abs(qv2[a] - qv[a]) / std::max(1e-300, std::abs(qv[a])));
    }
    out.q_plus = qv[0];
    out.q_zero = qv[1];
    out.q_minus = qv[2];
    out.fit_residual = worst_fit;
    out.drift = drift;
    return out;
}

/**
 * The rotated scalar solution psi_k and its x-derivatives along the common
 * evaluation ray, in the asy-normalized x-variables of the base theta.
 * Realized as the base construction at theta_k = theta - 2 pi i k/3 with the
 * w^k prefactor, which cancels against the normalization shift.
 */
struct MassivePsiK {
    const MassiveContext* ctx;
    cplx theta;   // base spectral point
    double k;     // rotation index (integer or half-integer)
    cplx theta_k;
    QTriple q;    // Psi0-unit gauge at theta_k

    /** (psi_k, psi_k', psi_k'') with respect to x at z = rho e^{i phi_eval}. */
    std::array<cplx, 3> eval(double rho) const {
        const double a = ctx->field().params.alpha;
        const double phi = ctx->ray_angle(theta);
        const OriginFrame& fr = ctx->frame(theta_k, phi);
        Vec3 Psi{};
        const cplx qv[3] = {q.q_plus, q.q_zero, q.q_minus};
        for (int s = 0; s < 3; ++s) {
            const Vec3 cv = fr.eval_col(s, rho);
            for (int i = 0; i < 3; ++i) Psi[i] += qv[s] * cv[i];
        }
        const auto d = fr.scalar_readoff(Psi, rho);
        const cplx c = std::exp(theta / (a + 1.0));
        return {c * d[0], d[1], d[2] / c};
    }
};

inline MassivePsiK massive_psi_k(const MassiveContext& ctx, cplx theta, double k) {
    MassivePsiK out;
    out.ctx = &ctx;
    out.theta = theta;
    out.k = k;
    out.theta_k = theta - cplx(0.0, 2.0 * kPi * k / 3.0);
    out.q = ctx.q_triple(out.theta_k);
    return out;
}

/** W[psi_{k1}, psi_{k2}, psi_{k3}] at rho on the evaluation ray. */
inline cplx massive_wronskian(const MassiveContext& ctx, cplx theta, double k1, double k2,
                              double k3, double rho) {
    Mat3 W;
    const double ks[3] = {k1, k2, k3};
    for (int r = 0; r < 3; ++r) {
        const auto t = massive_psi_k(ctx, theta, ks[r]).eval(rho);
        W[r] = {t[0], t[1], t[2]};
    }
    return det3(W);
}

/** u_{-1/2,1/2} and i sqrt(3) psi_0 at rho; equal when the construction is right. */
inline std::pair<cplx, cplx> massive_u_pair(const MassiveContext& ctx, cplx theta, double rho) {
    const auto a = massive_psi_k(ctx, theta, -0.5).eval(rho);
    const auto b = massive_psi_k(ctx, theta, 0.5).eval(rho);
    const auto c = massive_psi_k(ctx, theta, 0.0).eval(rho);
    const cplx u = a[0] * b[1] - b[0] * a[1];
    return {u, cplx(0.0, std::sqrt(3.0)) * c[0]};
}

}  // namespace odeimbd
