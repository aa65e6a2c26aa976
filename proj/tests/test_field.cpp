#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "odeimbd/field.hpp"
#include "odeimbd/io.hpp"
#include "oracles.hpp"

using namespace odeimbd;

static FieldSolution& reference_solution() {
    // (alpha=1, g=0.1, s=1) on the reference grid, shared across test cases
    static FieldSolution sol = [] {
        ModelParams p{1.0, 0.1, 1.0};
        FieldConfig c;
        c.rho_min = 1e-4;
        c.rho_max = 12.0;
        c.n_rho = 2001;
        c.n_modes = 8;
        return solve_field(p, c);
    }();
    return sol;
}

TEST_CASE("fd_weights reproduce standard stencils") {
    std::vector<double> xs{0, 1, 2, 3, 4};
    auto w = fd_weights(2.0, xs, 2);
    const double c5[5] = {-1.0 / 12, 4.0 / 3, -5.0 / 2, 4.0 / 3, -1.0 / 12};
    for (int i = 0; i < 5; ++i) CHECK(w[i] == doctest::Approx(c5[i]).epsilon(1e-12));
    // exactness on a quartic for the first derivative at an off-center node
    auto w1 = fd_weights(1.0, xs, 1);
    double acc = 0.0;
    for (int i = 0; i < 5; ++i) acc += w1[i] * std::pow(xs[i], 4);
    CHECK(acc == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("exact logarithmic solution at s = 0, alpha = g") {
    ModelParams p{0.3, 0.3, 0.0};
    FieldConfig c;
    c.rho_min = 1e-3;
    c.rho_max = 10.0;
    c.n_rho = 301;
    c.n_modes = 2;
    auto sol = solve_field(p, c);
    CHECK(sol.newton_iters <= 2);
    CHECK(sol.residual < 1e-10);
    // eta = -0.6 ln rho exactly
    for (double rho : {2e-3, 0.3, 1.7, 8.0}) {
        const auto j = sol.eta_eval(rho, 0.2);
        CHECK(std::abs(j.eta + 0.6 * std::log(rho)) < 1e-9);
        CHECK(std::abs(j.d_rho + 0.6 / rho) < 1e-8 * (1.0 + 1.0 / rho));
    }
    CHECK(std::abs(sol.eta0) < 1e-8);
    for (double gk : sol.gamma) CHECK(std::abs(gk) < 1e-8);
}

TEST_CASE("reference solve meets tolerance and eta0 is finite") {
    auto& sol = reference_solution();
    CHECK(sol.residual < 1e-8);
    CHECK(std::isfinite(sol.eta0));
    CHECK(sol.fit_valid);
    // same-order discrete residual on a finer radial grid
    CHECK(verify_residual_fine(sol, 2) < 10.0 * sol.config.residual_tol);
    // independent plain second-order 2D evaluation carries its own O(h^2)
    // truncation; it corroborates the solution at that level
    CHECK(verify_residual_2d(sol) < 5e-4);
}

TEST_CASE("evenness and periodicity in phi") {
    auto& sol = reference_solution();
    for (double rho : {0.01, 0.4, 3.0}) {
        for (double phi : {0.13, 0.77}) {
            const auto a = sol.eta_eval(rho, phi);
            const auto b = sol.eta_eval(rho, -phi);
            CHECK(a.eta == doctest::Approx(b.eta).epsilon(1e-14));
            const auto c = sol.eta_eval(rho, phi + 2.0 * kPi / (3.0 * sol.params.alpha));
            CHECK(a.eta == doctest::Approx(c.eta).epsilon(1e-13));
        }
        CHECK(std::abs(sol.eta_eval(rho, 0.0).d_phi) < 1e-12);
    }
}

TEST_CASE("interpolant derivatives agree with centered differences") {
    auto& sol = reference_solution();
    const double hh = 1e-5;
    for (double rho : {0.02, 0.9, 5.0}) {
        for (double phi : {0.0, 0.3}) {
            const auto j = sol.eta_eval(rho, phi);
            const double drho = (sol.eta_eval(rho * (1 + hh), phi).eta -
                                 sol.eta_eval(rho * (1 - hh), phi).eta) /
                                (2 * hh * rho);
            CHECK(std::abs(j.d_rho - drho) < 1e-6 * (1.0 + std::abs(drho)));
            const double dphi =
                (sol.eta_eval(rho, phi + hh).eta - sol.eta_eval(rho, phi - hh).eta) / (2 * hh);
            CHECK(std::abs(j.d_phi - dphi) < 1e-6 * (1.0 + std::abs(dphi)));
        }
    }
    CHECK_THROWS_AS((void)sol.eta_eval(1e-6, 0.0), std::domain_error);
}

TEST_CASE("outer asymptote: eta + 2 alpha ln rho drifts below 1e-4") {
    // the gamma tail rho^{-3a} decays slowly, so the o(1) approach to the
    // -2a ln rho asymptote is measured on the angular average of a wide grid
    ModelParams p{1.0, 0.1, 1.0};
    FieldConfig c;
    c.rho_min = 1e-4;
    c.rho_max = 90.0;
    c.n_rho = 2601;
    c.n_modes = 8;
    c.residual_tol = 1e-7;
    auto sol = solve_field(p, c);
    std::vector<double> ts, vs;
    for (int i = 0; i < sol.n(); ++i) {
        if (sol.t[i] > std::log(sol.config.rho_max) - std::log(10.0)) {
            ts.push_back(sol.t[i]);
            vs.push_back(sol.modes[0][i] + 2.0 * sol.params.alpha * sol.t[i]);
        }
    }
    double tm = 0, vm = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) tm += ts[i], vm += vs[i];
    tm /= ts.size();
    vm /= vs.size();
    double num = 0, den = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        num += (ts[i] - tm) * (vs[i] - vm);
        den += (ts[i] - tm) * (ts[i] - tm);
    }
    CHECK(std::abs(num / den) < 1e-4);
}

TEST_CASE("local expansion coefficients match the equation's predictions") {
    auto& sol = reference_solution();
    const auto& lc = sol.local;
    REQUIRE(lc.c_pred_valid);
    CHECK(std::abs(lc.c1_fit - lc.c1_pred) / std::abs(lc.c1_pred) < 1e-3);
    CHECK(std::abs(lc.c2_fit - lc.c2_pred) / std::abs(lc.c2_pred) < 1e-3);
    MESSAGE("eta0 = ", lc.eta0, "  c1 fit/pred = ", lc.c1_fit, " / ", lc.c1_pred,
            "  c2 fit/pred = ", lc.c2_fit, " / ", lc.c2_pred);
}

TEST_CASE("grid refinement moves eta0 by less than 1e-5") {
    ModelParams p{1.0, 0.1, 1.0};
    FieldConfig c;
    c.rho_min = 1e-4;
    c.rho_max = 12.0;
    c.n_rho = 1001;
    c.n_modes = 6;
    auto a = solve_field(p, c);
    c.n_rho = 2001;
    auto b = solve_field(p, c);
    CHECK(std::abs(a.eta0 - b.eta0) < 1e-5);
}

TEST_CASE("resonant parameters refuse the fit but not the solve") {
    ModelParams p{1.0, 0.0, 1.0};  // g = 0 collides the correction families
    FieldConfig c;
    c.rho_min = 1e-3;
    c.rho_max = 10.0;
    c.n_rho = 601;
    c.n_modes = 4;
    auto sol = solve_field(p, c);
    CHECK(sol.residual < c.residual_tol);
    CHECK_FALSE(sol.fit_valid);
    CHECK_THROWS_AS((void)local_expansion_coeffs(sol), ResonanceError);
}

TEST_CASE("field JSON round-trip preserves all values") {
    auto& sol = reference_solution();
    const auto j = field_to_json(sol);
    auto back = field_from_json(nlohmann::json::parse(j.dump()));
    REQUIRE(back.modes.size() == sol.modes.size());
    for (std::size_t mm = 0; mm < sol.modes.size(); ++mm)
        for (std::size_t i = 0; i < sol.modes[mm].size(); ++i)
            CHECK(back.modes[mm][i] == sol.modes[mm][i]);
    CHECK(back.eta0 == sol.eta0);
    CHECK(back.residual == sol.residual);
    CHECK(back.params.alpha == sol.params.alpha);
    // unknown format rejected
    auto bad = j;
    bad["format"] = "odeim-bd/field/v0";
    CHECK_THROWS_AS((void)field_from_json(bad), std::invalid_argument);
}
