#pragma once

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "odeimbd/field.hpp"
#include "odeimbd/types.hpp"

namespace odeimbd {

inline constexpr const char* kFieldFormat = "odeim-bd/field/v1";

inline nlohmann::json field_to_json(const FieldSolution& sol) {
    nlohmann::json j;
    j["format"] = kFieldFormat;
    j["params"] = {{"alpha", sol.params.alpha}, {"g", sol.params.g}, {"s", sol.params.s}};
    j["grid"] = {{"rho_min", sol.config.rho_min},
                 {"rho_max", sol.config.rho_max},
                 {"points", sol.config.n_rho}};
    j["modes"] = sol.modes;
    j["eta0"] = sol.eta0;
    j["gamma"] = sol.gamma;
    j["residual"] = sol.residual;
    return j;
}

inline FieldSolution field_from_json(const nlohmann::json& j) {
    if (!j.contains("format") || j.at("format").get<std::string>() != kFieldFormat)
        throw std::invalid_argument("field_from_json: unknown format tag");
    FieldSolution sol;
    sol.params.alpha = j.at("params").at("alpha").get<double>();
    sol.params.g = j.at("params").at("g").get<double>();
    sol.params.s = j.at("params").at("s").get<double>();
    sol.config.rho_min = j.at("grid").at("rho_min").get<double>();
    sol.config.rho_max = j.at("grid").at("rho_max").get<double>();
    sol.config.n_rho = j.at("grid").at("points").get<int>();
    sol.modes = j.at("modes").get<std::vector<std::vector<double>>>();
    sol.config.n_modes = int(sol.modes.size());
    sol.eta0 = j.at("eta0").get<double>();
    sol.gamma = j.at("gamma").get<std::vector<double>>();
    sol.residual = j.at("residual").get<double>();
    sol.fit_valid = std::isfinite(sol.eta0);
    const int N = sol.config.n_rho;
    sol.t.resize(N);
    const double t0 = std::log(sol.config.rho_min), t1 = std::log(sol.config.rho_max);
    for (int i = 0; i < N; ++i) sol.t[i] = t0 + i * (t1 - t0) / (N - 1);
    // rebuild the fit diagnostics for downstream consumers
    if (sol.fit_valid && resonance_margin(sol.params.alpha, sol.params.g) >= 1e-6)
        sol.local = local_expansion_coeffs(sol);
    return sol;
}

inline void save_field(const FieldSolution& sol, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_field: cannot open " + path);
    f << field_to_json(sol).dump();
    f << "\n";
}

inline FieldSolution load_field(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_field: cannot open " + path);
    nlohmann::json j;
    f >> j;
    return field_from_json(j);
}

/** Shortest round-trip double formatting for CSV output. */
inline std::string fmt_double(double x) {
    std::ostringstream os;
    os << std::setprecision(17) << x;
    // try shorter representations that still round-trip
    for (int prec = 15; prec <= 17; ++prec) {
        std::ostringstream t;
        t << std::setprecision(prec) << x;
        double back = 0.0;
        std::istringstream(t.str()) >> back;
        if (back == x || (std::isnan(back) && std::isnan(x))) return t.str();
    }
    return os.str();
}

struct CsvWriter {
    std::ofstream f;
    explicit CsvWriter(const std::string& path) : f(path) {
        if (!f) throw std::runtime_error("CsvWriter: cannot open " + path);
    }
    void comment(const std::string& line) { f << "# " << line << "\n"; }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i)
            f << cells[i] << (i + 1 < cells.size() ? "," : "");
        f << "\n";
    }
};

}  // namespace odeimbd
