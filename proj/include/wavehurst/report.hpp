#pragma once

#include <cmath>
#include <ostream>
#include <string>

#include "json.hpp"

#include "csv.hpp"
#include "estimator.hpp"

namespace wavehurst {

inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

/// {n, J_lo, J_hi, qhat, j_star, h_hat, clamped, sigma_hat[, diagnostics]}.
inline nlohmann::json to_json(const EnergyProfile& p, bool diagnostics = false) {
    nlohmann::json q = nlohmann::json::array();
    for (double v : p.qhat) q.push_back(v);
    nlohmann::json j = {{"n", p.n()},
                        {"J_lo", p.min_level},
                        {"J_hi", p.max_level},
                        {"qhat", q},
                        {"j_star", p.j_star},
                        {"h_hat", finite_or_null(p.h_hat)},
                        {"clamped", p.clamped},
                        {"sigma_hat", p.sigma_hat ? finite_or_null(*p.sigma_hat) : nlohmann::json()}};
    if (diagnostics) {
        nlohmann::json levels = nlohmann::json::array();
        for (int lv = p.min_level; lv <= p.max_level; ++lv) {
            const auto i = static_cast<std::size_t>(lv - p.min_level);
            levels.push_back({{"j", lv},
                              {"qhat", p.qhat[i]},
                              {"sum_dtilde2", p.raw_energy[i]},
                              {"sum_vbar", p.noise_energy[i]},
                              {"threshold", p.threshold(lv)},
                              {"qualifies", p.qhat[i] >= p.threshold(lv)}});
        }
        j["diagnostics"] = {{"levels", levels}, {"empty_selection", p.empty_selection}, {"edge_pair", p.edge_pair}};
    }
    return j;
}

/// One `level` row per j followed by a `summary` row.
inline void write_profile_csv(std::ostream& out, const EnergyProfile& p) {
    using csv::format_double;
    out << "kind,j,qhat,threshold,j_star,h_hat,clamped,sigma_hat\n";
    for (int lv = p.min_level; lv <= p.max_level; ++lv)
        out << "level," << lv << ',' << format_double(p.q(lv)) << ',' << format_double(p.threshold(lv)) << ",,,,\n";
    out << "summary,,,," << p.j_star << ',' << format_double(p.h_hat) << ',' << (p.clamped ? 1 : 0) << ','
        << (p.sigma_hat ? format_double(*p.sigma_hat) : std::string("nan")) << '\n';
}

}  // namespace wavehurst
