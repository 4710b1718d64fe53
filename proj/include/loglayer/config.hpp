#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "grid.hpp"

namespace loglayer {

/// Everything a study run needs, loadable from a JSON case file.  Every field
/// has a sensible default so a minimal file only names the domain and the
/// exponents.
struct CaseConfig {
    std::string case_label = "case";
    DomainSpec domain{};
    double p = 3.0;
    double q = 0.5;
    double mu_lower = 1.0;

    std::size_t grid_nodes = 4001;
    Grading grading = Grading::boundary_graded(2.0);

    std::vector<double> mu_schedule;     // always starts at 0
    double newton_tol = 1e-10;
    double eigen_tol = 1e-10;
    double monotone_tol = 1e-8;
    double sandwich_rel_tol = 1e-2;

    double scaling_mu_lo = 1e2;
    double scaling_mu_hi = 1e5;
    std::vector<double> lr_exponents;    // empty at load time -> {thr/2, thr, 2 thr}
    std::vector<double> grad_exponents{1.0, 2.0};
    std::vector<double> dirichlet_levels; // empty -> decades up to 3x max boundary value
    std::vector<double> eps_list{0.2};

    double lr_threshold() const { return (p - 1.0) / 2.0; }

    void validate() const {
        domain.validate();
        validate_exponents(p, q);
        require(mu_lower > 0, "mu_lower must be positive");
        require(grid_nodes >= 64, "grid.nodes must be at least 64");
        require(!mu_schedule.empty() && mu_schedule.front() == 0.0,
                "mu_schedule must start at 0");
        for (std::size_t i = 0; i + 1 < mu_schedule.size(); ++i)
            require(mu_schedule[i] < mu_schedule[i + 1], "mu_schedule must be strictly increasing");
        require(newton_tol > 0 && eigen_tol > 0 && monotone_tol > 0 && sandwich_rel_tol > 0,
                "tolerances must be positive");
        require(scaling_mu_lo > 0 && scaling_mu_hi > scaling_mu_lo,
                "scaling_window must satisfy 0 < lo < hi");
        require(scaling_mu_lo >= mu_lower, "scaling_window must lie above mu_lower");
        require(mu_schedule.back() >= scaling_mu_hi,
                "mu_schedule must reach the top of the scaling_window");
        for (double r : lr_exponents) require(r > 0, "lr_exponents must be positive");
        for (double r : grad_exponents) require(r > 0, "grad_exponents must be positive");
        for (double lv : dirichlet_levels) require(lv >= 1.0, "dirichlet_levels must be >= 1");
        for (std::size_t i = 0; i + 1 < dirichlet_levels.size(); ++i)
            require(dirichlet_levels[i] < dirichlet_levels[i + 1],
                    "dirichlet_levels must be strictly increasing");
        for (double e : eps_list)
            require(e > 0 && e < domain.inradius(), "eps_list entries must lie in (0, inradius)");
    }
};

/// Default mu schedule: {0} then a quarter-decade geometric ladder
/// 10^{-1}, ..., 10^{5}.
inline std::vector<double> default_mu_schedule(int k_lo = -4, int k_hi = 20) {
    std::vector<double> s{0.0};
    for (int k = k_lo; k <= k_hi; ++k) s.push_back(std::pow(10.0, 0.25 * k));
    return s;
}

inline std::vector<double> default_lr_exponents(double p) {
    const double thr = (p - 1.0) / 2.0;
    return {0.5 * thr, thr, 2.0 * thr};
}

namespace detail {

inline const nlohmann::json* find_key(const nlohmann::json& j, const char* key) {
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

inline double num_at(const nlohmann::json& j, const char* key, double fallback) {
    if (const auto* v = find_key(j, key)) {
        require(v->is_number(), std::string("config field '") + key + "' must be a number");
        return v->get<double>();
    }
    return fallback;
}

inline std::vector<double> num_list(const nlohmann::json& v, const char* key) {
    require(v.is_array(), std::string("config field '") + key + "' must be an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
        require(x.is_number(), std::string("config field '") + key + "' must be an array of numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

} // namespace detail

inline CaseConfig parse_config(const nlohmann::json& j) {
    require(j.is_object(), "config root must be a JSON object");
    CaseConfig c;
    if (const auto* v = detail::find_key(j, "case_label")) {
        require(v->is_string(), "config field 'case_label' must be a string");
        c.case_label = v->get<std::string>();
    }

    const auto* dom = detail::find_key(j, "domain");
    require(dom != nullptr && dom->is_object(), "config requires a 'domain' object");
    {
        const auto* kind = detail::find_key(*dom, "kind");
        require(kind != nullptr && kind->is_string(),
                "config field 'domain.kind' must be \"ball\" or \"annulus\"");
        const std::string k = kind->get<std::string>();
        if (k == "ball") c.domain.kind = DomainKind::ball;
        else if (k == "annulus") c.domain.kind = DomainKind::annulus;
        else throw validation_error("config field 'domain.kind' must be \"ball\" or \"annulus\"");
        c.domain.dim = static_cast<int>(detail::num_at(*dom, "dim", 2.0));
        c.domain.r_outer = detail::num_at(*dom, "r_outer", 1.0);
        c.domain.r_inner = detail::num_at(*dom, "r_inner",
                                          c.domain.kind == DomainKind::annulus ? 0.5 : 0.0);
    }

    c.p = detail::num_at(j, "p", c.p);
    c.q = detail::num_at(j, "q", c.q);
    c.mu_lower = detail::num_at(j, "mu_lower", c.mu_lower);

    if (const auto* g = detail::find_key(j, "grid")) {
        require(g->is_object(), "config field 'grid' must be an object");
        c.grid_nodes = static_cast<std::size_t>(detail::num_at(*g, "nodes", 4001.0));
        std::string kind = "boundary";
        if (const auto* gk = detail::find_key(*g, "grading")) {
            require(gk->is_string(), "config field 'grid.grading' must be \"uniform\" or \"boundary\"");
            kind = gk->get<std::string>();
        }
        const double s = detail::num_at(*g, "strength", 2.0);
        if (kind == "uniform") c.grading = Grading::uniform();
        else if (kind == "boundary") c.grading = Grading::boundary_graded(s);
        else throw validation_error("config field 'grid.grading' must be \"uniform\" or \"boundary\"");
    }

    if (const auto* ms = detail::find_key(j, "mu_schedule")) {
        if (ms->is_array()) {
            c.mu_schedule = detail::num_list(*ms, "mu_schedule");
        } else {
            require(ms->is_object(),
                    "config field 'mu_schedule' must be an array or a {decades, points_per_decade} object");
            const auto* dec = detail::find_key(*ms, "decades");
            require(dec != nullptr && dec->is_array() && dec->size() == 2,
                    "config field 'mu_schedule.decades' must be [k_lo, k_hi]");
            const int ppd = static_cast<int>(detail::num_at(*ms, "points_per_decade", 4.0));
            require(ppd >= 1, "config field 'mu_schedule.points_per_decade' must be >= 1");
            const int k_lo = static_cast<int>((*dec)[0].get<double>() * ppd);
            const int k_hi = static_cast<int>((*dec)[1].get<double>() * ppd);
            require(k_lo < k_hi, "config field 'mu_schedule.decades' must be increasing");
            c.mu_schedule = {0.0};
            for (int k = k_lo; k <= k_hi; ++k)
                c.mu_schedule.push_back(std::pow(10.0, static_cast<double>(k) / ppd));
        }
    } else {
        c.mu_schedule = default_mu_schedule();
    }

    if (const auto* t = detail::find_key(j, "tolerances")) {
        require(t->is_object(), "config field 'tolerances' must be an object");
        c.newton_tol = detail::num_at(*t, "newton", c.newton_tol);
        c.eigen_tol = detail::num_at(*t, "eigen", c.eigen_tol);
        c.monotone_tol = detail::num_at(*t, "monotone", c.monotone_tol);
        c.sandwich_rel_tol = detail::num_at(*t, "sandwich_rel", c.sandwich_rel_tol);
    }

    if (const auto* w = detail::find_key(j, "scaling_window")) {
        const auto lw = detail::num_list(*w, "scaling_window");
        require(lw.size() == 2, "config field 'scaling_window' must be [mu_lo, mu_hi]");
        c.scaling_mu_lo = lw[0];
        c.scaling_mu_hi = lw[1];
    }
    if (const auto* v = detail::find_key(j, "lr_exponents"))
        c.lr_exponents = detail::num_list(*v, "lr_exponents");
    if (c.lr_exponents.empty()) c.lr_exponents = default_lr_exponents(c.p);
    if (const auto* v = detail::find_key(j, "grad_exponents"))
        c.grad_exponents = detail::num_list(*v, "grad_exponents");
    if (const auto* v = detail::find_key(j, "dirichlet_levels"))
        c.dirichlet_levels = detail::num_list(*v, "dirichlet_levels");
    if (const auto* v = detail::find_key(j, "eps_list"))
        c.eps_list = detail::num_list(*v, "eps_list");

    c.validate();
    return c;
}

inline CaseConfig load_config(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw validation_error("config file is not valid JSON: " + std::string(e.what()));
    }
    return parse_config(j);
}

/// Automatic Dirichlet level ladder: whole decades 10, 100, ... up to the
/// smallest decade at least 3x the largest boundary value seen, so the
/// approximation quality is tied to the data rather than a fixed cap.
inline std::vector<double> auto_dirichlet_levels(double max_boundary_value) {
    std::vector<double> levels;
    double lv = 10.0;
    const double target = 3.0 * std::max(max_boundary_value, 1.0);
    while (true) {
        levels.push_back(lv);
        if (lv >= target) break;
        lv *= 10.0;
        if (lv > 1e12) { levels.push_back(lv); break; } // hard ceiling, never hit in practice
    }
    return levels;
}

} // namespace loglayer
