#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "barriers.hpp"
#include "errors.hpp"
#include "grid.hpp"
#include "linalg.hpp"
#include "solver.hpp"

namespace loglayer {

/// Log-log fit of the boundary values against mu over a window, compared to
/// the predicted exponent 2/(p - 2q + 1), with the per-mu barrier bracket
/// check  A_lower mu^sigma <= u(boundary) <= A_upper mu^sigma.
struct ScalingReport {
    double exponent_theory = 0.0;
    double exponent_fitted = 0.0;
    double r2 = 0.0;
    double mu_lo = 0.0, mu_hi = 0.0;
    std::vector<double> window_mu;
    std::vector<double> window_boundary;
    std::vector<bool> per_mu_sandwich;
    bool sandwich_all = true;
};

inline ScalingReport boundary_scaling_fit(const ContinuationResult& cont, const BarrierKit& kit,
                                          double mu_lo, double mu_hi, double tol_rel = 1e-2) {
    require(mu_lo > 0 && mu_hi > mu_lo, "scaling window must satisfy 0 < mu_lo < mu_hi");
    require(mu_hi >= 100.0 * mu_lo * (1.0 - 1e-12), "scaling window must span at least two decades");
    require(mu_lo >= kit.mu_lower, "scaling window must lie above mu_lower of the barrier kit");

    ScalingReport rep;
    rep.mu_lo = mu_lo;
    rep.mu_hi = mu_hi;
    const double p = cont.p, q = cont.q;
    rep.exponent_theory = 2.0 / (p - 2.0 * q + 1.0);
    const double sigma = kit.tau * kit.rho; // == exponent_theory

    for (std::size_t k = 0; k < cont.mu_values.size(); ++k) {
        const double mu = cont.mu_values[k];
        if (mu < mu_lo * (1.0 - 1e-12) || mu > mu_hi * (1.0 + 1e-12)) continue;
        rep.window_mu.push_back(mu);
        rep.window_boundary.push_back(cont.boundary_values[k]);
        const double lo = kit.A_lower * std::pow(mu, sigma);
        const double hi = kit.A_upper * std::pow(mu, sigma);
        const double ub = cont.boundary_values[k];
        const bool ok = ub >= lo * (1.0 - tol_rel) && ub <= hi * (1.0 + tol_rel);
        rep.per_mu_sandwich.push_back(ok);
        rep.sandwich_all = rep.sandwich_all && ok;
    }
    require(rep.window_mu.size() >= 4, "scaling window contains too few continuation points");
    const auto fit = loglog_fit(rep.window_mu, rep.window_boundary);
    rep.exponent_fitted = fit.slope;
    rep.r2 = fit.r2;
    return rep;
}

enum class Classification { convergent, divergent };

/// One norm sweep along the continuation curve.
struct NormSweep {
    double r = 0.0;
    std::vector<double> mu;
    std::vector<double> values;
    Classification classification = Classification::convergent;
    std::optional<double> growth_exponent;          // fitted, divergent sweeps only
    std::optional<double> oracle_exponent;          // tau(2r/(p-1) - 1) when divergent and a kit is given
    std::optional<std::pair<double, double>> limit_window; // barrier window, convergent r > 0 with kit
    bool outside_scope = false;                     // hypothesis warning (annulus gradients)
};

namespace detail {

/// Cauchy-increment classifier: over the tail of the geometric mu schedule,
/// increments of a convergent sweep shrink while increments of a divergent
/// sweep grow; the sign of the fitted slope of log|increment| vs log mu
/// separates the two.  Divergence additionally requires monotone growth.
inline void classify_sweep(NormSweep& sweep) {
    const auto& mu = sweep.mu;
    const auto& v = sweep.values;
    require(mu.size() >= 6, "norm sweep needs at least 6 schedule points to classify");

    double vmax = 0.0;
    for (double x : v) vmax = std::max(vmax, std::abs(x));
    std::vector<double> inc_mu, inc_val;
    for (std::size_t i = 0; i + 1 < mu.size(); ++i) {
        if (mu[i] <= 0) continue;
        inc_mu.push_back(std::sqrt(mu[i] * mu[i + 1]));
        inc_val.push_back(std::abs(v[i + 1] - v[i]));
    }
    // effectively constant sweep
    double inc_max = 0.0;
    for (double x : inc_val) inc_max = std::max(inc_max, x);
    if (inc_max <= 1e-12 * std::max(vmax, 1.0)) {
        sweep.classification = Classification::convergent;
        return;
    }

    // use the top ~1.5 decades of mu for the increment trend
    const double mu_hi = inc_mu.back();
    std::vector<double> tx, ty;
    for (std::size_t i = 0; i < inc_mu.size(); ++i)
        if (inc_mu[i] >= mu_hi / 31.622776601683793 && inc_val[i] > 0) {
            tx.push_back(std::log(inc_mu[i]));
            ty.push_back(std::log(inc_val[i]));
        }
    if (tx.size() < 3) { // increments vanished: saturated, hence convergent
        sweep.classification = Classification::convergent;
        return;
    }
    const auto trend = fit_line(tx, ty);
    bool monotone_up = true;
    for (std::size_t i = 0; i + 1 < v.size(); ++i)
        if (v[i + 1] < v[i] * (1.0 - 1e-12) - 1e-300) monotone_up = false;
    sweep.classification =
        (trend.slope > 0.0 && monotone_up) ? Classification::divergent : Classification::convergent;

    if (sweep.classification == Classification::divergent) {
        // growth exponent from the last decade of the sweep itself
        std::vector<double> fx, fy;
        for (std::size_t i = 0; i < mu.size(); ++i)
            if (mu[i] >= mu.back() / 10.0 * (1.0 - 1e-12) && mu[i] > 0 && v[i] > 0) {
                fx.push_back(mu[i]);
                fy.push_back(v[i]);
            }
        if (fx.size() >= 3) sweep.growth_exponent = loglog_fit(fx, fy).slope;
    }
}

/// Volume integral of (phi + shift)^{-rho_r}, which blows up at the boundary
/// when shift = 0: the boundary-adjacent cells are integrated analytically
/// using the linear model phi ~ phi_nb (d / h), valid since phi vanishes
/// linearly at the boundary.
inline double barrier_power_integral(const EigenPair& pair, double rho_r, double shift) {
    const RadialGrid& g = *pair.phi.grid;
    const double omega = unit_sphere_area(g.spec.dim);
    require(rho_r < 1.0 || shift > 0.0, "barrier integral diverges for rho*r >= 1 without shift");
    double acc = 0.0;
    auto integrand = [&](std::size_t i) {
        return std::pow(pair.phi.values[i] + shift, -rho_r) * std::pow(g.nodes[i], g.spec.dim - 1);
    };
    for (std::size_t i = 0; i + 1 < g.size(); ++i) {
        const double h = g.nodes[i + 1] - g.nodes[i];
        const bool sing_right = g.is_boundary(i + 1) && shift == 0.0;
        const bool sing_left = g.is_boundary(i) && shift == 0.0;
        if (sing_right) {
            // int_0^h (phi_i t/h)^{-rho_r} dt = phi_i^{-rho_r} h/(1-rho_r)
            acc += std::pow(pair.phi.values[i], -rho_r) * h / (1.0 - rho_r) *
                   std::pow(g.nodes[i + 1], g.spec.dim - 1);
        } else if (sing_left) {
            acc += std::pow(pair.phi.values[i + 1], -rho_r) * h / (1.0 - rho_r) *
                   std::pow(g.nodes[i], g.spec.dim - 1);
        } else {
            acc += 0.5 * h * (integrand(i) + integrand(i + 1));
        }
    }
    return omega * acc;
}

} // namespace detail

/// ||u_mu||^r_{L^r} =  int u^r dx along the continuation curve, classified as
/// convergent/divergent.  When the eigenpair and kit are supplied, divergent
/// sweeps carry the barrier-predicted growth exponent tau(2r/(p-1) - 1) and
/// convergent sweeps (r > 0) the a-priori window from the barrier envelopes.
inline NormSweep lr_volume_sweep(const ContinuationResult& cont, double r,
                                 const EigenPair* pair = nullptr, const BarrierKit* kit = nullptr) {
    require(!cont.solutions.empty(), "lr_volume_sweep: empty continuation");
    NormSweep sweep;
    sweep.r = r;
    for (std::size_t k = 0; k < cont.mu_values.size(); ++k) {
        RadialField f = make_field(cont.grid);
        const auto& u = cont.solutions[k].u.values;
        for (std::size_t i = 0; i < f.size(); ++i) f.values[i] = std::pow(u[i], r);
        sweep.mu.push_back(cont.mu_values[k]);
        sweep.values.push_back(integrate_volume(f));
    }
    detail::classify_sweep(sweep);

    if (kit && pair) {
        const double rho_r = kit->rho * r;
        if (sweep.classification == Classification::divergent)
            sweep.oracle_exponent = kit->tau * (2.0 * r / (cont.p - 1.0) - 1.0);
        else if (r > 0 && rho_r < 1.0) {
            const double mu_max = sweep.mu.back();
            const double shift = std::pow(mu_max, -kit->tau);
            const double lo = std::pow(kit->A_lower, r) *
                              detail::barrier_power_integral(*pair, rho_r, shift);
            const double hi = std::pow(kit->A_upper, r) *
                              detail::barrier_power_integral(*pair, rho_r, 0.0);
            sweep.limit_window = std::make_pair(lo, hi);
        }
    }
    return sweep;
}

/// ||grad u_mu||_{L^r} along the curve (|grad u| = |u'(r)| radially).
/// Outside the theorem's hypotheses (non-convex domain with r above the
/// threshold (p-1)/2) the sweep is flagged but still computed.
inline NormSweep gradient_norm_sweep(const ContinuationResult& cont, double r) {
    require(!cont.solutions.empty(), "gradient_norm_sweep: empty continuation");
    require(r > 0, "gradient sweep requires r > 0");
    NormSweep sweep;
    sweep.r = r;
    for (std::size_t k = 0; k < cont.mu_values.size(); ++k) {
        RadialField du = differentiate(cont.solutions[k].u);
        RadialField f = make_field(cont.grid);
        for (std::size_t i = 0; i < f.size(); ++i) f.values[i] = std::pow(std::abs(du.values[i]), r);
        sweep.mu.push_back(cont.mu_values[k]);
        sweep.values.push_back(std::pow(integrate_volume(f), 1.0 / r));
    }
    detail::classify_sweep(sweep);
    sweep.outside_scope =
        (cont.grid->spec.kind == DomainKind::annulus) && (r >= (cont.p - 1.0) / 2.0);
    return sweep;
}

/// Nodewise margins of the barrier sandwich psi_lower <= u <= psi_upper,
/// passing when no violation exceeds tol_rel relative to the local solution.
struct SandwichReport {
    RadialField lower_margin; // u - psi_lower
    RadialField upper_margin; // psi_upper - u
    double worst_rel_violation = 0.0;
    double tol_rel = 0.0;
    bool pass = true;
};

inline SandwichReport sandwich_report(const Solution& sol, const EigenPair& pair,
                                      const BarrierKit& kit, double tol_rel = 1e-2) {
    require(sol.params.mu >= kit.mu_lower, "sandwich_report requires mu >= mu_lower");
    require(same_grid(*sol.u.grid, *pair.phi.grid), "sandwich_report: grid mismatch");
    const double p = kit.p, q = kit.q;
    RadialField lo = barrier_profile(kit.A_lower, pair, sol.params.mu, p, q);
    RadialField hi = barrier_profile(kit.A_upper, pair, sol.params.mu, p, q);

    SandwichReport rep;
    rep.tol_rel = tol_rel;
    rep.lower_margin = make_field(sol.u.grid);
    rep.upper_margin = make_field(sol.u.grid);
    for (std::size_t i = 0; i < sol.u.size(); ++i) {
        const double u = sol.u.values[i];
        rep.lower_margin.values[i] = u - lo.values[i];
        rep.upper_margin.values[i] = hi.values[i] - u;
        const double viol = std::max(0.0, std::max(-rep.lower_margin.values[i],
                                                   -rep.upper_margin.values[i])) / u;
        rep.worst_rel_violation = std::max(rep.worst_rel_violation, viol);
    }
    rep.pass = rep.worst_rel_violation <= tol_rel;
    return rep;
}

} // namespace loglayer
