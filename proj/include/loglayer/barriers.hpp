#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "eigen.hpp"
#include "errors.hpp"
#include "grid.hpp"

namespace loglayer {

/// Constants extracted from the principal eigenpair that feed the barrier
/// amplitudes.  All extrema are taken over grid nodes, so the barrier sign
/// conditions hold exactly at the nodes by construction.
struct BarrierKit {
    double p = 0.0, q = 0.0;
    double mu_lower = 1.0;     // smallest mu for which the barriers are certified
    double beta = 0.0;         // principal Dirichlet eigenvalue
    double c1 = 0.0, c2 = 0.0; // min/max of -d(phi)/d(nu) over boundary nodes
    double c3 = 0.0;           // max of |phi'|^2 over nodes
    double eps0 = 0.0;         // boundary-layer split parameter
    double b1 = 0.0;           // min of |phi'|^2 over {dist <= eps0}
    double b2 = 0.0;           // min of phi over {dist >= eps0}
    double c_mu = 0.0;         // 1 + mu_lower^{-tau}  (sup of phi + mu^{-tau})
    double d1 = 0.0, d2 = 0.0; // min/max of phi/dist over interior nodes
    double tau = 0.0;          // (p-1)/(p-2q+1)
    double rho = 0.0;          // 2/(p-1)
    double A_lower = 0.0, A_upper = 0.0;
};

inline void validate_exponents(double p, double q) {
    require(std::isfinite(p) && p > 1.0, "p must satisfy p > 1");
    require(std::isfinite(q) && q > 0.0 && q < 1.0, "q must satisfy 0 < q < 1");
}

/// Lower/upper barrier amplitudes (A_lower, A_upper) from the kit constants:
///   upper: max carried over the interior and boundary sign conditions,
///   lower: min over the layer, core and boundary conditions.
inline std::pair<double, double> barrier_amplitudes(const BarrierKit& kit, double p, double q) {
    validate_exponents(p, q);
    const double rho = kit.rho;
    const double up1 = std::pow(rho * (rho + 1.0) * kit.c3 + rho * kit.c_mu * kit.beta + kit.c_mu * kit.c_mu,
                                1.0 / (p - 1.0));
    const double up2 = std::pow(rho * kit.c1, 1.0 / (q - 1.0));
    const double lo1 = std::pow(rho * (rho + 1.0) * kit.b1, 1.0 / (p - 1.0));
    const double lo2 = std::pow(kit.b2, 2.0 / (p - 1.0));
    const double lo3 = std::pow(rho * kit.c2, 1.0 / (q - 1.0));
    const double A_up = std::max(up1, up2);
    const double A_lo = std::min({lo1, lo2, lo3});
    require(A_lo > 0 && std::isfinite(A_up), "barrier amplitudes degenerate");
    return {A_lo, A_up};
}

/// Harvest barrier constants from an eigenpair.  If eps0 is not supplied it
/// is chosen by scanning a geometric ladder between the near-boundary grid
/// spacing and half the inradius, maximizing the lower amplitude A_lower.
inline BarrierKit barrier_constants(const EigenPair& pair, const GridPtr& grid,
                                    double p, double q, double mu_lower,
                                    std::optional<double> eps0_opt = {}) {
    validate_exponents(p, q);
    require(std::isfinite(mu_lower) && mu_lower > 0, "mu_lower must be positive");
    const RadialGrid& g = *grid;
    require(same_grid(g, *pair.phi.grid), "barrier_constants: eigenpair grid mismatch");

    BarrierKit kit;
    kit.p = p;
    kit.q = q;
    kit.mu_lower = mu_lower;
    kit.beta = pair.beta;
    kit.tau = (p - 1.0) / (p - 2.0 * q + 1.0);
    kit.rho = 2.0 / (p - 1.0);
    kit.c_mu = 1.0 + std::pow(mu_lower, -kit.tau);

    const auto nd = normal_derivative(pair.phi);
    kit.c1 = -nd[0];
    kit.c2 = -nd[0];
    for (double d : nd) {
        kit.c1 = std::min(kit.c1, -d);
        kit.c2 = std::max(kit.c2, -d);
    }
    require(kit.c1 > 0, "inward normal derivative of phi must be positive on the boundary");

    kit.c3 = 0.0;
    for (double d : pair.phi_prime.values) kit.c3 = std::max(kit.c3, d * d);

    // phi/dist comparison over interior nodes
    kit.d1 = std::numeric_limits<double>::infinity();
    kit.d2 = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g.is_boundary(i)) continue;
        const double ratio = pair.phi.values[i] / g.boundary_distance(i);
        kit.d1 = std::min(kit.d1, ratio);
        kit.d2 = std::max(kit.d2, ratio);
    }
    require(kit.d1 > 0, "phi/dist must be positive over interior nodes");

    // pick eps0: either the supplied value or the scan winner
    auto layer_constants = [&](double eps) -> std::optional<std::pair<double, double>> {
        double b1 = std::numeric_limits<double>::infinity();
        double b2 = std::numeric_limits<double>::infinity();
        bool has_layer = false, has_core = false;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double d = g.boundary_distance(i);
            const double dp = pair.phi_prime.values[i];
            if (d <= eps) { b1 = std::min(b1, dp * dp); has_layer = true; }
            if (d >= eps) { b2 = std::min(b2, pair.phi.values[i]); has_core = true; }
        }
        if (!has_layer || !has_core || !(b1 > 0) || !(b2 > 0)) return std::nullopt;
        return std::make_pair(b1, b2);
    };
    auto lower_amplitude = [&](double b1, double b2) {
        const double lo1 = std::pow(kit.rho * (kit.rho + 1.0) * b1, 1.0 / (p - 1.0));
        const double lo2 = std::pow(b2, 2.0 / (p - 1.0));
        const double lo3 = std::pow(kit.rho * kit.c2, 1.0 / (q - 1.0));
        return std::min({lo1, lo2, lo3});
    };

    if (eps0_opt) {
        require(*eps0_opt > 0 && *eps0_opt < g.spec.inradius(),
                "eps0 must lie in (0, inradius)");
        const auto bc = layer_constants(*eps0_opt);
        if (!bc)
            throw numerical_error("barrier_constants: supplied eps0 gives no positive layer constants");
        kit.eps0 = *eps0_opt;
        kit.b1 = bc->first;
        kit.b2 = bc->second;
    } else {
        double lo = g.min_spacing();
        for (std::size_t b : g.boundary_indices) {
            const std::size_t nb = (b == 0) ? 1 : b - 1;
            lo = std::max(lo, 1.5 * std::abs(g.nodes[b] - g.nodes[nb]));
        }
        const double hi = 0.5 * g.spec.inradius();
        require(lo < hi, "grid too coarse to place the boundary layer split");
        const int n_scan = 60;
        double best = -1.0;
        for (int k = 0; k <= n_scan; ++k) {
            const double eps = lo * std::pow(hi / lo, double(k) / n_scan);
            const auto bc = layer_constants(eps);
            if (!bc) continue;
            const double A = lower_amplitude(bc->first, bc->second);
            if (A > best) {
                best = A;
                kit.eps0 = eps;
                kit.b1 = bc->first;
                kit.b2 = bc->second;
            }
        }
        if (!(best > 0))
            throw numerical_error("barrier_constants: eps0 scan found no valid layer split");
    }

    auto [alo, aup] = barrier_amplitudes(kit, p, q);
    kit.A_lower = alo;
    kit.A_upper = aup;
    return kit;
}

/// Barrier profile  psi_A = A (phi + mu^{-tau})^{-rho}  as a nodal field.
inline RadialField barrier_profile(double A, const EigenPair& pair, double mu, double p, double q) {
    validate_exponents(p, q);
    require(A > 0, "barrier amplitude must be positive");
    require(mu > 0, "barrier profile requires mu > 0");
    const double tau = (p - 1.0) / (p - 2.0 * q + 1.0);
    const double rho = 2.0 / (p - 1.0);
    const double shift = std::pow(mu, -tau);
    RadialField psi = make_field(pair.phi.grid);
    for (std::size_t i = 0; i < psi.size(); ++i)
        psi.values[i] = A * std::pow(pair.phi.values[i] + shift, -rho);
    ensure_finite(psi, "barrier_profile");
    return psi;
}

/// Interior and boundary residuals of psi_A in closed form:
///   Delta psi + psi - psi^p = A (phi + mu^{-tau})^{-rho-2} I_A,
///   I_A = rho(rho+1)|phi'|^2 + rho(phi + mu^{-tau}) beta phi
///         + (phi + mu^{-tau})^2 - A^{p-1},
///   d(psi)/d(nu) - mu psi^q = A^q mu^{tau(rho+1)}
///        { A^{1-q} rho (-d(phi)/d(nu)) - 1 }.
/// Evaluating these exactly (rather than differencing psi) keeps the sign
/// checks meaningful in the thin layer.
struct BarrierResidual {
    RadialField interior;
    std::vector<double> boundary; // ascending boundary-node order
};

inline BarrierResidual residual_of_barrier(double A, const EigenPair& pair, double mu,
                                           double p, double q) {
    validate_exponents(p, q);
    require(A > 0 && mu > 0, "residual_of_barrier requires A > 0 and mu > 0");
    const double tau = (p - 1.0) / (p - 2.0 * q + 1.0);
    const double rho = 2.0 / (p - 1.0);
    const double shift = std::pow(mu, -tau);
    const double beta = pair.beta;

    BarrierResidual out;
    out.interior = make_field(pair.phi.grid);
    for (std::size_t i = 0; i < out.interior.size(); ++i) {
        const double phi = pair.phi.values[i];
        const double dphi = pair.phi_prime.values[i];
        const double s = phi + shift;
        const double IA = rho * (rho + 1.0) * dphi * dphi + rho * s * beta * phi + s * s
                          - std::pow(A, p - 1.0);
        out.interior.values[i] = A * std::pow(s, -rho - 2.0) * IA;
    }
    ensure_finite(out.interior, "residual_of_barrier");

    const auto nd = normal_derivative(pair.phi);
    const double bpref = std::pow(A, q) * std::pow(mu, tau * (rho + 1.0));
    for (double dn : nd)
        out.boundary.push_back(bpref * (std::pow(A, 1.0 - q) * rho * (-dn) - 1.0));
    return out;
}

} // namespace loglayer
