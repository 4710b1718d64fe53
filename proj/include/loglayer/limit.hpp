#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "solver.hpp"

namespace loglayer {

/// Approximation of the boundary blow-up solution u_infinity of
///   -Delta u = u - u^p,  u = +infinity on the boundary,
/// obtained from a ladder of Dirichlet problems u = level on the boundary.
/// u_infinity/est_error hold interior nodal values; boundary entries are set
/// to +infinity as an explicit divergence marker.
struct BlowupApprox {
    GridPtr grid;
    double p = 0.0;
    std::vector<double> levels;
    std::vector<RadialField> fields;  // one solution per level
    RadialField u_infinity;           // last level, boundary marked divergent
    RadialField est_error;            // |last - previous|, boundary marked divergent
};

/// Solve the Dirichlet problem -Delta u = u - u^p with u = level on the
/// boundary.  `warm` (if given) seeds Newton via max(1, warm) elementwise.
inline RadialField solve_dirichlet_level(const GridPtr& grid, double p, double level,
                                         const SolverOptions& opts = {},
                                         const RadialField* warm = nullptr) {
    require(p > 1.0, "p must satisfy p > 1");
    require(std::isfinite(level) && level >= 1.0, "Dirichlet level must be >= 1");
    const RadialGrid& g = *grid;
    // q/mu are irrelevant for Dirichlet rows; the operator only supplies stencils.
    detail::ProblemOperator op(grid, p, 0.5, 0.0);

    auto residual_fn = [&](const std::vector<double>& u) {
        std::vector<double> F(g.size());
        for (std::size_t i = 0; i < g.size(); ++i)
            if (!g.is_boundary(i))
                F[i] = -detail::apply_stencil(op.lap_rows[i], u) - u[i] + op.pw(u[i], p);
        for (std::size_t b : g.boundary_indices) F[b] = u[b] - level;
        return F;
    };
    auto rows_fn = [&](const std::vector<double>& u, const std::vector<double>& F) {
        std::vector<double> s(g.size(), 0.0);
        for (std::size_t i = 0; i < g.size(); ++i)
            if (!g.is_boundary(i))
                s[i] = std::abs(F[i]) / (1.0 + std::abs(u[i]) + op.pw(u[i], p) +
                                         detail::apply_stencil_mag(op.lap_rows[i], u));
        for (std::size_t b : g.boundary_indices) s[b] = std::abs(F[b]) / (1.0 + level);
        return s;
    };
    auto jacobian_fn = [&](const std::vector<double>& u) {
        BandedMatrix J(g.size(), 2, 2);
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (g.is_boundary(i)) continue;
            const auto& row = op.lap_rows[i];
            for (std::size_t j = 0; j < row.w.size(); ++j) J.add(i, row.first + j, -row.w[j]);
            J.add(i, i, -1.0 + p * op.pw(u[i], p - 1.0));
        }
        for (std::size_t b : g.boundary_indices) J.add(b, b, 1.0);
        return J;
    };

    std::vector<double> u0(g.size(), 1.0);
    if (warm) {
        require(same_grid(g, *warm->grid), "solve_dirichlet_level: warm start grid mismatch");
        for (std::size_t i = 0; i < g.size(); ++i) u0[i] = std::max(1.0, warm->values[i]);
    }
    for (std::size_t b : g.boundary_indices) u0[b] = level;

    auto guard_fn = [&](std::size_t i, const std::vector<double>& u,
                        const std::vector<double>& F) {
        if (g.is_boundary(i)) return false; // Dirichlet rows always resolvable
        constexpr double ulps = 4.0;
        const double eps = std::numeric_limits<double>::epsilon();
        const auto& row = op.lap_rows[i];
        const double diag = -row.w[i - row.first] - 1.0 + p * op.pw(u[i], p - 1.0);
        return std::abs(F[i]) <= ulps * eps * std::abs(diag) * (1.0 + std::abs(u[i]));
    };
    auto outcome =
        detail::newton_core(std::move(u0), opts, residual_fn, rows_fn, jacobian_fn, guard_fn);
    RadialField u{grid, std::move(outcome.u)};
    for (std::size_t b : g.boundary_indices) u.values[b] = level; // impose exactly
    ensure_finite(u, "solve_dirichlet_level");
    return u;
}

/// Run the Dirichlet ladder and extrapolate.  Levels must be >= 1 and
/// strictly increasing; solves are warm-started level to level, inserting
/// geometric substeps if Newton stalls on a large jump.
inline BlowupApprox estimate_u_infinity(const GridPtr& grid, double p,
                                        const std::vector<double>& levels,
                                        const SolverOptions& opts = {}) {
    require(levels.size() >= 2, "need at least two Dirichlet levels to extrapolate");
    for (std::size_t i = 0; i + 1 < levels.size(); ++i)
        require(levels[i] < levels[i + 1], "Dirichlet levels must be strictly increasing");

    BlowupApprox out;
    out.grid = grid;
    out.p = p;
    out.levels = levels;

    RadialField prev;
    double prev_level = 1.0;
    for (double level : levels) {
        RadialField u;
        try {
            u = solve_dirichlet_level(grid, p, level, opts, prev.grid ? &prev : nullptr);
        } catch (const convergence_error&) {
            // walk up in geometric substeps when the direct jump stalls
            double at = prev_level;
            RadialField stage = prev;
            for (int depth = 0; depth < 64 && at < level; ++depth) {
                double mid = std::sqrt(std::max(at, 1.0) * level);
                if (mid >= 0.9 * level) mid = level;
                stage = solve_dirichlet_level(grid, p, mid, opts, stage.grid ? &stage : nullptr);
                at = mid;
            }
            require(at >= level, "estimate_u_infinity: level substepping failed to arrive");
            u = std::move(stage);
        }
        prev_level = level;
        if (prev.grid) {
            for (std::size_t i = 0; i < u.size(); ++i)
                if (u.values[i] < prev.values[i] * (1.0 - 1e-9) - 1e-9)
                    throw numerical_error(
                        "estimate_u_infinity: levels not nodewise monotone (grid too coarse?)");
        }
        out.fields.push_back(u);
        prev = std::move(u);
    }

    const RadialField& last = out.fields.back();
    const RadialField& before = out.fields[out.fields.size() - 2];
    out.u_infinity = last;
    out.est_error = make_field(grid);
    for (std::size_t i = 0; i < last.size(); ++i)
        out.est_error.values[i] = std::abs(last.values[i] - before.values[i]);
    const double inf = std::numeric_limits<double>::infinity();
    for (std::size_t b : grid->boundary_indices) {
        out.u_infinity.values[b] = inf;
        out.est_error.values[b] = inf;
    }
    return out;
}

/// Sup-distances between the continuation solutions and u_infinity over the
/// interior region { dist(x, boundary) >= eps }, in values and in discrete
/// Laplacians (a second-difference proxy for C^2-convergence).
struct LayerDistance {
    double mu = 0.0;
    double value_dist = 0.0;
    double second_diff_dist = 0.0;
};

inline std::vector<LayerDistance> layer_convergence(const ContinuationResult& cont,
                                                    const BlowupApprox& blowup, double eps) {
    require(cont.grid && blowup.grid, "layer_convergence: missing grids");
    require(same_grid(*cont.grid, *blowup.grid), "layer_convergence: continuation and limit grids differ");
    const RadialGrid& g = *cont.grid;
    require(eps > 0, "eps must be positive");
    require(eps < g.spec.inradius(), "eps must be smaller than the inradius");

    std::vector<std::size_t> region;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (g.boundary_distance(i) >= eps) region.push_back(i);
    require(region.size() >= 3, "eps leaves too few interior nodes");
    // Laplacian stencils at region nodes must not touch boundary nodes, where
    // u_infinity is divergent.
    for (std::size_t i : region) {
        const auto row = detail::laplacian_row(g, i);
        for (std::size_t j = 0; j < row.w.size(); ++j)
            require(!g.is_boundary(row.first + j),
                    "eps must exceed the boundary-adjacent grid spacing");
    }

    std::vector<LayerDistance> out;
    for (std::size_t k = 0; k < cont.mu_values.size(); ++k) {
        const auto& u = cont.solutions[k].u.values;
        LayerDistance d;
        d.mu = cont.mu_values[k];
        for (std::size_t i : region) {
            d.value_dist = std::max(d.value_dist, std::abs(u[i] - blowup.u_infinity.values[i]));
            const double lu = detail::laplacian_at(g, u, i);
            const double lv = detail::laplacian_at(g, blowup.u_infinity.values, i);
            d.second_diff_dist = std::max(d.second_diff_dist, std::abs(lu - lv));
        }
        out.push_back(d);
    }
    return out;
}

} // namespace loglayer
