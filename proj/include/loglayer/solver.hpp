#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "barriers.hpp"
#include "eigen.hpp"
#include "errors.hpp"
#include "grid.hpp"
#include "linalg.hpp"

namespace loglayer {

/// Parameters of the Neumann problem
///   -Delta u = u - u^p in Omega,   du/dnu = mu u^q on the boundary.
struct ProblemParams {
    DomainSpec domain;
    double p = 3.0;
    double q = 0.5;
    double mu = 0.0;

    void validate() const {
        domain.validate();
        validate_exponents(p, q);
        require(std::isfinite(mu) && mu >= 0.0, "mu must satisfy mu >= 0");
    }
};

struct SolverOptions {
    double tol = 1e-10;        // scaled residual sup-norm target
    int max_iter = 50;
    int max_backtracks = 30;   // step halvings per Newton iteration
    double floor = 1e-6;       // positivity floor for iterates
};

struct ResidualParts {
    RadialField interior;          // -Delta u - u + u^p at every node
    std::vector<double> boundary;  // du/dnu - mu u^q per boundary node
    double norm = 0.0;             // scaled sup-norm over the two blocks
};

struct Solution {
    ProblemParams params;
    RadialField u;
    double residual_norm = 0.0;
    int newton_iters = 0;
    std::vector<double> residual_history;
};

namespace detail {

/// Cached stencil rows and row assembly for one (grid, p, q, mu) problem.
struct ProblemOperator {
    GridPtr grid;
    double p, q, mu;
    double floor;
    std::vector<StencilEntry> lap_rows;                      // per node (unused at boundary)
    std::vector<std::pair<std::size_t, StencilEntry>> bc_rows; // boundary rows with nu sign applied

    ProblemOperator(GridPtr g, double p_, double q_, double mu_, double floor_ = 1e-6)
        : grid(std::move(g)), p(p_), q(q_), mu(mu_), floor(floor_) {
        const RadialGrid& gr = *grid;
        lap_rows.resize(gr.size());
        for (std::size_t i = 0; i < gr.size(); ++i)
            if (!gr.is_boundary(i)) lap_rows[i] = laplacian_row(gr, i);
        for (std::size_t b : gr.boundary_indices) {
            StencilEntry row = derivative_row(gr, b);
            if (b == 0)
                for (double& w : row.w) w = -w; // nu = -d/dr at an inner boundary
            bc_rows.emplace_back(b, std::move(row));
        }
    }

    double pw(double u, double e) const { return std::pow(std::max(u, floor), e); }

    /// Full residual vector: interior rows -Lu - u + u^p, boundary rows Du - mu u^q.
    std::vector<double> residual_vec(const std::vector<double>& u) const {
        const RadialGrid& g = *grid;
        std::vector<double> F(g.size());
        for (std::size_t i = 0; i < g.size(); ++i)
            if (!g.is_boundary(i))
                F[i] = -apply_stencil(lap_rows[i], u) - u[i] + pw(u[i], p);
        for (const auto& [b, row] : bc_rows)
            F[b] = apply_stencil(row, u) - mu * pw(u[b], q);
        return F;
    }

    /// Sup-norm of the residual with per-row scaling: each row is divided by
    /// the magnitude of the terms that compose it (reaction scale plus the
    /// absolute sum of the stencil differences).  This is a backward-error
    /// measure, so the achievable floor is a few ulps per row even inside
    /// strongly graded boundary layers where the raw stencil weights are huge.
    double scaled_norm(const std::vector<double>& u, const std::vector<double>& F) const {
        double nrm = 0.0;
        for (double v : row_scaled(u, F)) nrm = std::max(nrm, v);
        return nrm;
    }

    /// Derivative of the residual at u applied to a direction v, evaluated in
    /// stencil-difference form.  Equals jacobian(u) * v in exact arithmetic,
    /// but the rounding error stays proportional to the local variation of v:
    /// inside graded layers the assembled matrix rows carry weights ~1/h^2
    /// whose products with |v| drown the result, while the difference form
    /// cancels before rounding.  Used by the eigenvalue solver.
    std::vector<double> linearized_apply(const std::vector<double>& u,
                                         const std::vector<double>& v) const {
        const RadialGrid& g = *grid;
        std::vector<double> out(g.size());
        for (std::size_t i = 0; i < g.size(); ++i)
            if (!g.is_boundary(i))
                out[i] = -apply_stencil(lap_rows[i], v) +
                         (-1.0 + p * pw(u[i], p - 1.0)) * v[i];
        for (const auto& [b, row] : bc_rows)
            out[b] = apply_stencil(row, v) - q * mu * pw(u[b], q - 1.0) * v[b];
        return out;
    }

    /// Per-row scaled residuals (the entries whose max scaled_norm takes).
    std::vector<double> row_scaled(const std::vector<double>& u,
                                   const std::vector<double>& F) const {
        const RadialGrid& g = *grid;
        std::vector<double> s(g.size(), 0.0);
        for (std::size_t i = 0; i < g.size(); ++i)
            if (!g.is_boundary(i))
                s[i] = std::abs(F[i]) / (1.0 + std::abs(u[i]) + pw(u[i], p) +
                                         apply_stencil_mag(lap_rows[i], u));
        for (const auto& [b, row] : bc_rows)
            s[b] = std::abs(F[b]) / (1.0 + mu * pw(u[b], q) + apply_stencil_mag(row, u));
        return s;
    }

    /// Diagonal entry of the Jacobian for row i.
    double jacobian_diag(std::size_t i, const std::vector<double>& u) const {
        if (!grid->is_boundary(i)) {
            const StencilEntry& row = lap_rows[i];
            return -row.w[i - row.first] - 1.0 + p * pw(u[i], p - 1.0);
        }
        for (const auto& [b, row] : bc_rows)
            if (b == i) return row.w[i - row.first] - q * mu * pw(u[i], q - 1.0);
        return 1.0;
    }

    /// True when row i's residual would move u_i by at most a few ulps through
    /// the row's own diagonal.  Inside strongly graded layers the stencil
    /// weights are so large that stored nodal values (which advance in steps of
    /// ulp(u)) cannot tune the row any finer than this; such a row is as
    /// converged as double storage of u allows, and its leftover residual has
    /// sub-ulp effect on the solution.
    bool ulp_pinned(std::size_t i, const std::vector<double>& u,
                    const std::vector<double>& F) const {
        constexpr double ulps = 4.0;
        const double eps = std::numeric_limits<double>::epsilon();
        return std::abs(F[i]) <= ulps * eps * std::abs(jacobian_diag(i, u)) * (1.0 + std::abs(u[i]));
    }

    /// Every row either meets the scaled tolerance or is pinned at its ulp
    /// floor; the convergence statement shared by the solvers.
    bool rows_converged(const std::vector<double>& u, const std::vector<double>& F,
                        double tol) const {
        const std::vector<double> s = row_scaled(u, F);
        for (std::size_t i = 0; i < s.size(); ++i)
            if (s[i] > tol && !ulp_pinned(i, u, F)) return false;
        return true;
    }

    /// Jacobian of the residual (bandwidth 2 from the one-sided boundary rows).
    BandedMatrix jacobian(const std::vector<double>& u) const {
        const RadialGrid& g = *grid;
        BandedMatrix J(g.size(), 2, 2);
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (g.is_boundary(i)) continue;
            const auto& row = lap_rows[i];
            for (std::size_t j = 0; j < row.w.size(); ++j) J.add(i, row.first + j, -row.w[j]);
            J.add(i, i, -1.0 + p * pw(u[i], p - 1.0));
        }
        for (const auto& [b, row] : bc_rows) {
            for (std::size_t j = 0; j < row.w.size(); ++j) J.add(b, row.first + j, row.w[j]);
            J.add(b, b, -q * mu * pw(u[b], q - 1.0));
        }
        return J;
    }
};

struct NewtonOutcome {
    std::vector<double> u;
    double norm = 0.0;
    int iters = 0;
    std::vector<double> history;
};

/// Damped Newton on a generic residual/Jacobian pair with a positivity floor.
/// `row_scaled(u, F)` returns per-row scaled residuals and `ulp_pinned(i, u, F)`
/// says whether row i sits at its representability floor.  When the line
/// search stalls, rows passing that guard are pinned — excluded from the
/// descent norm — and the iteration continues: inside strongly graded layers
/// no representable iterate can reduce those rows further, and keeping them in
/// the max would freeze every other row at whatever value it happened to have
/// when the max first hit the floor.  Pins are re-verified on acceptance.
template <class ResidualFn, class RowScaledFn, class JacobianFn, class GuardFn>
NewtonOutcome newton_core(std::vector<double> u, const SolverOptions& opts,
                          ResidualFn&& residual, RowScaledFn&& row_scaled,
                          JacobianFn&& jacobian, GuardFn&& ulp_pinned) {
    for (double& v : u) v = std::max(v, opts.floor);
    NewtonOutcome out;
    std::vector<double> F = residual(u);
    std::vector<double> scal = row_scaled(u, F);
    std::vector<char> pinned(u.size(), 0);
    const auto masked_max = [&pinned](const std::vector<double>& s) {
        double m = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i)
            if (!pinned[i]) m = std::max(m, s[i]);
        return m;
    };
    const auto accept = [&](int iters) {
        for (std::size_t i = 0; i < u.size(); ++i)
            if (pinned[i] && scal[i] > opts.tol && !ulp_pinned(i, u, F))
                throw convergence_error("newton: pinned row left its ulp floor", out.history);
        double full = 0.0;
        for (double v : scal) full = std::max(full, v);
        out.u = std::move(u);
        out.norm = full;
        out.iters = iters;
        return std::move(out);
    };
    double nrm = masked_max(scal);
    out.history.push_back(nrm);
    for (int it = 0; it < opts.max_iter; ++it) {
        if (nrm <= opts.tol) return accept(it);
        BandedMatrix J = jacobian(u);
        J.factorize();
        std::vector<double> rhs(F.size());
        for (std::size_t i = 0; i < F.size(); ++i) rhs[i] = -F[i];
        const std::vector<double> delta = J.solve(std::move(rhs));

        // Fraction-to-the-boundary cap: a single step may remove at most 90%
        // of any component.  Without it a long downhill step can chop the
        // whole iterate onto the positivity floor, where the scaled residual
        // of the flat field is deceptively small and the line search would
        // accept a point far outside the basin.
        double t = 1.0;
        for (std::size_t i = 0; i < u.size(); ++i)
            if (delta[i] < 0.0) t = std::min(t, -0.9 * u[i] / delta[i]);
        bool accepted = false;
        for (int bt = 0; bt <= opts.max_backtracks; ++bt) {
            std::vector<double> u_try(u.size());
            for (std::size_t i = 0; i < u.size(); ++i)
                u_try[i] = std::max(u[i] + t * delta[i], opts.floor);
            std::vector<double> F_try = residual(u_try);
            std::vector<double> scal_try = row_scaled(u_try, F_try);
            const double n_try = masked_max(scal_try);
            if (std::isfinite(n_try) && n_try < nrm) {
                u = std::move(u_try);
                F = std::move(F_try);
                scal = std::move(scal_try);
                nrm = n_try;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        out.history.push_back(nrm);
        if (!accepted) {
            bool grew = false;
            for (std::size_t i = 0; i < u.size(); ++i)
                if (!pinned[i] && scal[i] > opts.tol && ulp_pinned(i, u, F)) {
                    pinned[i] = 1;
                    grew = true;
                }
            const double reduced = masked_max(scal);
            if (!grew || !(reduced < nrm))
                throw convergence_error("newton: line search stalled (no residual decrease)",
                                        out.history);
            nrm = reduced;
        }
    }
    if (nrm <= opts.tol) return accept(opts.max_iter);
    throw convergence_error("newton: iteration cap reached before convergence", out.history);
}

inline GridPtr grid_of(const RadialField& f) { return f.grid; }

inline void check_params_grid(const ProblemParams& params, const RadialGrid& g) {
    params.validate();
    require(g.spec.kind == params.domain.kind && g.spec.dim == params.domain.dim &&
                g.spec.r_inner == params.domain.r_inner && g.spec.r_outer == params.domain.r_outer,
            "grid domain does not match problem domain");
}

} // namespace detail

/// Residual of the Neumann problem at a positive nodal field.
inline ResidualParts residual(const ProblemParams& params, const RadialField& u) {
    check_field(u, "residual");
    detail::check_params_grid(params, *u.grid);
    for (double v : u.values)
        if (!(v > 0)) throw validation_error("residual: u must be positive nodewise");
    detail::ProblemOperator op(u.grid, params.p, params.q, params.mu);
    ResidualParts parts;
    const auto F = op.residual_vec(u.values);
    parts.interior = make_field(u.grid);
    for (std::size_t i = 0; i < u.size(); ++i)
        parts.interior.values[i] = u.grid->is_boundary(i)
            ? -detail::laplacian_at(*u.grid, u.values, i) - u.values[i] + std::pow(u.values[i], params.p)
            : F[i];
    for (std::size_t b : u.grid->boundary_indices) parts.boundary.push_back(F[b]);
    parts.norm = op.scaled_norm(u.values, F);
    return parts;
}

/// Damped Newton solve of the Neumann problem from a positive initial field.
inline Solution newton_solve(const ProblemParams& params, const RadialField& initial,
                             const SolverOptions& opts = {}) {
    check_field(initial, "newton_solve");
    detail::check_params_grid(params, *initial.grid);
    for (double v : initial.values)
        if (!(v > 0)) throw validation_error("newton_solve: initial guess must be positive");

    detail::ProblemOperator op(initial.grid, params.p, params.q, params.mu, opts.floor);
    // Every positive solution satisfies u >= 1: at an interior minimum
    // -Delta u <= 0 forces u - u^p >= 0, and for mu > 0 the boundary
    // condition rules out a boundary minimum.  Lifting the guess to 1 can
    // therefore only move it closer to the solution nodewise, and it keeps
    // moderate-mu cold starts inside the Newton basin (below 1 the boundary
    // linearization q mu u^{q-1} dominates and the first step overshoots).
    std::vector<double> start = initial.values;
    for (double& v : start) v = std::max(v, 1.0);
    auto outcome = detail::newton_core(
        std::move(start), opts,
        [&](const std::vector<double>& u) { return op.residual_vec(u); },
        [&](const std::vector<double>& u, const std::vector<double>& F) { return op.row_scaled(u, F); },
        [&](const std::vector<double>& u) { return op.jacobian(u); },
        [&](std::size_t i, const std::vector<double>& u, const std::vector<double>& F) {
            return op.ulp_pinned(i, u, F);
        });

    for (double v : outcome.u)
        if (!(v > opts.floor))
            throw numerical_error("newton_solve: positivity floor active at convergence");

    Solution sol;
    sol.params = params;
    sol.u = RadialField{initial.grid, std::move(outcome.u)};
    sol.residual_norm = outcome.norm;
    sol.newton_iters = outcome.iters;
    sol.residual_history = std::move(outcome.history);
    ensure_finite(sol.u, "newton_solve");
    return sol;
}

enum class BarrierSide { sub, super };

struct MonotoneOptions {
    double tol = 1e-8;
    int max_iter = 5000;
    std::optional<double> K;   // force a fixed interior relaxation constant
    std::optional<double> Kb;  // force a fixed boundary relaxation constant
    double slack = 1e-9;       // relative tolerance for the monotonicity check
    std::function<void(int, const RadialField&, const RadialField&)> observer; // (iter, sub, super)
};

/// Monotone relaxation between the two barrier profiles:
///   (-L + K) u_{k+1} = K u_k + u_k - u_k^p,   (D + Kb) u_{k+1} = Kb u_k + mu u_k^q.
/// Both sides are advanced together so the relaxation constants can track the
/// current bracket (the Lipschitz bound is only needed on [sub_k, super_k]),
/// which keeps the linear convergence factor away from 1.  Returns the side
/// asked for; iterates from the sub side ascend, from the super side descend,
/// and the two brackets order each other at every step.
inline Solution monotone_iterate(const ProblemParams& params, const EigenPair& pair,
                                 const BarrierKit& kit, BarrierSide side,
                                 const MonotoneOptions& opts = {}) {
    detail::check_params_grid(params, *pair.phi.grid);
    require(params.mu >= kit.mu_lower, "monotone_iterate requires mu >= mu_lower of the barrier kit");
    const GridPtr grid = pair.phi.grid;
    const RadialGrid& g = *grid;
    const double p = params.p, q = params.q, mu = params.mu;

    RadialField lo_f = barrier_profile(kit.A_lower, pair, mu, p, q);
    RadialField hi_f = barrier_profile(kit.A_upper, pair, mu, p, q);
    std::vector<double> lo = lo_f.values, hi = hi_f.values;

    detail::ProblemOperator op(grid, p, q, mu);
    std::vector<double> hist;
    std::vector<double> K(g.size()), Kb(g.size());
    for (int it = 1; it <= opts.max_iter; ++it) {
        // Nodewise relaxation constants from the current bracket: the
        // Lipschitz bound is only needed on [lo_i, hi_i] at each node, which
        // keeps the interior constants O(1) even when the boundary values are
        // large and makes the contraction rate independent of mu.
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (!(lo[i] > 0)) throw scheme_error("monotone_iterate: bracket lost positivity");
            K[i] = opts.K.value_or(std::max(p * std::pow(hi[i], p - 1.0) - 1.0, 0.0) + 1.0);
            Kb[i] = opts.Kb.value_or(q * mu * std::pow(lo[i], q - 1.0) + 1.0);
        }

        BandedMatrix Mz(g.size(), 2, 2);
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (g.is_boundary(i)) continue;
            const auto& row = op.lap_rows[i];
            for (std::size_t j = 0; j < row.w.size(); ++j) Mz.add(i, row.first + j, -row.w[j]);
            Mz.add(i, i, K[i]);
        }
        for (const auto& [b, row] : op.bc_rows) {
            for (std::size_t j = 0; j < row.w.size(); ++j) Mz.add(b, row.first + j, row.w[j]);
            Mz.add(b, b, Kb[b]);
        }
        Mz.factorize();

        auto advance = [&](const std::vector<double>& u) {
            std::vector<double> rhs(g.size());
            for (std::size_t i = 0; i < g.size(); ++i)
                if (!g.is_boundary(i)) rhs[i] = K[i] * u[i] + u[i] - std::pow(u[i], p);
            for (std::size_t b : g.boundary_indices)
                rhs[b] = Kb[b] * u[b] + mu * std::pow(u[b], q);
            return Mz.solve(std::move(rhs));
        };
        std::vector<double> lo_next = advance(lo);
        std::vector<double> hi_next = advance(hi);

        for (std::size_t i = 0; i < g.size(); ++i) {
            const double tol_i = opts.slack * (1.0 + std::abs(hi[i]));
            if (lo_next[i] < lo[i] - tol_i)
                throw scheme_error("monotone_iterate: ascending iterate decreased (K too small)");
            if (hi_next[i] > hi[i] + tol_i)
                throw scheme_error("monotone_iterate: descending iterate increased (K too small)");
            if (lo_next[i] > hi_next[i] + tol_i)
                throw scheme_error("monotone_iterate: brackets crossed");
        }
        lo = std::move(lo_next);
        hi = std::move(hi_next);
        if (opts.observer)
            opts.observer(it, RadialField{grid, lo}, RadialField{grid, hi});

        const std::vector<double>& u_side = (side == BarrierSide::sub) ? lo : hi;
        const auto F = op.residual_vec(u_side);
        const double nrm = op.scaled_norm(u_side, F);
        hist.push_back(nrm);
        // rows_converged subsumes nrm <= tol and additionally admits rows
        // pinned at the grid's representability floor (see ulp_pinned).
        if (nrm <= opts.tol || op.rows_converged(u_side, F, opts.tol)) {
            Solution sol;
            sol.params = params;
            sol.u = RadialField{grid, u_side};
            sol.residual_norm = nrm;
            sol.newton_iters = it;
            sol.residual_history = std::move(hist);
            ensure_finite(sol.u, "monotone_iterate");
            return sol;
        }
    }
    throw convergence_error("monotone_iterate: iteration cap reached", hist);
}

/// Sensitivity field w = du/dmu, solving the linearization of the problem at
/// a computed solution:
///   (-Delta - 1 + p u^{p-1}) w = 0,    (d/dnu - q mu u^{q-1}) w = u^q.
inline RadialField sensitivity(const ProblemParams& params, const Solution& sol) {
    check_field(sol.u, "sensitivity");
    detail::check_params_grid(params, *sol.u.grid);
    detail::ProblemOperator op(sol.u.grid, params.p, params.q, params.mu);
    BandedMatrix J = op.jacobian(sol.u.values);
    J.factorize();
    std::vector<double> rhs(sol.u.size(), 0.0);
    for (std::size_t b : sol.u.grid->boundary_indices)
        rhs[b] = std::pow(sol.u.values[b], params.q);
    RadialField w{sol.u.grid, J.solve(std::move(rhs))};
    ensure_finite(w, "sensitivity");
    return w;
}

/// Principal eigenvalue of the linearization about a solution v, with the
/// eigenvalue appearing in the interior and the boundary rows alike:
///   (-Delta - 1 + p v^{p-1}) phi = gamma phi  in Omega,
///   (d/dnu - q mu v^{q-1}) phi = gamma phi    on the boundary.
/// `formula` is the quadrature quotient
///   [(p-1) int v^q phi dx + mu (1-q) int_bdry v^q phi dsigma] /
///   [int v phi dx + int_bdry v phi dsigma]
/// evaluated exactly as stated; `direct` is the matrix eigenvalue.
struct Gamma1 {
    double direct = 0.0;
    double formula = 0.0;
    RadialField eigenfunction;
    int iterations = 0;
};

inline Gamma1 linearized_gamma1(const ProblemParams& params, const Solution& sol,
                                double tol = 1e-10, int max_iter = 2000) {
    check_field(sol.u, "linearized_gamma1");
    detail::check_params_grid(params, *sol.u.grid);
    detail::ProblemOperator op(sol.u.grid, params.p, params.q, params.mu);
    BandedMatrix J = op.jacobian(sol.u.values);
    J.factorize();

    // All inner products use the volume measure on interior rows and the
    // surface measure on boundary rows.  In that pairing the linearization is
    // self-adjoint up to discretization error (the surface term absorbs the
    // Green boundary contribution), so Rayleigh quotients and Ritz values are
    // trustworthy; in the plain Euclidean pairing the graded layer rows carry
    // weights ~1/h^2 whose rounding noise drowns the eigenvalue signal.
    const RadialGrid& g = *sol.u.grid;
    const std::size_t n = sol.u.size();
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = volume_weight(g, i);
    for (std::size_t b : g.boundary_indices)
        d[b] = unit_sphere_area(g.spec.dim) * std::pow(g.nodes[b], g.spec.dim - 1);
    const auto dot_d = [&](const std::vector<double>& a, const std::vector<double>& b2) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += d[i] * a[i] * b2[i];
        return s;
    };
    const auto normalize_d = [&](std::vector<double>& v) {
        const double nv = std::sqrt(dot_d(v, v));
        if (!(nv > 0.0) || !std::isfinite(nv))
            throw numerical_error("linearized_gamma1: inverse iteration degenerated");
        for (double& c : v) c /= nv;
    };
    const auto apply = [&](const std::vector<double>& v) {
        return op.linearized_apply(sol.u.values, v);
    };

    // Block inverse iteration with a two-dimensional subspace.  The principal
    // eigenvalue is simple, but the second can sit arbitrarily close: on an
    // annulus the two boundary components carry almost-decoupled modes, and
    // near the crossover to the interior-limit branch the curves avoid each
    // other narrowly.  Single-vector inverse iteration contracts like
    // gamma1/gamma2 and stalls on such a pair, while Rayleigh shifts risk
    // locking onto the second mode; a two-vector subspace contracts at
    // gamma2/gamma3 and separates the pair through the 2x2 Ritz problem.
    std::vector<double> x1(n, 1.0), x2(n);
    for (std::size_t i = 0; i < n; ++i) x2[i] = g.nodes[i];
    normalize_d(x1);
    normalize_d(x2);

    std::vector<double> x;
    double gamma = 0.0, resid = 0.0;
    int used = 0;
    for (int it = 1; it <= max_iter; ++it) {
        std::vector<double> y1 = J.solve(x1);
        std::vector<double> y2 = J.solve(x2);
        normalize_d(y1);
        const double proj = dot_d(y1, y2);
        for (std::size_t i = 0; i < n; ++i) y2[i] -= proj * y1[i];
        double n2 = std::sqrt(dot_d(y2, y2));
        if (!(n2 > 1e-14) || !std::isfinite(n2)) {
            // second direction collapsed onto the first; re-seed it
            for (std::size_t i = 0; i < n; ++i) y2[i] = (i % 2 ? 1.0 : -1.0) * y1[i];
            const double pr = dot_d(y1, y2);
            for (std::size_t i = 0; i < n; ++i) y2[i] -= pr * y1[i];
            n2 = std::sqrt(dot_d(y2, y2));
            if (!(n2 > 0.0) || !std::isfinite(n2))
                throw numerical_error("linearized_gamma1: inverse iteration degenerated");
        }
        for (double& c : y2) c /= n2;
        x1 = y1;
        x2 = y2;
        used = it;

        // Rayleigh-Ritz on span{y1, y2}: the smaller eigenvalue of the
        // projected 2x2 block approximates the principal eigenvalue.
        const std::vector<double> Jy1 = apply(y1);
        const std::vector<double> Jy2 = apply(y2);
        const double a = dot_d(y1, Jy1), b = dot_d(y1, Jy2);
        const double c = dot_d(y2, Jy1), dd = dot_d(y2, Jy2);
        const double disc = (a - dd) * (a - dd) + 4.0 * b * c;
        if (disc < 0.0) {
            // transient complex Ritz pair; keep powering the subspace
            if (it == max_iter)
                throw convergence_error("linearized_gamma1: inverse iteration did not converge", {resid});
            continue;
        }
        const double theta = 0.5 * (a + dd - std::sqrt(disc));
        // eigenvector of the 2x2 block for theta, from its better-conditioned row
        double e1, e2;
        if (std::abs(a - theta) > std::abs(dd - theta)) {
            e1 = -b;
            e2 = a - theta;
        } else {
            e1 = dd - theta;
            e2 = -c;
        }
        if (e1 == 0.0 && e2 == 0.0) e1 = 1.0;
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = e1 * y1[i] + e2 * y2[i];
        const double nv = std::sqrt(dot_d(v, v));
        if (!(nv > 0.0) || !std::isfinite(nv)) continue;
        for (double& c2 : v) c2 /= nv;
        const std::vector<double> Jv = apply(v);
        gamma = dot_d(v, Jv); // stationary refinement of theta
        double eta2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = Jv[i] - gamma * v[i];
            eta2 += d[i] * r * r;
        }
        resid = std::sqrt(eta2) / (std::abs(gamma) + 1.0);
        if (resid <= tol) {
            x = std::move(v);
            break;
        }
        if (it == max_iter)
            throw convergence_error("linearized_gamma1: inverse iteration did not converge", {resid});
    }

    // orient and sup-normalize the eigenfunction
    double mx = 0.0;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (std::abs(x[i]) > mx) { mx = std::abs(x[i]); arg = i; }
    const double sgn = x[arg] < 0 ? -1.0 : 1.0;
    for (double& v : x) v *= sgn / mx;

    Gamma1 out;
    out.direct = gamma;
    out.iterations = used;
    out.eigenfunction = RadialField{sol.u.grid, std::move(x)};

    RadialField vq_phi = make_field(sol.u.grid);
    RadialField v_phi = make_field(sol.u.grid);
    for (std::size_t i = 0; i < n; ++i) {
        vq_phi.values[i] = std::pow(sol.u.values[i], params.q) * out.eigenfunction.values[i];
        v_phi.values[i] = sol.u.values[i] * out.eigenfunction.values[i];
    }
    const double num = (params.p - 1.0) * integrate_volume(vq_phi)
                     + params.mu * (1.0 - params.q) * integrate_boundary(vq_phi);
    const double den = integrate_volume(v_phi) + integrate_boundary(v_phi);
    require(den != 0.0, "linearized_gamma1: degenerate quotient denominator");
    out.formula = num / den;
    return out;
}

/// One recorded continuation point per scheduled mu.
struct ContinuationResult {
    GridPtr grid;
    double p = 0.0, q = 0.0;
    std::vector<double> mu_values;
    std::vector<Solution> solutions;
    std::vector<double> boundary_values; // u at the outer boundary node
    std::vector<double> gamma1_direct;
    std::vector<double> gamma1_formula;
    std::vector<RadialField> sensitivities;
};

/// Thrown when the continuation cannot reach the next scheduled mu; carries
/// the part of the curve computed so far.
struct continuation_error : convergence_error {
    std::shared_ptr<ContinuationResult> partial;
    continuation_error(const std::string& msg, std::shared_ptr<ContinuationResult> part)
        : convergence_error(msg), partial(std::move(part)) {}
};

/// Natural continuation in mu from the trivial branch u(0) = 1, with a
/// tangent predictor from the sensitivity field and step halving between
/// scheduled values on corrector failure.
inline ContinuationResult continue_in_mu(const GridPtr& grid, double p, double q,
                                         const std::vector<double>& mu_schedule,
                                         const SolverOptions& opts = {}) {
    validate_exponents(p, q);
    require(!mu_schedule.empty() && mu_schedule.front() == 0.0,
            "mu schedule must start at 0");
    for (std::size_t i = 0; i + 1 < mu_schedule.size(); ++i)
        require(mu_schedule[i] < mu_schedule[i + 1], "mu schedule must be strictly increasing");

    auto result = std::make_shared<ContinuationResult>();
    result->grid = grid;
    result->p = p;
    result->q = q;

    ProblemParams params{grid->spec, p, q, 0.0};
    const std::size_t outer = grid->boundary_indices.back();

    auto record = [&](const Solution& sol) {
        const auto g1 = linearized_gamma1(sol.params, sol);
        RadialField w = sensitivity(sol.params, sol);
        result->mu_values.push_back(sol.params.mu);
        result->solutions.push_back(sol);
        result->boundary_values.push_back(sol.u.values[outer]);
        result->gamma1_direct.push_back(g1.direct);
        result->gamma1_formula.push_back(g1.formula);
        result->sensitivities.push_back(std::move(w));
    };

    Solution current = newton_solve(params, make_field(grid, 1.0), opts);
    record(current);
    RadialField w = result->sensitivities.back();

    for (std::size_t s = 1; s < mu_schedule.size(); ++s) {
        const double target = mu_schedule[s];
        double mu_at = current.params.mu;
        double step = target - mu_at;
        while (mu_at < target) {
            step = std::min(step, target - mu_at);
            const double mu_try = mu_at + step;
            RadialField guess = current.u;
            for (std::size_t i = 0; i < guess.size(); ++i)
                guess.values[i] = std::max(guess.values[i] + step * w.values[i], opts.floor);
            ProblemParams trial{grid->spec, p, q, mu_try};
            bool ok = false;
            try {
                Solution next = newton_solve(trial, guess, opts);
                current = std::move(next);
                mu_at = mu_try;
                w = sensitivity(current.params, current);
                ok = true;
            } catch (const convergence_error&) {
            } catch (const numerical_error&) {
            }
            if (!ok) {
                step *= 0.5;
                if (step < 1e-12 * std::max(1.0, target))
                    throw continuation_error(
                        "continue_in_mu: corrector kept failing after step underflow", result);
            }
        }
        record(current);
        w = result->sensitivities.back();
    }
    return *result;
}

} // namespace loglayer
