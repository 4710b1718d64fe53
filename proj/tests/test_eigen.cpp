#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "loglayer/eigen.hpp"
#include "oracles.hpp"

using namespace loglayer;

namespace {
GridPtr disk_grid(std::size_t m) {
    return build_grid(DomainSpec{DomainKind::ball, 2, 0.0, 1.0}, m, Grading::boundary_graded(2.0));
}
} // namespace

TEST_CASE("principal eigenpair on the unit disk matches the Bessel oracle") {
    auto g = disk_grid(801);
    auto pair = principal_eigenpair(g);

    const double beta_oracle = oracles::disk_beta(); // j01^2 = 5.783185962946785
    CHECK(pair.beta == Catch::Approx(beta_oracle).epsilon(2e-5));
    CHECK(pair.residual <= 1e-10); // row-relative eigen-equation defect

    // sup-normalization and positivity
    double maxv = 0.0;
    for (double v : pair.phi.values) {
        CHECK(v >= 0.0);
        maxv = std::max(maxv, v);
    }
    CHECK(maxv == 1.0);
    CHECK(pair.phi.values.back() == 0.0); // Dirichlet

    // eigenfunction matches J0(j01 r) pointwise (same normalization: J0(0)=1)
    const double z = oracles::j01();
    for (std::size_t i = 0; i < g->size(); i += 40)
        CHECK(pair.phi.values[i] ==
              Catch::Approx(std::cyl_bessel_j(0.0, z * g->nodes[i])).margin(2e-5));

    // derivative field: -phi'(1) = j01 J1(j01)
    CHECK(-pair.phi_prime.values.back() == Catch::Approx(oracles::disk_c1()).epsilon(1e-4));
}

TEST_CASE("principal eigenpair on the unit ball in R^3") {
    auto g = build_grid(DomainSpec{DomainKind::ball, 3, 0.0, 1.0}, 801,
                        Grading::boundary_graded(2.0));
    auto pair = principal_eigenpair(g);
    CHECK(pair.beta == Catch::Approx(oracles::ball3_beta()).epsilon(2e-5));
    for (std::size_t i = 0; i < g->size(); i += 40)
        CHECK(pair.phi.values[i] == Catch::Approx(oracles::ball3_phi(g->nodes[i])).margin(2e-5));
}

TEST_CASE("principal eigenpair on the annulus matches the cross-product oracle") {
    auto g = build_grid(DomainSpec{DomainKind::annulus, 2, 0.5, 1.0}, 801,
                        Grading::boundary_graded(2.0));
    auto pair = principal_eigenpair(g);
    CHECK(pair.beta == Catch::Approx(oracles::annulus2_beta(0.5, 1.0)).epsilon(2e-5));
    CHECK(pair.phi.values.front() == 0.0);
    CHECK(pair.phi.values.back() == 0.0);
}

TEST_CASE("eigenvalue converges at second order in the grid") {
    const double exact = oracles::disk_beta();
    double e1 = 0, e2 = 0;
    {
        auto p = principal_eigenpair(disk_grid(251));
        e1 = std::abs(p.beta - exact);
    }
    {
        auto p = principal_eigenpair(disk_grid(501));
        e2 = std::abs(p.beta - exact);
    }
    const double order = std::log(e1 / e2) / std::log(2.0);
    CHECK(order >= 1.9);
}

TEST_CASE("rayleigh quotient is consistent with the eigenvalue") {
    auto g = disk_grid(401);
    auto pair = principal_eigenpair(g);
    CHECK(rayleigh_quotient(pair.phi) == Catch::Approx(pair.beta).epsilon(1e-8));
}
